#include "cqsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cqsim/errors.hpp"
#include "cqsim/measure.hpp"
#include "cqsim/parallel.hpp"

namespace cqsim {

std::string_view to_string(Picture p) noexcept { return p == Picture::True ? "true" : "linear"; }

Picture picture_from_string(std::string_view s) {
  if (s == "true") return Picture::True;
  if (s == "linear") return Picture::Linear;
  throw ValidationError("picture must be \"true\" or \"linear\", got \"" + std::string(s) + "\"");
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("sim.dt must be > 0");
  if (!(t_final >= dt) || !std::isfinite(t_final)) throw ValidationError("sim.T_final must be >= dt");
  if (n_traj < 1) throw ValidationError("sim.n_traj must be >= 1");
  if (n_checkpoints < 1) throw ValidationError("sim.n_checkpoints must be >= 1");
  if (n_checkpoints > n_steps()) throw ValidationError("sim.n_checkpoints exceeds the number of steps");
}

std::size_t SimConfig::n_steps() const {
  return static_cast<std::size_t>(std::llround(t_final / dt));
}

std::vector<std::size_t> SimConfig::checkpoint_steps() const {
  const std::size_t steps = n_steps();
  std::vector<std::size_t> out(n_checkpoints + 1);
  for (std::size_t c = 0; c <= n_checkpoints; ++c) out[c] = (c * steps) / n_checkpoints;
  return out;
}

CQState make_initial_state(const TheoryDefinition& theory, const StateVector& psi, double z0) {
  if (psi.size() != theory.dim()) throw DimensionError("initial state dimension does not match theory");
  if (!psi.is_finite() || !std::isfinite(z0)) throw ValidationError("initial state must be finite");
  return CQState{0.0, z0, normalize_to_measure(theory.family(), psi)};
}

namespace {

void require_finite(const CQState& s) {
  if (!std::isfinite(s.z) || !s.psi.is_finite()) {
    throw NumericalError("non-finite state (step size too large?)");
  }
}

StateVector rescale_to_measure(const MeasureFamily& family, const StateVector& psi) {
  const double g = eval_g(family, psi);
  if (outside_support(family, psi, g)) {
    throw MeasureSupportError("state left the measure support (g -> 0)");
  }
  const int deg = family.degree();
  const double lambda = deg == 1 ? 1.0 / std::sqrt(g) : std::pow(g, -0.5 / deg);
  return lambda * psi;
}

/// psi + A psi dt + B psi dX, written out to keep the loop allocation-free.
StateVector linear_update(const OperatorMatrix& A, const OperatorMatrix& B, const StateVector& psi,
                          double dt, double dX) {
  const std::size_t n = psi.size();
  StateVector out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Complex a = 0.0, b = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      a += A(i, j) * psi[j];
      b += B(i, j) * psi[j];
    }
    out[i] = psi[i] + a * dt + b * dX;
  }
  return out;
}

}  // namespace

CQState step_true(const TheoryDefinition& theory, const CQState& state, double dW, double dt,
                  bool renormalize) {
  const CouplingSegment& seg = theory.at(state.z);
  const double f = force(theory.family(), seg.B, state.psi);
  const double dZ = f * dt + dW;
  CQState next{state.t + dt, state.z + dZ, linear_update(seg.A, seg.B, state.psi, dt, dZ)};
  require_finite(next);
  if (renormalize) next.psi = rescale_to_measure(theory.family(), next.psi);
  return next;
}

CQState step_linear(const TheoryDefinition& theory, const CQState& state, double dW, double dt) {
  const CouplingSegment& seg = theory.at(state.z);
  CQState next{state.t + dt, state.z + dW, linear_update(seg.A, seg.B, state.psi, dt, dW)};
  require_finite(next);
  return next;
}

Trajectory simulate_trajectory(const TheoryDefinition& theory, const CQState& initial,
                               const SimConfig& config, std::uint64_t index) {
  config.validate();
  if (initial.psi.size() != theory.dim()) throw DimensionError("initial state dimension does not match theory");
  const double g0 = eval_g(theory.family(), initial.psi);
  if (!(std::abs(g0 - 1.0) <= 1e-9)) {
    throw ValidationError("initial state must satisfy g(psi0) = 1 (got " + std::to_string(g0) + ")");
  }

  const bool linear = config.picture == Picture::Linear;
  const bool girsanov = linear && config.track_girsanov;
  const auto checkpoints = config.checkpoint_steps();
  const std::size_t n_steps = checkpoints.back();
  const double dt = config.dt;

  Trajectory tr;
  tr.picture = config.picture;
  tr.seed = config.seed;
  tr.index = index;
  tr.states.reserve(checkpoints.size());
  tr.log_weight.reserve(checkpoints.size());

  double gir = 0.0;
  auto record = [&](const CQState& s) {
    tr.states.push_back(s);
    tr.log_weight.push_back(linear ? std::log(eval_g(theory.family(), s.psi)) : 0.0);
    if (girsanov) tr.girsanov_log.push_back(gir);
  };

  CQState state = initial;
  state.t = 0.0;
  record(state);

  WienerStream noise(config.seed, index, dt);
  std::size_t next_cp = 1;
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const double dW = noise.next();
    try {
      if (linear) {
        if (girsanov) {
          const double mu = force(theory.family(), theory.at(state.z).B, state.psi);
          gir += mu * dW - 0.5 * mu * mu * dt;
        }
        state = step_linear(theory, state, dW, dt);
      } else {
        state = step_true(theory, state, dW, dt, config.renormalize);
      }
    } catch (const MeasureSupportError& e) {
      throw StepError(StepError::Cause::MeasureSupport, e.what(), state.t);
    } catch (const NumericalError& e) {
      throw StepError(StepError::Cause::NonFinite, e.what(), state.t);
    }
    state.t = static_cast<double>(k) * dt;
    if (k == checkpoints[next_cp]) {
      record(state);
      ++next_cp;
    }
  }
  return tr;
}

std::vector<Trajectory> simulate_ensemble(const TheoryDefinition& theory, const CQState& initial,
                                          const SimConfig& config) {
  config.validate();
  std::vector<Trajectory> out(config.n_traj);
  parallel_for(config.n_traj, config.parallel,
               [&](std::size_t i) { out[i] = simulate_trajectory(theory, initial, config, i); });
  return out;
}

// ---------------------------------------------------------------------------
// General noise

NoiseReducedTheory::Effective NoiseReducedTheory::effective(double z, double t) const {
  const double sigma = spec_.sigma(z, t);
  const double mu = spec_.mu(z, t);
  if (!std::isfinite(sigma) || !std::isfinite(mu)) throw ValidationError("noise mu/sigma not finite");
  if (sigma < 0.0) throw ValidationError("negative noise scale sigma encountered");
  const CouplingSegment& seg = theory_.at(z);
  if (sigma == 1.0) return Effective{seg.A, seg.B, mu, sigma};
  OperatorMatrix B = sigma * seg.B;
  OperatorMatrix A = solve_drift_operator(theory_.family(), seg.G, B);
  return Effective{std::move(A), std::move(B), mu, sigma};
}

NoiseReducedTheory reduce_general_noise(const GeneralNoiseSpec& spec, const TheoryDefinition& theory) {
  if (!spec.mu || !spec.sigma) throw ValidationError("general noise needs both mu and sigma");
  return NoiseReducedTheory(theory, spec);
}

CQState step_true_general(const NoiseReducedTheory& theory, const CQState& state, double dW,
                          double dt, bool renormalize) {
  const auto eff = theory.effective(state.z, state.t);
  const MeasureFamily& family = theory.base().family();
  const double f = force(family, eff.B, state.psi);
  const double dX = f * dt + dW;
  CQState next{state.t + dt, state.z + eff.mu * dt + eff.sigma * dX,
               linear_update(eff.A, eff.B, state.psi, dt, dX)};
  require_finite(next);
  if (renormalize) next.psi = rescale_to_measure(family, next.psi);
  return next;
}

// ---------------------------------------------------------------------------
// Weighted density field

WeightedDensityField::WeightedDensityField(std::vector<double> bin_edges, std::size_t dim)
    : edges_(std::move(bin_edges)), dim_(dim) {
  if (edges_.size() < 2) throw ValidationError("need at least one bin (two edges)");
  if (!std::is_sorted(edges_.begin(), edges_.end()) ||
      std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw ValidationError("bin edges must be strictly increasing");
  }
  require_dimension(dim);
  w_sum_.assign(n_bins(), 0.0);
  w_sq_.assign(n_bins(), 0.0);
  c_sum_.assign(n_bins() * dim * dim, 0.0);
  c_sq_.assign(n_bins() * dim * dim, 0.0);
}

std::optional<std::size_t> WeightedDensityField::bin_of(double z) const noexcept {
  if (!(z >= edges_.front()) || z > edges_.back()) return std::nullopt;
  auto it = std::upper_bound(edges_.begin(), edges_.end(), z);
  std::size_t bin = static_cast<std::size_t>(it - edges_.begin());
  bin = bin == 0 ? 0 : bin - 1;
  return std::min(bin, n_bins() - 1);
}

void WeightedDensityField::add(double z, double weight, const OperatorMatrix& rho) {
  if (rho.dim() != dim_) throw DimensionError("density matrix dimension mismatch");
  ++n_;
  total_sq_ += weight * weight;
  const auto bin = bin_of(z);
  if (!bin) {
    out_sum_ += weight;
    out_sq_ += weight * weight;
    return;
  }
  w_sum_[*bin] += weight;
  w_sq_[*bin] += weight * weight;
  double* sum = &c_sum_[*bin * dim_ * dim_];
  double* sq = &c_sq_[*bin * dim_ * dim_];
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = 0; j < dim_; ++j) {
      double v;
      if (i == j) v = rho(i, i).real();
      else if (i < j) v = rho(i, j).real();
      else v = rho(j, i).imag();
      v *= weight;
      sum[i * dim_ + j] += v;
      sq[i * dim_ + j] += v * v;
    }
  }
}

void WeightedDensityField::merge(const WeightedDensityField& other) {
  if (other.edges_ != edges_ || other.dim_ != dim_) throw ValidationError("cannot merge fields with different bins");
  n_ += other.n_;
  total_sq_ += other.total_sq_;
  out_sum_ += other.out_sum_;
  out_sq_ += other.out_sq_;
  for (std::size_t b = 0; b < n_bins(); ++b) {
    w_sum_[b] += other.w_sum_[b];
    w_sq_[b] += other.w_sq_[b];
  }
  for (std::size_t k = 0; k < c_sum_.size(); ++k) {
    c_sum_[k] += other.c_sum_[k];
    c_sq_[k] += other.c_sq_[k];
  }
}

double WeightedDensityField::stderr_of(double sum, double sumsq) const {
  if (n_ < 2) return 0.0;
  const double n = static_cast<double>(n_);
  const double mean = sum / n;
  const double var = std::max(0.0, sumsq / n - mean * mean) * n / (n - 1.0);
  return std::sqrt(var / n);
}

double WeightedDensityField::mass(std::size_t bin) const {
  return n_ ? w_sum_.at(bin) / static_cast<double>(n_) : 0.0;
}

double WeightedDensityField::mass_stderr(std::size_t bin) const { return stderr_of(w_sum_.at(bin), w_sq_.at(bin)); }

double WeightedDensityField::outside_mass() const {
  return n_ ? out_sum_ / static_cast<double>(n_) : 0.0;
}

double WeightedDensityField::total_mass() const {
  double s = out_sum_;
  for (double w : w_sum_) s += w;
  return n_ ? s / static_cast<double>(n_) : 0.0;
}

double WeightedDensityField::total_mass_stderr() const {
  return stderr_of(total_mass() * static_cast<double>(n_), total_sq_);
}

double WeightedDensityField::component(std::size_t bin, std::size_t k) const {
  if (k >= dim_ * dim_) throw DimensionError("component index out of range");
  return n_ ? c_sum_.at(bin * dim_ * dim_ + k) / static_cast<double>(n_) : 0.0;
}

double WeightedDensityField::component_stderr(std::size_t bin, std::size_t k) const {
  if (k >= dim_ * dim_) throw DimensionError("component index out of range");
  return stderr_of(c_sum_.at(bin * dim_ * dim_ + k), c_sq_.at(bin * dim_ * dim_ + k));
}

OperatorMatrix WeightedDensityField::matrix(std::size_t bin) const {
  OperatorMatrix m(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    m(i, i) = component(bin, i * dim_ + i);
    for (std::size_t j = i + 1; j < dim_; ++j) {
      const Complex v(component(bin, i * dim_ + j), component(bin, j * dim_ + i));
      m(i, j) = v;
      m(j, i) = std::conj(v);
    }
  }
  return m;
}

std::vector<double> WeightedDensityField::marginal() const {
  std::vector<double> out(n_bins() + 1);
  for (std::size_t b = 0; b < n_bins(); ++b) out[b] = mass(b);
  out.back() = outside_mass();
  return out;
}

WeightedDensityField weighted_density(std::span<const Trajectory> trajectories,
                                      std::span<const double> bin_edges, std::size_t checkpoint) {
  if (trajectories.empty()) throw InconclusiveRun("weighted_density: empty ensemble");
  const Picture picture = trajectories.front().picture;
  const std::size_t dim = trajectories.front().states.front().psi.size();
  WeightedDensityField field(std::vector<double>(bin_edges.begin(), bin_edges.end()), dim);
  for (const auto& tr : trajectories) {
    if (tr.picture != picture) throw ValidationError("weighted_density: mixed pictures in one ensemble");
    if (checkpoint >= tr.states.size()) throw ValidationError("weighted_density: checkpoint out of range");
    const CQState& s = tr.states[checkpoint];
    const double norm2 = s.psi.norm_squared();
    OperatorMatrix rho = OperatorMatrix::outer(s.psi, s.psi);
    rho *= 1.0 / norm2;
    const double w = picture == Picture::True ? 1.0 : std::exp(tr.log_weight[checkpoint]);
    field.add(s.z, w, rho);
  }
  return field;
}

std::vector<double> uniform_edges(double lo, double hi, std::size_t n_bins) {
  if (!(hi > lo) || n_bins < 1) throw ValidationError("uniform_edges: need hi > lo and n_bins >= 1");
  std::vector<double> e(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_bins);
  return e;
}

std::vector<double> default_bin_edges(double z0, double t_final, std::size_t n_bins) {
  const double half = 4.0 * std::sqrt(t_final);
  return uniform_edges(z0 - half, z0 + half, n_bins);
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("total_variation: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

double effective_sample_size(std::span<const double> weights) {
  double s = 0.0, s2 = 0.0;
  for (double w : weights) {
    s += w;
    s2 += w * w;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

}  // namespace cqsim
