#include "cqsim/experiments.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <string>

#include "cqsim/errors.hpp"
#include "cqsim/measure.hpp"
#include "cqsim/parallel.hpp"

namespace cqsim {

namespace {

constexpr double kZThreshold = 5.0;

double smallest_gap(const std::vector<double>& values) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < values.size(); ++i) gap = std::min(gap, values[i] - values[i - 1]);
  return gap;
}

std::vector<double> populations(const std::vector<StateVector>& basis, const StateVector& psi) {
  const double norm2 = psi.norm_squared();
  std::vector<double> p(basis.size());
  for (std::size_t i = 0; i < basis.size(); ++i) p[i] = std::norm(inner(basis[i], psi)) / norm2;
  return p;
}

double max_population(const std::vector<StateVector>& basis, const StateVector& psi) {
  const double norm2 = psi.norm_squared();
  double best = 0.0;
  for (const auto& e : basis) best = std::max(best, std::norm(inner(e, psi)) / norm2);
  return best;
}

}  // namespace

double chi_square_p_value(double statistic, std::size_t dof) {
  if (dof == 0) return statistic > 0.0 ? 0.0 : 1.0;
  if (!std::isfinite(statistic)) return 0.0;
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

double default_collapse_horizon(const OperatorMatrix& B) {
  const auto es = hermitian_eigensystem(B + B.adjoint());
  const double gap = smallest_gap(es.values);
  if (!(gap > 0.0) || !std::isfinite(gap)) {
    throw ValidationError("B + B^dag needs at least two distinct eigenvalues for a collapse horizon");
  }
  return 80.0 / (gap * gap);
}

BornReport born_rule_test(const TheoryDefinition& theory, const StateVector& psi0, const BornConfig& config) {
  const TheoryLabel label = theory.label();
  if (label != TheoryLabel::StandardQM && label != TheoryLabel::RealAmplitudeQM) {
    throw ValidationError("born_rule_test needs a standard-QM or real-amplitude-QM theory");
  }
  if (theory.z_dependent()) throw ValidationError("born_rule_test needs Z-independent operators");
  if (!(config.epsilon > 0.0 && config.epsilon < 0.5)) throw ValidationError("epsilon must be in (0, 0.5)");
  if (config.n_traj < 1) throw ValidationError("n_traj must be >= 1");
  if (!(config.dt > 0.0)) throw ValidationError("dt must be > 0");

  const CouplingSegment& seg = theory.base();
  if (label == TheoryLabel::RealAmplitudeQM) {
    double im = 0.0;
    for (const auto& v : psi0) im = std::max(im, std::abs(v.imag()));
    if (im > 1e-12) throw ValidationError("real-amplitude Born test needs a real initial state");
  }
  const OperatorMatrix K = seg.B + seg.B.adjoint();
  if (max_abs_diff(seg.G * K, K * seg.G) > 1e-12) {
    throw ValidationError("born_rule_test needs G = 0 or [G, B + B^dag] = 0");
  }
  auto es = hermitian_eigensystem(K);
  const double gap = smallest_gap(es.values);
  if (!(gap > 1e-9)) throw ValidationError("B + B^dag has a degenerate spectrum");

  BornReport rep;
  rep.eigenvalues = es.values;
  rep.outcomes = es.vectors;
  rep.predicted = populations(es.vectors, psi0);
  rep.epsilon = config.epsilon;
  rep.t_final = config.t_final > 0.0 ? config.t_final : default_collapse_horizon(seg.B);
  rep.n_traj = config.n_traj;

  const CQState initial = make_initial_state(theory, psi0);
  const std::size_t n_steps = static_cast<std::size_t>(std::ceil(rep.t_final / config.dt - 1e-9));
  const std::size_t none = std::numeric_limits<std::size_t>::max();

  struct Outcome {
    std::size_t index;
    double time;
  };
  std::vector<Outcome> results(config.n_traj);
  const double threshold = 1.0 - config.epsilon;

  parallel_for(config.n_traj, config.parallel, [&](std::size_t traj) {
    WienerStream noise(config.seed, traj, config.dt);
    CQState s = initial;
    Outcome out{none, rep.t_final};
    auto check = [&](const CQState& st) {
      const double norm2 = st.psi.norm_squared();
      for (std::size_t i = 0; i < rep.outcomes.size(); ++i) {
        if (std::norm(inner(rep.outcomes[i], st.psi)) / norm2 > threshold) {
          out = Outcome{i, st.t};
          return true;
        }
      }
      return false;
    };
    if (check(s)) {
      results[traj] = out;
      return;
    }
    for (std::size_t k = 1; k <= n_steps; ++k) {
      try {
        s = step_true(theory, s, noise.next(), config.dt, true);
      } catch (const MeasureSupportError& e) {
        throw StepError(StepError::Cause::MeasureSupport, e.what(), s.t);
      } catch (const NumericalError& e) {
        throw StepError(StepError::Cause::NonFinite, e.what(), s.t);
      }
      s.t = static_cast<double>(k) * config.dt;
      if (check(s)) break;
    }
    results[traj] = out;
  });

  const std::size_t n_out = rep.outcomes.size();
  rep.counts.assign(n_out, 0);
  double time_sum = 0.0;
  for (const auto& r : results) {
    if (r.index == none) continue;
    ++rep.counts[r.index];
    ++rep.n_collapsed;
    time_sum += r.time;
  }
  rep.collapsed_fraction = static_cast<double>(rep.n_collapsed) / static_cast<double>(rep.n_traj);
  rep.mean_collapse_time = rep.n_collapsed ? time_sum / static_cast<double>(rep.n_collapsed) : 0.0;
  rep.frequencies.resize(n_out);
  rep.collapsed_frequencies.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    rep.frequencies[i] = static_cast<double>(rep.counts[i]) / static_cast<double>(rep.n_traj);
    rep.collapsed_frequencies[i] =
        rep.n_collapsed ? static_cast<double>(rep.counts[i]) / static_cast<double>(rep.n_collapsed) : 0.0;
  }

  // Pearson chi-square over the collapsed trajectories. Outcomes with zero
  // predicted probability contribute infinity if they were ever observed.
  std::size_t used = 0;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double expected = rep.predicted[i] * static_cast<double>(rep.n_collapsed);
    if (expected > 1e-12) {
      const double d = static_cast<double>(rep.counts[i]) - expected;
      rep.chi_square += d * d / expected;
      ++used;
    } else if (rep.counts[i] > 0) {
      rep.chi_square = std::numeric_limits<double>::infinity();
    }
  }
  rep.dof = used > 0 ? used - 1 : 0;
  rep.p_value = chi_square_p_value(rep.chi_square, rep.dof);

  if (rep.collapsed_fraction < config.min_collapsed_fraction) {
    throw InconclusiveRun("only " + std::to_string(rep.n_collapsed) + " of " + std::to_string(rep.n_traj) +
                          " trajectories collapsed by T_final = " + std::to_string(rep.t_final));
  }
  return rep;
}

MartingaleReport martingale_sweep(const TheoryDefinition& theory, const CQState& initial,
                                  const SimConfig& config) {
  if (config.picture != Picture::Linear) throw ValidationError("martingale_sweep runs in the linear picture");
  const auto ens = simulate_ensemble(theory, initial, config);
  const auto steps = config.checkpoint_steps();

  MartingaleReport rep;
  rep.pass = true;
  std::vector<double> w(ens.size());
  for (std::size_t c = 1; c < steps.size(); ++c) {
    for (std::size_t i = 0; i < ens.size(); ++i) w[i] = std::exp(ens[i].log_weight[c]);
    double sum = 0.0, sq = 0.0;
    for (double v : w) {
      sum += v;
      sq += v * v;
    }
    const double n = static_cast<double>(w.size());
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, sq / n - mean * mean) * n / (n - 1.0) : 0.0;
    CheckpointStat st{static_cast<double>(steps[c]) * config.dt, mean, std::sqrt(var / n),
                      effective_sample_size(w)};
    const double dev = std::abs(mean - 1.0);
    if (dev > kZThreshold * st.std_error) rep.pass = false;
    if (st.std_error > 0.0) rep.max_abs_z = std::max(rep.max_abs_z, dev / st.std_error);
    else if (dev > 0.0) rep.max_abs_z = std::numeric_limits<double>::infinity();
    if (st.n_eff < 0.01 * n) {
      rep.warnings.push_back("effective sample size " + std::to_string(st.n_eff) + " below 1% of n_traj at t = " +
                             std::to_string(st.t));
    }
    rep.checkpoints.push_back(st);
  }
  return rep;
}

EquivalenceReport picture_equivalence_test(const TheoryDefinition& theory, const CQState& initial,
                                           const SimConfig& config, const std::vector<double>& edges) {
  EquivalenceReport rep;
  rep.edges = edges;

  SimConfig cfg_true = config;
  cfg_true.picture = Picture::True;
  cfg_true.renormalize = true;
  SimConfig cfg_lin = config;
  cfg_lin.picture = Picture::Linear;
  cfg_lin.seed = derive_seed(config.seed, 1);
  rep.true_seed = cfg_true.seed;
  rep.linear_seed = cfg_lin.seed;

  const std::size_t cp = config.n_checkpoints;
  const WeightedDensityField f_true = [&] {
    const auto ens = simulate_ensemble(theory, initial, cfg_true);
    return weighted_density(ens, edges, cp);
  }();
  const WeightedDensityField f_lin = [&] {
    const auto ens = simulate_ensemble(theory, initial, cfg_lin);
    std::vector<double> w(ens.size());
    for (std::size_t i = 0; i < ens.size(); ++i) w[i] = std::exp(ens[i].log_weight[cp]);
    rep.n_eff = effective_sample_size(w);
    return weighted_density(ens, edges, cp);
  }();

  rep.true_marginal = f_true.marginal();
  rep.linear_marginal = f_lin.marginal();
  rep.tv_distance = total_variation(rep.true_marginal, rep.linear_marginal);
  rep.linear_total_mass = f_lin.total_mass();
  rep.linear_total_mass_stderr = f_lin.total_mass_stderr();
  if (rep.n_eff < 0.01 * static_cast<double>(config.n_traj)) {
    rep.warnings.push_back("linear-picture effective sample size " + std::to_string(rep.n_eff) +
                           " below 1% of n_traj");
  }

  const std::size_t n_comp = f_true.dim() * f_true.dim();
  for (std::size_t b = 0; b < f_true.n_bins(); ++b) {
    BinComparison cmp;
    cmp.bin = b;
    cmp.occupied = f_true.mass(b) > 0.0 || f_lin.mass(b) > 0.0;
    cmp.agree = true;
    auto compare = [&](double a, double sa, double c, double sc) {
      const double diff = std::abs(a - c);
      const double se = std::sqrt(sa * sa + sc * sc);
      if (diff > kZThreshold * se + 1e-12) cmp.agree = false;
      if (se > 0.0) cmp.max_z = std::max(cmp.max_z, diff / se);
    };
    compare(f_true.mass(b), f_true.mass_stderr(b), f_lin.mass(b), f_lin.mass_stderr(b));
    for (std::size_t k = 0; k < n_comp; ++k) {
      compare(f_true.component(b, k), f_true.component_stderr(b, k), f_lin.component(b, k),
              f_lin.component_stderr(b, k));
    }
    if (cmp.occupied) {
      ++rep.occupied_bins;
      if (cmp.agree) ++rep.agreeing_bins;
    }
    rep.bins.push_back(cmp);
  }
  rep.agreeing_fraction =
      rep.occupied_bins ? static_cast<double>(rep.agreeing_bins) / static_cast<double>(rep.occupied_bins) : 1.0;
  return rep;
}

std::vector<CheckpointStat> collapse_profile(const TheoryDefinition& theory, const CQState& initial,
                                             const SimConfig& config) {
  if (config.picture != Picture::True) throw ValidationError("collapse_profile runs in the true picture");
  const CouplingSegment& seg = theory.base();
  const auto es = hermitian_eigensystem(seg.B + seg.B.adjoint());
  const auto ens = simulate_ensemble(theory, initial, config);
  const auto steps = config.checkpoint_steps();

  std::vector<CheckpointStat> out;
  for (std::size_t c = 0; c < steps.size(); ++c) {
    double sum = 0.0, sq = 0.0;
    for (const auto& tr : ens) {
      const double m = max_population(es.vectors, tr.states[c].psi);
      sum += m;
      sq += m * m;
    }
    const double n = static_cast<double>(ens.size());
    const double mean = sum / n;
    const double var = n > 1 ? std::max(0.0, sq / n - mean * mean) * n / (n - 1.0) : 0.0;
    out.push_back({static_cast<double>(steps[c]) * config.dt, mean, std::sqrt(var / n), n});
  }
  return out;
}

}  // namespace cqsim
