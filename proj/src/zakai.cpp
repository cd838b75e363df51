#include "cqsim/zakai.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cqsim/errors.hpp"
#include "cqsim/noise.hpp"
#include "cqsim/parallel.hpp"

namespace cqsim {

namespace {

constexpr std::uint64_t kChannelW = 0;
constexpr std::uint64_t kChannelV = 1;
constexpr std::uint64_t kChannelY0 = 2;
constexpr std::size_t kEdgeCells = 3;
constexpr double kLeakLimit = 0.01;

void check_edges(const std::vector<double>& edges, const char* what) {
  if (edges.size() < 2) throw ValidationError(std::string(what) + " needs at least two edges");
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i] > edges[i - 1])) throw ValidationError(std::string(what) + " must be strictly increasing");
  }
}

std::size_t clamped_bin(const std::vector<double>& edges, double v) {
  const std::size_t nb = edges.size() - 1;
  if (!(v >= edges.front())) return 0;
  if (v >= edges.back()) return nb - 1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1, nb - 1);
}

struct CellShare {
  std::size_t bin;
  double fraction;
};

// Fraction of each grid cell [y_i - dy/2, y_i + dy/2] falling in each y bin,
// with the parts beyond the outer edges assigned to the edge bins.
std::vector<std::vector<CellShare>> cell_shares(const ZakaiGrid& grid, const std::vector<double>& edges) {
  const double dy = grid.dy();
  const std::size_t nb = edges.size() - 1;
  std::vector<std::vector<CellShare>> out(grid.n_points);
  for (std::size_t i = 0; i < grid.n_points; ++i) {
    const double lo = grid.y(i) - 0.5 * dy;
    const double hi = grid.y(i) + 0.5 * dy;
    std::vector<double> share(nb, 0.0);
    if (lo < edges.front()) share[0] += (std::min(hi, edges.front()) - lo) / dy;
    if (hi > edges.back()) share[nb - 1] += (hi - std::max(lo, edges.back())) / dy;
    for (std::size_t b = 0; b < nb; ++b) {
      const double overlap = std::min(hi, edges[b + 1]) - std::max(lo, edges[b]);
      if (overlap > 0.0) share[b] += overlap / dy;
    }
    for (std::size_t b = 0; b < nb; ++b) {
      if (share[b] > 0.0) out[i].push_back({b, share[b]});
    }
  }
  return out;
}

}  // namespace

void ZakaiGrid::validate() const {
  if (n_points < 3) throw ValidationError("Zakai grid needs at least 3 points");
  if (!(y_max > y_min) || !std::isfinite(y_min) || !std::isfinite(y_max)) {
    throw ValidationError("Zakai grid needs finite y_min < y_max");
  }
}

ZakaiModel::ZakaiModel(Fn h, Fn f, ZakaiGrid grid, double y0_mean, double y0_var)
    : h_(std::move(h)), f_(std::move(f)), grid_(grid), y0_mean_(y0_mean), y0_var_(y0_var) {
  grid_.validate();
  if (!h_ || !f_) throw ValidationError("Zakai model needs both h and f");
  if (!(y0_var_ > 0.0) || !std::isfinite(y0_mean_)) throw ValidationError("initial variance must be > 0");
  const double dy = grid_.dy();
  f_nodes_.resize(grid_.n_points);
  for (std::size_t i = 0; i < grid_.n_points; ++i) f_nodes_[i] = f_(grid_.y(i));
  h_faces_.resize(grid_.n_points - 1);
  for (std::size_t j = 0; j + 1 < grid_.n_points; ++j) h_faces_[j] = h_(grid_.y(j) + 0.5 * dy);
  for (double v : f_nodes_) {
    if (!std::isfinite(v)) throw ValidationError("f is not finite on the grid");
  }
  for (double v : h_faces_) {
    if (!std::isfinite(v)) throw ValidationError("h is not finite on the grid");
  }
}

ZakaiModel ZakaiModel::linear_gaussian(double a, double gain, ZakaiGrid grid, double y0_mean, double y0_var) {
  return ZakaiModel([a](double y) { return -a * y; }, [gain](double y) { return gain * y; }, grid, y0_mean,
                    y0_var);
}

std::vector<double> ZakaiModel::initial_density() const {
  std::vector<double> p(grid_.n_points);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double u = grid_.y(i) - y0_mean_;
    p[i] = std::exp(-0.5 * u * u / y0_var_);
  }
  const double m = density_mass(grid_, p);
  for (double& v : p) v /= m;
  return p;
}

void ZakaiModel::check_step(double dt) const {
  const double dy = grid_.dy();
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  if (dt > 0.5 * dy * dy) {
    throw ValidationError("dt = " + std::to_string(dt) + " exceeds the stability limit dy^2/2 = " +
                          std::to_string(0.5 * dy * dy));
  }
}

HiddenPath zakai_simulate_hidden(const ZakaiModel& model, double t_final, double dt, std::uint64_t seed,
                                 std::uint64_t index, double z0) {
  if (!(dt > 0.0) || !(t_final > 0.0)) throw ValidationError("t_final and dt must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(t_final / dt));
  if (n < 1) throw ValidationError("t_final / dt rounds to zero steps");
  WienerStream w(seed, index, dt, kChannelW);
  WienerStream v(seed, index, dt, kChannelV);
  CounterRng y0(stream_key(seed, index, kChannelY0));

  HiddenPath path;
  path.dt = dt;
  path.y.resize(n + 1);
  path.z.resize(n + 1);
  path.dz.resize(n);
  path.y[0] = model.y0_mean() + std::sqrt(model.y0_var()) * y0.normal();
  path.z[0] = z0;
  for (std::size_t k = 0; k < n; ++k) {
    const double y = path.y[k];
    const double dz = model.f(y) * dt + w.next();
    path.dz[k] = dz;
    path.z[k + 1] = path.z[k] + dz;
    path.y[k + 1] = y + model.h(y) * dt + v.next();
    if (!std::isfinite(path.y[k + 1]) || !std::isfinite(path.z[k + 1])) {
      throw NumericalError("hidden path is not finite at step " + std::to_string(k + 1));
    }
  }
  return path;
}

void zakai_step(const ZakaiModel& model, std::vector<double>& p, double dz, double dt,
                std::vector<double>& scratch) {
  const ZakaiGrid& g = model.grid();
  const std::size_t n = g.n_points;
  if (p.size() != n) throw ValidationError("density does not match the grid");
  model.check_step(dt);
  const double dy = g.dy();
  const auto& hf = model.h_faces();
  const auto& fn = model.f_nodes();

  // scratch[j] = flux through the face between nodes j and j+1
  scratch.resize(n - 1);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    scratch[j] = hf[j] * 0.5 * (p[j] + p[j + 1]) - 0.5 * (p[j + 1] - p[j]) / dy;
  }
  const double r = dt / dy;
  p[0] += -r * scratch[0] + fn[0] * p[0] * dz;
  for (std::size_t i = 1; i + 1 < n; ++i) p[i] += -r * (scratch[i] - scratch[i - 1]) + fn[i] * p[i] * dz;
  p[n - 1] += r * scratch[n - 2] + fn[n - 1] * p[n - 1] * dz;

  double total = 0.0, edge = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += p[i];
  for (std::size_t i = 0; i < kEdgeCells; ++i) edge += std::abs(p[i]) + std::abs(p[n - 1 - i]);
  // a non-finite cell makes the total non-finite
  if (!std::isfinite(total)) throw NumericalError("Zakai density is not finite");
  if (edge > kLeakLimit * std::abs(total)) {
    throw NumericalError("more than 1% of the density sits in the outer grid cells; widen the grid");
  }
}

std::vector<double> zakai_step(const ZakaiModel& model, const std::vector<double>& p, double dz, double dt) {
  std::vector<double> out = p, scratch;
  zakai_step(model, out, dz, dt, scratch);
  return out;
}

double density_mass(const ZakaiGrid& grid, std::span<const double> p) {
  double s = 0.0;
  for (double v : p) s += v;
  return s * grid.dy();
}

double density_mean(const ZakaiGrid& grid, std::span<const double> p) {
  double s = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    s += p[i];
    sy += p[i] * grid.y(i);
  }
  return sy / s;
}

double density_variance(const ZakaiGrid& grid, std::span<const double> p) {
  const double m = density_mean(grid, p);
  double s = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double u = grid.y(i) - m;
    s += p[i];
    sv += p[i] * u * u;
  }
  return sv / s;
}

FilterTrace zakai_filter(const ZakaiModel& model, std::span<const double> dz, double dt, bool normalize) {
  model.check_step(dt);
  const ZakaiGrid& g = model.grid();
  FilterTrace tr;
  std::vector<double> p = model.initial_density(), scratch;
  auto record = [&](std::size_t k, double mass) {
    tr.t.push_back(static_cast<double>(k) * dt);
    tr.mass.push_back(mass);
    tr.mean.push_back(density_mean(g, p));
    tr.variance.push_back(density_variance(g, p));
  };
  record(0, density_mass(g, p));
  for (std::size_t k = 0; k < dz.size(); ++k) {
    zakai_step(model, p, dz[k], dt, scratch);
    const double mass = density_mass(g, p);
    if (normalize) {
      if (!(mass > 0.0)) throw NumericalError("Zakai density lost all mass");
      for (double& v : p) v /= mass;
    }
    record(k + 1, mass);
  }
  tr.final_density = std::move(p);
  return tr;
}

KalmanBucyTrace kalman_bucy(double a, double gain, double m0, double v0, std::span<const double> dz, double dt) {
  KalmanBucyTrace tr;
  double m = m0, v = v0;
  tr.t.push_back(0.0);
  tr.mean.push_back(m);
  tr.variance.push_back(v);
  for (std::size_t k = 0; k < dz.size(); ++k) {
    const double dm = -a * m * dt + v * gain * (dz[k] - gain * m * dt);
    const double dv = (-2.0 * a * v + 1.0 - gain * gain * v * v) * dt;
    m += dm;
    v += dv;
    tr.t.push_back(static_cast<double>(k + 1) * dt);
    tr.mean.push_back(m);
    tr.variance.push_back(v);
  }
  return tr;
}

ZakaiJointReport zakai_joint_check(const ZakaiModel& model, const ZakaiJointConfig& config) {
  check_edges(config.y_edges, "y_edges");
  check_edges(config.z_edges, "z_edges");
  if (config.n_traj < 2) throw ValidationError("n_traj must be >= 2");
  if (!(config.t_final > 0.0)) throw ValidationError("t_final must be > 0");
  model.check_step(config.dt);
  const auto n_steps = static_cast<std::size_t>(std::llround(config.t_final / config.dt));
  if (n_steps < 1) throw ValidationError("t_final / dt rounds to zero steps");

  const std::size_t ny = config.y_edges.size() - 1;
  const std::size_t nz = config.z_edges.size() - 1;
  const auto shares = cell_shares(model.grid(), config.y_edges);
  const double dy = model.grid().dy();

  ZakaiJointReport rep;
  rep.y_edges = config.y_edges;
  rep.z_edges = config.z_edges;
  rep.direct_seed = config.seed;
  rep.linear_seed = derive_seed(config.seed, 1);

  // Direct simulation of (Y, Z).
  std::vector<std::size_t> direct_cell(config.n_traj);
  parallel_for(config.n_traj, config.parallel, [&](std::size_t i) {
    const auto path = zakai_simulate_hidden(model, config.t_final, config.dt, rep.direct_seed, i);
    direct_cell[i] = clamped_bin(config.y_edges, path.y.back()) * nz + clamped_bin(config.z_edges, path.z.back());
  });

  // Non-interacting picture: Z~ = W, P~ driven by dW.
  struct LinearSample {
    std::size_t z_bin;
    double g;
    std::vector<double> y_mass;
  };
  std::vector<LinearSample> lin(config.n_traj);
  const std::vector<double> p0 = model.initial_density();
  parallel_for(config.n_traj, config.parallel, [&](std::size_t i) {
    WienerStream w(rep.linear_seed, i, config.dt, kChannelW);
    std::vector<double> p = p0, scratch;
    double z = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double dw = w.next();
      zakai_step(model, p, dw, config.dt, scratch);
      z += dw;
    }
    LinearSample s{clamped_bin(config.z_edges, z), 0.0, std::vector<double>(ny, 0.0)};
    for (std::size_t c = 0; c < p.size(); ++c) {
      for (const auto& sh : shares[c]) s.y_mass[sh.bin] += sh.fraction * p[c] * dy;
    }
    for (double m : s.y_mass) s.g += m;
    lin[i] = std::move(s);
  });

  const double n = static_cast<double>(config.n_traj);
  rep.direct.assign(ny * nz, 0.0);
  for (std::size_t c : direct_cell) rep.direct[c] += 1.0 / n;

  rep.linear.assign(ny * nz, 0.0);
  double g_sum = 0.0, g_sq = 0.0;
  std::vector<double> zl_sum(nz, 0.0), zl_sq(nz, 0.0);
  for (const auto& s : lin) {
    for (std::size_t b = 0; b < ny; ++b) rep.linear[b * nz + s.z_bin] += s.y_mass[b];
    g_sum += s.g;
    g_sq += s.g * s.g;
    zl_sum[s.z_bin] += s.g;
    zl_sq[s.z_bin] += s.g * s.g;
  }
  for (double& v : rep.linear) v /= g_sum;

  rep.g_mean = g_sum / n;
  rep.g_stderr = std::sqrt(std::max(0.0, g_sq / n - rep.g_mean * rep.g_mean) / (n - 1.0));
  rep.n_eff = g_sq > 0.0 ? g_sum * g_sum / g_sq : 0.0;
  if (rep.n_eff < 0.01 * n) {
    rep.warnings.push_back("non-interacting effective sample size " + std::to_string(rep.n_eff) +
                           " below 1% of n_traj");
  }

  double tv = 0.0;
  for (std::size_t k = 0; k < rep.direct.size(); ++k) tv += std::abs(rep.direct[k] - rep.linear[k]);
  rep.tv_distance = 0.5 * tv;

  rep.z_marginal_direct.assign(nz, 0.0);
  for (std::size_t c : direct_cell) rep.z_marginal_direct[c % nz] += 1.0 / n;
  for (std::size_t b = 0; b < nz; ++b) {
    const double pd = rep.z_marginal_direct[b];
    const double pl = zl_sum[b] / n;
    const double var_l = std::max(0.0, zl_sq[b] / n - pl * pl) / (n - 1.0);
    const double var_d = pd * (1.0 - pd) / n;
    rep.z_marginal_linear.push_back(pl);
    const double se = std::sqrt(var_l + var_d);
    const double z = se > 0.0 ? std::abs(pd - pl) / se : 0.0;
    rep.z_marginal_z.push_back(z);
    rep.z_marginal_max_z = std::max(rep.z_marginal_max_z, z);
  }
  return rep;
}

}  // namespace cqsim
