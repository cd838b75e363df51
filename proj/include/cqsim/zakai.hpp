/**
 * @file zakai.hpp
 * @brief Classical filtering analogue: hidden diffusion Y observed through Z,
 *        the Zakai equation for the unnormalised conditional density, and
 *        the comparison of its non-interacting picture with direct simulation.
 *
 *   dY = h(Y) dt + dV,   dZ = f(Y) dt + dW
 *   dP = [-d/dy (h P) + 1/2 d^2/dy^2 P] dt + f(y) P dZ
 */
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace cqsim {

struct ZakaiGrid {
  double y_min = -6.0;
  double y_max = 6.0;
  std::size_t n_points = 241;

  double dy() const noexcept { return (y_max - y_min) / static_cast<double>(n_points - 1); }
  double y(std::size_t i) const noexcept { return y_min + static_cast<double>(i) * dy(); }
  void validate() const;
};

class ZakaiModel {
 public:
  using Fn = std::function<double(double)>;

  /// P_0 is the normal density N(y0_mean, y0_var) restricted to the grid.
  ZakaiModel(Fn h, Fn f, ZakaiGrid grid = {}, double y0_mean = 0.0, double y0_var = 0.5);

  /// h(y) = -a y, f(y) = gain * y.
  static ZakaiModel linear_gaussian(double a = 1.0, double gain = 1.0, ZakaiGrid grid = {},
                                    double y0_mean = 0.0, double y0_var = 0.5);

  double h(double y) const { return h_(y); }
  double f(double y) const { return f_(y); }
  const ZakaiGrid& grid() const noexcept { return grid_; }
  double y0_mean() const noexcept { return y0_mean_; }
  double y0_var() const noexcept { return y0_var_; }
  /// f at the grid nodes.
  const std::vector<double>& f_nodes() const noexcept { return f_nodes_; }
  /// h at the n_points - 1 interior cell faces.
  const std::vector<double>& h_faces() const noexcept { return h_faces_; }

  /// Initial density on the grid, normalised to unit mass.
  std::vector<double> initial_density() const;
  /// ValidationError unless 0 < dt <= dy^2 / 2.
  void check_step(double dt) const;

 private:
  Fn h_, f_;
  ZakaiGrid grid_;
  double y0_mean_, y0_var_;
  std::vector<double> f_nodes_, h_faces_;
};

struct HiddenPath {
  double dt = 0.0;
  std::vector<double> y;  ///< n_steps + 1 values
  std::vector<double> z;
  std::vector<double> dz;  ///< n_steps observation increments
};

/// Noise channels of one trajectory: W on channel 0, V on 1, Y_0 on 2.
HiddenPath zakai_simulate_hidden(const ZakaiModel& model, double t_final, double dt, std::uint64_t seed,
                                 std::uint64_t index = 0, double z0 = 0.0);

/// One explicit finite-volume step in place. Fluxes at cell faces use
/// central averages, the outer faces carry zero flux. Throws ValidationError
/// on an unstable dt and NumericalError on non-finite values or when the
/// three outermost cells on either side hold more than 1% of the mass.
void zakai_step(const ZakaiModel& model, std::vector<double>& p, double dz, double dt,
                std::vector<double>& scratch);
std::vector<double> zakai_step(const ZakaiModel& model, const std::vector<double>& p, double dz, double dt);

double density_mass(const ZakaiGrid& grid, std::span<const double> p);
double density_mean(const ZakaiGrid& grid, std::span<const double> p);
double density_variance(const ZakaiGrid& grid, std::span<const double> p);

struct FilterTrace {
  std::vector<double> t;
  std::vector<double> mass;  ///< before normalisation
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> final_density;
};

/// Runs the Zakai equation along the observation increments dz. With
/// normalize the density is rescaled to unit mass after every step, giving
/// the conditional density of Y given the observations.
FilterTrace zakai_filter(const ZakaiModel& model, std::span<const double> dz, double dt, bool normalize);

struct KalmanBucyTrace {
  std::vector<double> t, mean, variance;
};

/// Kalman-Bucy filter for h(y) = -a y, f(y) = gain * y on the same increments.
KalmanBucyTrace kalman_bucy(double a, double gain, double m0, double v0, std::span<const double> dz, double dt);

struct ZakaiJointConfig {
  double t_final = 1.0;
  double dt = 1e-3;
  std::size_t n_traj = 100000;
  std::uint64_t seed = 0;
  unsigned parallel = 0;
  /// Bin edges; values beyond the outer edges count toward the edge bins.
  std::vector<double> y_edges;
  std::vector<double> z_edges;
};

struct ZakaiJointReport {
  std::vector<double> y_edges, z_edges;
  /// Normalised joint histograms, row-major with y as the slow index.
  std::vector<double> direct, linear;
  double tv_distance = 0.0;
  double g_mean = 0.0;
  double g_stderr = 0.0;
  std::vector<double> z_marginal_direct, z_marginal_linear;
  std::vector<double> z_marginal_z;  ///< |difference| / combined stderr per z bin
  double z_marginal_max_z = 0.0;
  double n_eff = 0.0;
  std::uint64_t direct_seed = 0, linear_seed = 0;
  std::vector<std::string> warnings;
};

/// Binned E[delta(y - Y) delta(z - Z)] from direct simulation against
/// E[P~(y) delta(z - Z~)] from the non-interacting picture, both at t_final.
ZakaiJointReport zakai_joint_check(const ZakaiModel& model, const ZakaiJointConfig& config);

}  // namespace cqsim
