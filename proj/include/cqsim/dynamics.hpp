/**
 * @file dynamics.hpp
 * @brief Euler-Maruyama integration of the coupled classical-quantum SDEs in
 *        the true (interacting) and linear (non-interacting) pictures, and
 *        binned ensemble estimates of the classical-quantum state.
 *
 * True picture, one step of size dt with Wiener increment dW:
 *
 *   dZ   = f(psi) dt + dW
 *   psi' = psi + A(Z) psi dt + B(Z) psi dZ      (then rescaled so g(psi') = 1)
 *
 * The quantum state is driven by the increment of the classical coordinate,
 * which is what the linear-picture noise becomes after the change of measure.
 * Linear picture:
 *
 *   dZ~  = dW
 *   psi~' = psi~ + A(Z~) psi~ dt + B(Z~) psi~ dW  (never rescaled)
 */
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cqsim/linalg.hpp"
#include "cqsim/noise.hpp"
#include "cqsim/theory.hpp"

namespace cqsim {

enum class Picture { True, Linear };

std::string_view to_string(Picture p) noexcept;
/// "true" or "linear"; ValidationError otherwise.
Picture picture_from_string(std::string_view s);

struct CQState {
  double t = 0.0;
  double z = 0.0;
  StateVector psi;
};

struct SimConfig {
  double dt = 1e-3;
  double t_final = 1.0;
  std::size_t n_checkpoints = 10;
  Picture picture = Picture::True;
  bool renormalize = true;
  std::size_t n_traj = 1000;
  std::uint64_t seed = 0;
  /// Worker threads, 0 = all cores. Never changes results.
  unsigned parallel = 0;
  /// Linear picture only: also accumulate the explicit Girsanov log-weight.
  bool track_girsanov = false;

  void validate() const;
  std::size_t n_steps() const;
  /// Step indices of the checkpoints: 0 (initial state) then n_checkpoints
  /// evenly spaced steps ending at n_steps().
  std::vector<std::size_t> checkpoint_steps() const;
};

struct Trajectory {
  Picture picture = Picture::True;
  std::vector<CQState> states;        ///< one per checkpoint, states[0] is the initial state
  std::vector<double> log_weight;     ///< log g(psi~_t); identically zero in the true picture
  std::vector<double> girsanov_log;   ///< sum f dW - 1/2 f^2 dt (linear picture, when tracked)
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

/// Initial CQ state with psi rescaled so that g(psi) == 1.
CQState make_initial_state(const TheoryDefinition& theory, const StateVector& psi, double z0 = 0.0);

CQState step_true(const TheoryDefinition& theory, const CQState& state, double dW, double dt,
                  bool renormalize = true);

CQState step_linear(const TheoryDefinition& theory, const CQState& state, double dW, double dt);

/// One checkpointed trajectory, deterministic in (config.seed, index).
/// Step failures are rethrown as StepError carrying the failing time.
Trajectory simulate_trajectory(const TheoryDefinition& theory, const CQState& initial,
                               const SimConfig& config, std::uint64_t index);

/// config.n_traj trajectories, indices 0..n_traj-1, run on config.parallel threads.
std::vector<Trajectory> simulate_ensemble(const TheoryDefinition& theory, const CQState& initial,
                                          const SimConfig& config);

/// Theory in standard form after absorbing a general noise dR = mu dt + sigma dW:
/// B -> sigma B with A re-solved from the martingale constraint, and the
/// classical increment becomes mu dt + sigma (f dt + dW).
class NoiseReducedTheory {
 public:
  struct Effective {
    OperatorMatrix A;
    OperatorMatrix B;
    double mu = 0.0;
    double sigma = 1.0;
  };

  NoiseReducedTheory(TheoryDefinition theory, GeneralNoiseSpec spec)
      : theory_(std::move(theory)), spec_(std::move(spec)) {}

  const TheoryDefinition& base() const noexcept { return theory_; }
  /// Throws ValidationError for sigma < 0 (or non-finite mu/sigma).
  Effective effective(double z, double t) const;

 private:
  TheoryDefinition theory_;
  GeneralNoiseSpec spec_;
};

NoiseReducedTheory reduce_general_noise(const GeneralNoiseSpec& spec, const TheoryDefinition& theory);

/// True-picture step of a noise-reduced theory. With sigma = 1, mu = 0 this
/// is step_true.
CQState step_true_general(const NoiseReducedTheory& theory, const CQState& state, double dW,
                          double dt, bool renormalize = true);

/// Binned estimate of E[w rho delta(z - Z)] with per-trajectory weights w.
/// Real components of a bin matrix are indexed k = i*n + j: Re rho_ii on the
/// diagonal, Re rho_ij above it and Im rho_ji below it.
class WeightedDensityField {
 public:
  WeightedDensityField(std::vector<double> bin_edges, std::size_t dim);

  void add(double z, double weight, const OperatorMatrix& rho);
  void merge(const WeightedDensityField& other);

  std::size_t n_bins() const noexcept { return edges_.size() - 1; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t n_samples() const noexcept { return n_; }
  const std::vector<double>& edges() const noexcept { return edges_; }
  std::optional<std::size_t> bin_of(double z) const noexcept;

  double mass(std::size_t bin) const;
  double mass_stderr(std::size_t bin) const;
  double outside_mass() const;
  /// Binned plus out-of-range mass.
  double total_mass() const;
  double total_mass_stderr() const;
  OperatorMatrix matrix(std::size_t bin) const;
  double component(std::size_t bin, std::size_t k) const;
  double component_stderr(std::size_t bin, std::size_t k) const;
  /// Bin masses followed by the out-of-range mass (sums to total_mass()).
  std::vector<double> marginal() const;

 private:
  double stderr_of(double sum, double sumsq) const;

  std::vector<double> edges_;
  std::size_t dim_;
  std::size_t n_ = 0;
  std::vector<double> w_sum_, w_sq_;
  std::vector<double> c_sum_, c_sq_;  ///< n_bins * dim^2
  double out_sum_ = 0.0, out_sq_ = 0.0;
  double total_sq_ = 0.0;
};

/// True picture: weight 1 and rho = psi psi^dag / psi^dag psi.
/// Linear picture: weight g(psi~) and rho = psi~ psi~^dag / psi~^dag psi~.
WeightedDensityField weighted_density(std::span<const Trajectory> trajectories,
                                      std::span<const double> bin_edges, std::size_t checkpoint);

std::vector<double> uniform_edges(double lo, double hi, std::size_t n_bins);
/// n_bins uniform bins spanning z0 +- 4 sqrt(t_final).
std::vector<double> default_bin_edges(double z0, double t_final, std::size_t n_bins = 20);

/// 1/2 sum |p_i - q_i|
double total_variation(std::span<const double> p, std::span<const double> q);

/// (sum w)^2 / sum w^2
double effective_sample_size(std::span<const double> weights);

}  // namespace cqsim
