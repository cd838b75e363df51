/**
 * @file experiments.hpp
 * @brief Statistical verification drivers: Born-rule collapse statistics,
 *        the martingale sweep of g, and the equivalence of the two pictures.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cqsim/dynamics.hpp"
#include "cqsim/theory.hpp"

namespace cqsim {

struct BornConfig {
  double dt = 1e-3;
  /// 0 selects default_collapse_horizon(B).
  double t_final = 0.0;
  std::size_t n_traj = 10000;
  std::uint64_t seed = 0;
  double epsilon = 1e-3;
  unsigned parallel = 0;
  /// Runs with fewer collapsed trajectories throw InconclusiveRun.
  double min_collapsed_fraction = 0.9;
};

struct BornReport {
  std::vector<double> eigenvalues;       ///< of B + B^dag, ascending
  std::vector<StateVector> outcomes;     ///< pointer basis
  std::vector<double> predicted;         ///< |<e_i|psi0>|^2 / <psi0|psi0>
  std::vector<std::size_t> counts;
  std::vector<double> frequencies;       ///< counts / n_traj (sums to collapsed_fraction)
  std::vector<double> collapsed_frequencies;  ///< counts / n_collapsed
  std::size_t n_traj = 0;
  std::size_t n_collapsed = 0;
  double collapsed_fraction = 0.0;
  double chi_square = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  double epsilon = 0.0;
  double t_final = 0.0;
  double mean_collapse_time = 0.0;
};

/// Horizon long enough for collapse: 80 / gap^2 with gap the smallest
/// eigenvalue spacing of B + B^dag. The log-odds of two pointer states drift
/// at gap^2 / 2 per unit time, so this is 40 e-folds of separation.
double default_collapse_horizon(const OperatorMatrix& B);

/// Evolves true-picture trajectories until max_i |<e_i|psi>|^2/<psi|psi> > 1 - epsilon
/// and tallies the outcomes. Preconditions (ValidationError otherwise):
/// standard-QM or real-amplitude-QM with real inputs, no Z-dependence,
/// non-degenerate B + B^dag, and [G, B + B^dag] = 0.
BornReport born_rule_test(const TheoryDefinition& theory, const StateVector& psi0, const BornConfig& config);

struct CheckpointStat {
  double t = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double n_eff = 0.0;
};

struct MartingaleReport {
  std::vector<CheckpointStat> checkpoints;  ///< excludes t = 0
  double max_abs_z = 0.0;                   ///< max |mean - 1| / std_error
  bool pass = false;                        ///< |mean - 1| <= 5 std_error everywhere
  std::vector<std::string> warnings;
};

/// Mean and standard error of g(psi~_t) at every checkpoint of a
/// linear-picture ensemble. config.picture must be Linear.
MartingaleReport martingale_sweep(const TheoryDefinition& theory, const CQState& initial,
                                  const SimConfig& config);

struct BinComparison {
  std::size_t bin = 0;
  bool occupied = false;
  bool agree = false;
  double max_z = 0.0;  ///< largest |difference| / combined std_error over mass and matrix components
};

struct EquivalenceReport {
  std::vector<double> edges;
  std::vector<double> true_marginal;    ///< per bin, then out-of-range mass
  std::vector<double> linear_marginal;
  double tv_distance = 0.0;
  std::vector<BinComparison> bins;
  std::size_t occupied_bins = 0;
  std::size_t agreeing_bins = 0;
  double agreeing_fraction = 0.0;
  double linear_total_mass = 0.0;
  double linear_total_mass_stderr = 0.0;
  double n_eff = 0.0;
  std::uint64_t true_seed = 0;
  std::uint64_t linear_seed = 0;
  std::vector<std::string> warnings;
};

/// Runs both pictures with independent seeds and compares the weighted
/// density fields at the final checkpoint. Bins agree when mass and every
/// matrix component differ by at most 5 combined standard errors.
EquivalenceReport picture_equivalence_test(const TheoryDefinition& theory, const CQState& initial,
                                           const SimConfig& config, const std::vector<double>& edges);

/// Ensemble mean and standard error of max_i |<e_i|psi>|^2/<psi|psi> at each
/// checkpoint of a true-picture run (e_i the eigenbasis of B + B^dag).
std::vector<CheckpointStat> collapse_profile(const TheoryDefinition& theory, const CQState& initial,
                                             const SimConfig& config);

/// Chi-square upper tail probability.
double chi_square_p_value(double statistic, std::size_t dof);

}  // namespace cqsim
