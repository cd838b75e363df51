/**
 * @file config.hpp
 * @brief JSON run configuration: `theory`, `sim` and `experiment` sections.
 *
 * Complex numbers are written [re, im] (a bare number is read as real),
 * vectors as arrays of complex numbers and matrices as arrays of rows.
 * Everything is validated on load; unknown keys are rejected.
 */
#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cqsim/dynamics.hpp"
#include "cqsim/theory.hpp"
#include "cqsim/zakai.hpp"

namespace cqsim {

using Json = nlohmann::json;

Complex parse_complex(const Json& j, const std::string& where);
StateVector parse_vector(const Json& j, std::size_t dim, const std::string& where);
OperatorMatrix parse_matrix(const Json& j, std::size_t dim, const std::string& where);
/// {"family": "norm-linear" | "norm-power" | "real-amplitude" | "quadratic-form", ...}
MeasureFamily parse_measure(const Json& j, std::size_t dim);

Json to_json(Complex c);
Json to_json(const StateVector& v);
Json to_json(const OperatorMatrix& m);

struct TheorySpec {
  std::size_t dim = 2;
  MeasureFamily family = MeasureFamily::norm_linear();
  OperatorMatrix G, B;
  std::vector<ZTableEntry> z_table;
  StateVector psi0;
  double z0 = 0.0;

  TheoryDefinition build() const;
  Json to_json() const;
};

struct BornSettings {
  double epsilon = 1e-3;
  double t_final = 0.0;  ///< 0 = automatic horizon
  double min_collapsed_fraction = 0.9;
  double significance = 1e-3;
};

struct EquivalenceSettings {
  std::size_t n_bins = 20;
  std::optional<double> z_lo, z_hi;  ///< default z0 +- 4 sqrt(t_final)
  double max_tv = 0.05;
  double min_agree_fraction = 0.95;
};

struct ZakaiSettings {
  double a = 1.0;
  double gain = 1.0;
  ZakaiGrid grid;
  double y0_mean = 0.0;
  double y0_var = 0.5;
  double t_final = 1.0;
  double dt = 1e-3;
  std::size_t n_traj = 100000;
  std::size_t y_bins = 15;
  std::size_t z_bins = 15;
  double y_lo = -3.0, y_hi = 3.0;
  double filter_t_final = 2.0;
  double filter_dt = 2.5e-4;
  std::size_t filter_paths = 10;
  double max_tv = 0.08;
  double max_filter_rms = 0.02;
};

struct LemmaSettings {
  std::optional<OperatorMatrix> N, M;
  std::size_t n_samples = 1000;
  std::size_t random_instances = 100;
  std::vector<std::size_t> dims{2, 3, 4};
};

struct RunConfig {
  std::string source;
  std::optional<TheorySpec> theory;
  SimConfig sim;
  BornSettings born;
  EquivalenceSettings equivalence;
  ZakaiSettings zakai;
  LemmaSettings lemma;

  /// The theory section, or ValidationError naming the command that needs it.
  const TheorySpec& require_theory(const std::string& command) const;
  Json to_json() const;
};

RunConfig parse_config(const Json& j, std::string source = {});
/// Reads and parses a file; ValidationError on I/O or syntax errors.
RunConfig load_config(const std::string& path);

}  // namespace cqsim
