/**
 * @file theory.hpp
 * @brief Admissible classical-quantum theories: drift operator construction,
 *        classification, and the M/N lemma checks.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cqsim/linalg.hpp"
#include "cqsim/measure.hpp"

namespace cqsim {

enum class TheoryLabel { StandardQM, Trivial, RealAmplitudeQM, EllipsoidQM };

std::string_view to_string(TheoryLabel label) noexcept;

/// Classify a measure family. NormLinear with c0 != 0 is rejected
/// (ValidationError): its force is not invariant under rescaling.
TheoryLabel classify_theory(const MeasureFamily& family);

/// Solve the martingale constraint for the drift operator A given the
/// Hamiltonian-like G and the coupling B.
///
///   norm-linear     A = -iG - 1/2 B^dag B
///   norm-power      A = -iG - 1/2 B^dag B - (p-1) b^2 I,  B + B^dag = 2b I
///   real-amplitude  A = -iG - 1/2 B^dag B,  B real, -iG real (G imaginary antisymmetric)
///   quadratic-form  A = -i T^-1 G - 1/2 T^-1 B^dag T B,  T > 0
///
/// Throws ValidationError if (G, B) is not admissible for the family.
OperatorMatrix solve_drift_operator(const MeasureFamily& family, const OperatorMatrix& G,
                                    const OperatorMatrix& B);

/// b with B + B^dag = 2b I, or ValidationError when B + B^dag is not a
/// multiple of the identity to 1e-12.
double norm_power_b(const OperatorMatrix& B);

/// Coupling operators on one classical-coordinate bin [z_lo, z_hi).
struct CouplingSegment {
  double z_lo = 0.0;
  double z_hi = 0.0;
  OperatorMatrix G;
  OperatorMatrix B;
  OperatorMatrix A;
  double b = 0.0;  ///< norm-power only
};

/// Table row of a piecewise-constant (G, B) dependence on Z.
struct ZTableEntry {
  double z_lo;
  double z_hi;
  OperatorMatrix G;
  OperatorMatrix B;
};

class TheoryDefinition {
 public:
  /// Builds and fully validates a theory: G Hermitian, family admissibility,
  /// and the martingale residual <= 1e-10 at 100 random states for every
  /// segment (the bound is multiplied by n|A|_max + n^2 |B|_max^2 when that
  /// exceeds 1).
  static TheoryDefinition build(MeasureFamily family, OperatorMatrix G, OperatorMatrix B,
                                std::vector<ZTableEntry> z_table = {});

  std::size_t dim() const noexcept { return base_.G.dim(); }
  const MeasureFamily& family() const noexcept { return family_; }
  TheoryLabel label() const noexcept { return label_; }

  /// Operators at classical coordinate z (table lookup, base outside the table).
  const CouplingSegment& at(double z) const noexcept;
  const CouplingSegment& base() const noexcept { return base_; }
  const std::vector<CouplingSegment>& table() const noexcept { return table_; }
  bool z_dependent() const noexcept { return !table_.empty(); }

  /// Largest martingale residual over n_states random (non-unit) states and
  /// all segments.
  double max_residual(std::size_t n_states = 100, std::uint64_t seed = 7) const;

 private:
  TheoryDefinition(MeasureFamily family, TheoryLabel label, CouplingSegment base,
                   std::vector<CouplingSegment> table)
      : family_(std::move(family)), label_(label), base_(std::move(base)), table_(std::move(table)) {}

  MeasureFamily family_;
  TheoryLabel label_;
  CouplingSegment base_;
  std::vector<CouplingSegment> table_;
};

/// Complex Gaussian random state (entries N(0,1) + i N(0,1)); norm is not fixed.
StateVector random_state(std::size_t n, CounterRng& rng);
/// Uniformly distributed unit vector.
StateVector random_unit_state(std::size_t n, CounterRng& rng);
/// Random Hermitian matrix with N(0,1) entries (GUE-like).
OperatorMatrix random_hermitian(std::size_t n, CounterRng& rng);

/// max over n_samples random unit x of |x^dag M x x^dag x - (x^dag N x)^2|.
double lemma_violation(const OperatorMatrix& M, const OperatorMatrix& N, std::size_t n_samples,
                       std::uint64_t seed = 11);

/// M = n^2 I when N = n I (to 1e-10); empty when tr(N)^2 != tr(N^2) tr(I).
std::optional<OperatorMatrix> lemma_solve(const OperatorMatrix& N);

/// |tr(N)^2 - tr(N^2) tr(I)|, zero exactly when the Cauchy-Schwarz bound is
/// saturated.
double lemma_saturation_gap(const OperatorMatrix& N);

}  // namespace cqsim
