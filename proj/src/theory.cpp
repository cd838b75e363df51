#include "cqsim/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cqsim/errors.hpp"

namespace cqsim {

namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kResidualTol = 1e-10;

void require_square_pair(const OperatorMatrix& G, const OperatorMatrix& B) {
  if (G.dim() != B.dim()) throw DimensionError("G and B must have the same dimension");
  if (!G.is_hermitian()) {
    throw ValidationError("G must be Hermitian (error " + std::to_string(G.hermiticity_error()) + ")");
  }
}

}  // namespace

std::string_view to_string(TheoryLabel label) noexcept {
  switch (label) {
    case TheoryLabel::StandardQM: return "standard-QM";
    case TheoryLabel::Trivial: return "trivial";
    case TheoryLabel::RealAmplitudeQM: return "real-amplitude-QM";
    case TheoryLabel::EllipsoidQM: return "ellipsoid-QM";
  }
  return "unknown";
}

TheoryLabel classify_theory(const MeasureFamily& family) {
  if (const auto* nl = family.get_if<NormLinear>()) {
    if (nl->c0 != 0.0) {
      throw ValidationError("norm-linear with c0 != 0 violates ray invariance of the force");
    }
    return TheoryLabel::StandardQM;
  }
  if (family.get_if<NormPower>()) return TheoryLabel::Trivial;
  if (family.get_if<RealAmplitude>()) return TheoryLabel::RealAmplitudeQM;
  const auto& T = family.get_if<QuadraticForm>()->T;
  const std::size_t n = T.dim();
  const double mean_diag = T.trace().real() / static_cast<double>(n);
  const double dev = max_abs_diff(T, mean_diag * OperatorMatrix::identity(n));
  return dev <= 1e-12 * std::max(1.0, std::abs(mean_diag)) ? TheoryLabel::StandardQM
                                                           : TheoryLabel::EllipsoidQM;
}

double norm_power_b(const OperatorMatrix& B) {
  const std::size_t n = B.dim();
  const OperatorMatrix sym = B + B.adjoint();
  const double b = sym.trace().real() / (2.0 * static_cast<double>(n));
  if (max_abs_diff(sym, (2.0 * b) * OperatorMatrix::identity(n)) > 1e-12) {
    throw ValidationError("norm-power requires B + B^dag = 2b I");
  }
  return b;
}

OperatorMatrix solve_drift_operator(const MeasureFamily& family, const OperatorMatrix& G,
                                    const OperatorMatrix& B) {
  require_square_pair(G, B);
  family.check_dimension(G.dim());
  const std::size_t n = G.dim();
  const OperatorMatrix BdB = B.adjoint() * B;

  if (family.get_if<NormLinear>()) return (-kI) * G - 0.5 * BdB;

  if (const auto* np = family.get_if<NormPower>()) {
    const double b = norm_power_b(B);
    return (-kI) * G - 0.5 * BdB - (static_cast<double>(np->p - 1) * b * b) * OperatorMatrix::identity(n);
  }

  if (family.get_if<RealAmplitude>()) {
    if (B.max_imag() > 1e-12) throw ValidationError("real-amplitude requires a real B");
    double re_g = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) re_g = std::max(re_g, std::abs(G(i, j).real()));
    if (re_g > 1e-12) {
      throw ValidationError(
          "real-amplitude requires -iG real, i.e. G purely imaginary and antisymmetric");
    }
    return (-kI) * G - 0.5 * BdB;
  }

  const auto& T = family.get_if<QuadraticForm>()->T;
  const auto es = hermitian_eigensystem(T);
  if (!(es.values.front() > 1e-10)) {
    throw ValidationError("quadratic-form drift needs T strictly positive (min eigenvalue " +
                          std::to_string(es.values.front()) + ")");
  }
  const OperatorMatrix Tinv = inverse(T);
  return (-kI) * (Tinv * G) - 0.5 * (Tinv * (B.adjoint() * T * B));
}

TheoryDefinition TheoryDefinition::build(MeasureFamily family, OperatorMatrix G, OperatorMatrix B,
                                         std::vector<ZTableEntry> z_table) {
  const TheoryLabel label = classify_theory(family);

  auto make_segment = [&](double lo, double hi, OperatorMatrix g, OperatorMatrix b) {
    CouplingSegment seg;
    seg.z_lo = lo;
    seg.z_hi = hi;
    seg.A = solve_drift_operator(family, g, b);
    if (family.get_if<NormPower>()) seg.b = norm_power_b(b);
    seg.G = std::move(g);
    seg.B = std::move(b);
    return seg;
  };

  CouplingSegment base = make_segment(-INFINITY, INFINITY, std::move(G), std::move(B));
  std::vector<CouplingSegment> table;
  table.reserve(z_table.size());
  for (auto& row : z_table) {
    if (!(row.z_lo < row.z_hi)) throw ValidationError("z-table row needs z_lo < z_hi");
    if (row.G.dim() != base.G.dim()) throw DimensionError("z-table operators must match dimension");
    table.push_back(make_segment(row.z_lo, row.z_hi, std::move(row.G), std::move(row.B)));
  }
  std::sort(table.begin(), table.end(),
            [](const CouplingSegment& a, const CouplingSegment& b) { return a.z_lo < b.z_lo; });
  for (std::size_t i = 1; i < table.size(); ++i) {
    if (table[i].z_lo < table[i - 1].z_hi) throw ValidationError("z-table rows overlap");
  }

  TheoryDefinition theory(std::move(family), label, std::move(base), std::move(table));
  // the solved A is exact, so the residual is round-off and grows with the operator scale
  double scale = 1.0;
  auto grow = [&](const CouplingSegment& seg) {
    const double n = static_cast<double>(seg.A.dim());
    scale = std::max(scale, n * seg.A.max_abs() + n * n * seg.B.max_abs() * seg.B.max_abs());
  };
  grow(theory.base_);
  for (const auto& seg : theory.table_) grow(seg);
  const double residual = theory.max_residual();
  if (!(residual <= kResidualTol * scale)) {
    throw ValidationError("martingale constraint violated (residual " + std::to_string(residual) + ")");
  }
  return theory;
}

const CouplingSegment& TheoryDefinition::at(double z) const noexcept {
  for (const auto& seg : table_) {
    if (z >= seg.z_lo && z < seg.z_hi) return seg;
  }
  return base_;
}

double TheoryDefinition::max_residual(std::size_t n_states, std::uint64_t seed) const {
  CounterRng rng(stream_key(seed, 0, 0x7e5));
  double worst = 0.0;
  auto scan = [&](const CouplingSegment& seg) {
    for (std::size_t k = 0; k < n_states; ++k) {
      const StateVector x = random_state(dim(), rng);
      worst = std::max(worst, martingale_residual(family_, seg.A, seg.B, x));
    }
  };
  scan(base_);
  for (const auto& seg : table_) scan(seg);
  return worst;
}

StateVector random_state(std::size_t n, CounterRng& rng) {
  StateVector x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double re = rng.normal();
    x[i] = Complex(re, rng.normal());
  }
  return x;
}

StateVector random_unit_state(std::size_t n, CounterRng& rng) {
  StateVector x = random_state(n, rng);
  return (1.0 / x.norm()) * x;
}

OperatorMatrix random_hermitian(std::size_t n, CounterRng& rng) {
  OperatorMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m(i, i) = rng.normal();
    for (std::size_t j = i + 1; j < n; ++j) {
      const double re = rng.normal();
      const Complex v(re, rng.normal());
      m(i, j) = v;
      m(j, i) = std::conj(v);
    }
  }
  return m;
}

double lemma_violation(const OperatorMatrix& M, const OperatorMatrix& N, std::size_t n_samples,
                       std::uint64_t seed) {
  if (M.dim() != N.dim()) throw DimensionError("lemma_violation: M and N dimensions differ");
  const std::size_t n = M.dim();
  auto violation = [&](const StateVector& x) {
    const Complex lhs = quadratic_form(M, x) * x.norm_squared();
    const Complex nx = quadratic_form(N, x);
    return std::abs(lhs - nx * nx);
  };

  double worst = 0.0;
  // Basis vectors and equal-weight superpositions of basis pairs: these are
  // the extremal directions for diagonal N and cheap to include.
  const double r = 1.0 / std::sqrt(2.0);
  for (std::size_t i = 0; i < n; ++i) {
    worst = std::max(worst, violation(StateVector::basis(n, i)));
    for (std::size_t j = i + 1; j < n; ++j) {
      for (Complex ph : {Complex(1, 0), Complex(-1, 0), Complex(0, 1), Complex(0, -1)}) {
        StateVector x(n);
        x[i] = r;
        x[j] = r * ph;
        worst = std::max(worst, violation(x));
      }
    }
  }
  CounterRng rng(stream_key(seed, 0, 0x1e77a));
  for (std::size_t k = 0; k < n_samples; ++k) worst = std::max(worst, violation(random_unit_state(n, rng)));
  return worst;
}

double lemma_saturation_gap(const OperatorMatrix& N) {
  const double n = static_cast<double>(N.dim());
  const double tr = N.trace().real();
  const double tr2 = (N * N).trace().real();
  return std::abs(tr * tr - tr2 * n);
}

std::optional<OperatorMatrix> lemma_solve(const OperatorMatrix& N) {
  if (!N.is_hermitian()) throw ValidationError("lemma_solve: N must be Hermitian");
  if (lemma_saturation_gap(N) > 1e-10) return std::nullopt;
  const std::size_t dim = N.dim();
  const double n = N.trace().real() / static_cast<double>(dim);
  if (max_abs_diff(N, n * OperatorMatrix::identity(dim)) > 1e-10) return std::nullopt;
  return (n * n) * OperatorMatrix::identity(dim);
}

}  // namespace cqsim
