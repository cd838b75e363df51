#include "cqsim/measure.hpp"

#include <cmath>
#include <string>

#include "cqsim/errors.hpp"

namespace cqsim {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kSupportFloor = 1e-24;

}  // namespace

MeasureFamily MeasureFamily::norm_linear(double c, double c0) {
  if (!(c > 0.0) || !std::isfinite(c)) throw ValidationError("norm-linear: c must be > 0");
  if (!(c0 >= 0.0) || !std::isfinite(c0)) {
    throw ValidationError("norm-linear: c0 must be >= 0 for g to be non-negative");
  }
  return MeasureFamily(NormLinear{c, c0});
}

MeasureFamily MeasureFamily::norm_power(int p) {
  if (p < 2) throw ValidationError("norm-power: p must be an integer >= 2");
  return MeasureFamily(NormPower{p});
}

MeasureFamily MeasureFamily::real_amplitude() { return MeasureFamily(RealAmplitude{}); }

MeasureFamily MeasureFamily::quadratic_form(OperatorMatrix T) {
  if (!T.is_hermitian()) throw ValidationError("quadratic-form: T must be Hermitian");
  const auto es = hermitian_eigensystem(T);
  if (es.values.front() < -1e-12) {
    throw ValidationError("quadratic-form: T must be positive semi-definite (min eigenvalue " +
                          std::to_string(es.values.front()) + ")");
  }
  return MeasureFamily(QuadraticForm{std::move(T)});
}

std::string_view MeasureFamily::name() const noexcept {
  return std::visit(overloaded{[](const NormLinear&) { return std::string_view("norm-linear"); },
                               [](const NormPower&) { return std::string_view("norm-power"); },
                               [](const RealAmplitude&) { return std::string_view("real-amplitude"); },
                               [](const QuadraticForm&) { return std::string_view("quadratic-form"); }},
                    v_);
}

int MeasureFamily::degree() const noexcept {
  if (const auto* np = std::get_if<NormPower>(&v_)) return np->p;
  return 1;
}

void MeasureFamily::check_dimension(std::size_t n) const {
  if (const auto* qf = std::get_if<QuadraticForm>(&v_)) {
    if (qf->T.dim() != n) throw DimensionError("quadratic-form: T dimension does not match state");
  }
}

double eval_g(const MeasureFamily& family, const StateVector& x) {
  family.check_dimension(x.size());
  return std::visit(
      overloaded{[&](const NormLinear& f) { return f.c * x.norm_squared() + f.c0; },
                 [&](const NormPower& f) { return std::pow(x.norm_squared(), f.p); },
                 [&](const RealAmplitude&) {
                   double s = 0.0;
                   for (const auto& v : x) s += 4.0 * v.real() * v.real();
                   return s;
                 },
                 [&](const QuadraticForm& f) { return quadratic_form(f.T, x).real(); }},
      family.variant());
}

StateVector gradient(const MeasureFamily& family, const StateVector& x) {
  family.check_dimension(x.size());
  return std::visit(
      overloaded{[&](const NormLinear& f) { return f.c * x.conj(); },
                 [&](const NormPower& f) {
                   const double s = x.norm_squared();
                   return (f.p * std::pow(s, f.p - 1)) * x.conj();
                 },
                 [&](const RealAmplitude&) {
                   StateVector g(x.size());
                   for (std::size_t i = 0; i < x.size(); ++i) g[i] = 4.0 * x[i].real();
                   return g;
                 },
                 [&](const QuadraticForm& f) {
                   // (T^T x*)_i = sum_k T_ki x_k*
                   StateVector g(x.size());
                   for (std::size_t i = 0; i < x.size(); ++i) {
                     Complex s = 0.0;
                     for (std::size_t k = 0; k < x.size(); ++k) s += f.T(k, i) * std::conj(x[k]);
                     g[i] = s;
                   }
                   return g;
                 }},
      family.variant());
}

GradientBundle grad_bundle(const MeasureFamily& family, const StateVector& x) {
  const std::size_t n = x.size();
  GradientBundle b{gradient(family, x), OperatorMatrix(n), OperatorMatrix(n)};
  std::visit(overloaded{[&](const NormLinear& f) { b.H = f.c * OperatorMatrix::identity(n); },
                        [&](const NormPower& f) {
                          const double s = x.norm_squared();
                          const double h1 = f.p * std::pow(s, f.p - 1);
                          const double h2 = f.p * (f.p - 1) * std::pow(s, f.p - 2);
                          const StateVector xc = x.conj();
                          // S = h'' x* x^dag (entries x_i* x_j*), H = h'' x x^dag + h' I
                          b.S = h2 * OperatorMatrix::outer(xc, x);
                          b.H = h2 * OperatorMatrix::outer(x, x) + h1 * OperatorMatrix::identity(n);
                        },
                        [&](const RealAmplitude&) {
                          b.S = 2.0 * OperatorMatrix::identity(n);
                          b.H = 2.0 * OperatorMatrix::identity(n);
                        },
                        [&](const QuadraticForm& f) { b.H = f.T; }},
             family.variant());
  return b;
}

double martingale_residual(const MeasureFamily& family, const OperatorMatrix& A,
                           const OperatorMatrix& B, const StateVector& x) {
  const GradientBundle gb = grad_bundle(family, x);
  const StateVector ax = A * x;
  const StateVector bx = B * x;
  const StateVector grad_c = gb.grad.conj();
  const Complex drift = dot(gb.grad, ax) + inner(ax, grad_c) + 0.5 * dot(bx, gb.S * bx) +
                        0.5 * inner(bx, gb.S.conj() * bx.conj()) + inner(bx, gb.H * bx);
  return std::abs(drift);
}

bool outside_support(const MeasureFamily& family, const StateVector& x, double g) {
  const double s = x.norm_squared();
  const double scale = std::visit(
      overloaded{[&](const NormLinear& f) { return f.c * s + f.c0; },
                 [&](const NormPower& f) { return std::pow(s, f.p); },
                 [&](const RealAmplitude&) { return 4.0 * s; },
                 [&](const QuadraticForm& f) { return std::max(f.T.max_abs(), 1e-300) * s; }},
      family.variant());
  return !(scale > 0.0) || !(g > kSupportFloor * scale);
}

Complex force_complex(const MeasureFamily& family, const OperatorMatrix& B, const StateVector& x) {
  const double g = eval_g(family, x);
  if (outside_support(family, x, g)) {
    throw MeasureSupportError("force undefined: g(x) = 0 (state outside the measure support)");
  }
  const StateVector grad = gradient(family, x);
  const StateVector bx = B * x;
  return (dot(grad, bx) + inner(bx, grad.conj())) / g;
}

double force(const MeasureFamily& family, const OperatorMatrix& B, const StateVector& x) {
  return force_complex(family, B, x).real();
}

StateVector normalize_to_measure(const MeasureFamily& family, const StateVector& x) {
  const double g = eval_g(family, x);
  if (outside_support(family, x, g)) {
    throw ValidationError("initial state has g(psi0) = 0; it cannot be normalised");
  }
  // Every family is homogeneous: g(lambda x) = lambda^(2 * degree) g(x) for real lambda > 0.
  // NormLinear with c0 != 0 is the exception and is handled by solving directly.
  if (const auto* nl = family.get_if<NormLinear>(); nl && nl->c0 != 0.0) {
    const double target = (1.0 - nl->c0) / nl->c;
    if (!(target > 0.0)) throw ValidationError("norm-linear: c0 >= 1 admits no state with g = 1");
    return std::sqrt(target / x.norm_squared()) * x;
  }
  const double lambda = std::pow(g, -0.5 / family.degree());
  return lambda * x;
}

double girsanov_log_weight(std::span<const double> drift_path, const WienerPath& wiener) {
  if (drift_path.size() != wiener.increments.size()) {
    throw DimensionError("girsanov_weight: drift path and Wiener path lengths differ");
  }
  double log_w = 0.0;
  for (std::size_t k = 0; k < drift_path.size(); ++k) {
    const double mu = drift_path[k];
    log_w += mu * wiener.increments[k] - 0.5 * mu * mu * wiener.dt;
  }
  return log_w;
}

double girsanov_weight(std::span<const double> drift_path, const WienerPath& wiener) {
  return std::exp(girsanov_log_weight(drift_path, wiener));
}

}  // namespace cqsim
