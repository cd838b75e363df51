/**
 * @file measure.hpp
 * @brief Measure functions g: C^n -> R>=0, their derivative bundles, the
 *        martingale constraint residual, the back-reaction force and the
 *        explicit Girsanov path weight.
 */
#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>

#include "cqsim/linalg.hpp"
#include "cqsim/noise.hpp"

namespace cqsim {

/// g = c x^dag x + c0
struct NormLinear {
  double c = 1.0;
  double c0 = 0.0;
};

/// g = (x^dag x)^p
struct NormPower {
  int p = 2;
};

/// g = (x + x*)^dag (x + x*)
struct RealAmplitude {};

/// g = x^dag T x, T Hermitian and positive semi-definite.
struct QuadraticForm {
  OperatorMatrix T;
};

class MeasureFamily {
 public:
  using Variant = std::variant<NormLinear, NormPower, RealAmplitude, QuadraticForm>;

  /// Validating constructors; throw ValidationError on bad parameters.
  static MeasureFamily norm_linear(double c = 1.0, double c0 = 0.0);
  static MeasureFamily norm_power(int p);
  static MeasureFamily real_amplitude();
  static MeasureFamily quadratic_form(OperatorMatrix T);

  const Variant& variant() const noexcept { return v_; }
  template <class T>
  const T* get_if() const noexcept {
    return std::get_if<T>(&v_);
  }

  /// "norm-linear", "norm-power", "real-amplitude" or "quadratic-form".
  std::string_view name() const noexcept;

  /// Homogeneity degree of g in |x|, used to scale support tolerances.
  int degree() const noexcept;

  /// Throws DimensionError if the family is tied to a different dimension.
  void check_dimension(std::size_t n) const;

 private:
  explicit MeasureFamily(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

/// (grad g)_i = dg/dx_i, S_ij = d2g/dx_i dx_j, H_ij = d2g/dx*_i dx_j
struct GradientBundle {
  StateVector grad;
  OperatorMatrix S;
  OperatorMatrix H;
};

double eval_g(const MeasureFamily& family, const StateVector& x);

/// Only the gradient (cheap, used inside the trajectory loops).
StateVector gradient(const MeasureFamily& family, const StateVector& x);

GradientBundle grad_bundle(const MeasureFamily& family, const StateVector& x);

/// |grad^T A x + x^dag A^dag grad* + 1/2 x^T B^T S B x + 1/2 x^dag B^dag S* B* x*
///   + x^dag B^dag H B x|, the drift of g(x_t) under dx = Ax dt + Bx dW.
double martingale_residual(const MeasureFamily& family, const OperatorMatrix& A,
                           const OperatorMatrix& B, const StateVector& x);

/// True when g(x) is indistinguishable from zero at the scale of |x|.
bool outside_support(const MeasureFamily& family, const StateVector& x, double g);

/// g^{-1} (grad^T B x + x^dag B^dag grad*), before discarding the (round-off)
/// imaginary part. Throws MeasureSupportError when g(x) == 0.
Complex force_complex(const MeasureFamily& family, const OperatorMatrix& B, const StateVector& x);

/// Real back-reaction force on the classical coordinate.
double force(const MeasureFamily& family, const OperatorMatrix& B, const StateVector& x);

/// Rescale x so that g(x) == 1. Throws ValidationError when g(x) == 0.
StateVector normalize_to_measure(const MeasureFamily& family, const StateVector& x);

/// log g_t = sum mu_k dW_k - 1/2 sum mu_k^2 dt, accumulated in log space.
double girsanov_log_weight(std::span<const double> drift_path, const WienerPath& wiener);

/// exp(girsanov_log_weight(...)).
double girsanov_weight(std::span<const double> drift_path, const WienerPath& wiener);

}  // namespace cqsim
