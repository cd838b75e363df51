// Reference computations for the tests. Everything here is written from the
// defining formulas and shares no code with the library beyond the vector
// and matrix containers.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "cqsim/linalg.hpp"
#include "cqsim/noise.hpp"

namespace oracle {

using cqsim::Complex;
using cqsim::OperatorMatrix;
using cqsim::StateVector;

using RealFn = std::function<double(const StateVector&)>;
using ComplexFn = std::function<Complex(const StateVector&)>;

// Wirtinger derivatives d/dx_i = (d/da - i d/db)/2 and d/dx*_i = (d/da + i d/db)/2
// with x_i = a + i b, by central differences of step h.
struct Wirtinger {
  Complex dz;
  Complex dzbar;
};

inline Wirtinger fd_wirtinger(const ComplexFn& f, const StateVector& x, std::size_t i, double h) {
  StateVector xp = x, xm = x;
  xp[i] += h;
  xm[i] -= h;
  const Complex da = (f(xp) - f(xm)) / (2.0 * h);
  xp = x;
  xm = x;
  xp[i] += Complex(0, h);
  xm[i] -= Complex(0, h);
  const Complex db = (f(xp) - f(xm)) / (2.0 * h);
  return {0.5 * (da - Complex(0, 1) * db), 0.5 * (da + Complex(0, 1) * db)};
}

inline StateVector fd_gradient(const RealFn& g, const StateVector& x, double h = 1e-6) {
  StateVector out(x.size());
  const ComplexFn f = [&](const StateVector& y) { return Complex(g(y), 0.0); };
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fd_wirtinger(f, x, i, h).dz;
  return out;
}

// S_ij = d grad_j / dx_i and H_ij = d grad_j / dx*_i from a gradient function.
inline void fd_hessians(const std::function<StateVector(const StateVector&)>& grad, const StateVector& x,
                        OperatorMatrix& S, OperatorMatrix& H, double h = 1e-6) {
  const std::size_t n = x.size();
  S = OperatorMatrix(n);
  H = OperatorMatrix(n);
  for (std::size_t j = 0; j < n; ++j) {
    const ComplexFn gj = [&, j](const StateVector& y) { return grad(y)[j]; };
    for (std::size_t i = 0; i < n; ++i) {
      const auto w = fd_wirtinger(gj, x, i, h);
      S(i, j) = w.dz;
      H(i, j) = w.dzbar;
    }
  }
}

// Drift of g along dx = A x dt + B x dW, from E[g(x + A x h + B x sqrt(h) xi)]
// with 5-point Gauss-Hermite quadrature (exact for polynomials of degree <= 9
// in xi) and one Richardson step in h.
inline double ito_drift(const RealFn& g, const OperatorMatrix& A, const OperatorMatrix& B, const StateVector& x,
                        double h = 1e-5) {
  static constexpr std::array<double, 5> nodes{0.0, 1.3556261799742659, -1.3556261799742659, 2.8569700138728056,
                                               -2.8569700138728056};
  static constexpr std::array<double, 5> weights{0.5333333333333333, 0.2220759220056126, 0.2220759220056126,
                                                 0.011257411327720691, 0.011257411327720691};
  const StateVector ax = A * x;
  const StateVector bx = B * x;
  const double g0 = g(x);
  auto mean_increment = [&](double step) {
    double e = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      StateVector y = x;
      for (std::size_t i = 0; i < x.size(); ++i) y[i] += ax[i] * step + bx[i] * (std::sqrt(step) * nodes[k]);
      e += weights[k] * (g(y) - g0);
    }
    return e / step;
  };
  return 2.0 * mean_increment(0.5 * h) - mean_increment(h);
}

inline Complex expect(const OperatorMatrix& m, const StateVector& x) {
  Complex num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    den += std::norm(x[i]);
    for (std::size_t j = 0; j < x.size(); ++j) num += std::conj(x[i]) * m(i, j) * x[j];
  }
  return num / den;
}

// <x|(B + B^dag)|x> / <x|x>
inline double standard_force(const OperatorMatrix& B, const StateVector& x) {
  return (expect(B, x) + std::conj(expect(B, x))).real();
}

// Eigenvalues of a 2x2 Hermitian matrix, ascending.
inline std::array<double, 2> eig2(const OperatorMatrix& m) {
  const double a = m(0, 0).real(), d = m(1, 1).real();
  const double r = std::sqrt(0.25 * (a - d) * (a - d) + std::norm(m(0, 1)));
  return {0.5 * (a + d) - r, 0.5 * (a + d) + r};
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Kolmogorov-Smirnov distance of a sample from a continuous CDF.
inline double ks_distance(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

// Upper tail of the chi-square distribution for 1 and 2 degrees of freedom.
inline double chi2_sf(double x, int dof) {
  if (dof == 1) return std::erfc(std::sqrt(0.5 * x));
  if (dof == 2) return std::exp(-0.5 * x);
  return std::nan("");
}

inline double binomial_sigma(double p, double n) { return std::sqrt(p * (1.0 - p) / n); }

struct Moments {
  double mean = 0.0;
  double var = 0.0;
  double stderr_mean = 0.0;
};

inline Moments moments(std::span<const double> xs) {
  Moments m;
  const double n = static_cast<double>(xs.size());
  for (double v : xs) m.mean += v;
  m.mean /= n;
  for (double v : xs) m.var += (v - m.mean) * (v - m.mean);
  m.var /= (n - 1.0);
  m.stderr_mean = std::sqrt(m.var / n);
  return m;
}

// Kalman-Bucy filter for dY = -a Y dt + dV, dZ = c Y dt + dW:
//   dm = -a m dt + S c (dZ - c m dt),   dS/dt = -2 a S + 1 - c^2 S^2
struct KalmanBucy {
  std::vector<double> mean, var;
};

inline KalmanBucy kalman_bucy(double a, double c, double m0, double s0, std::span<const double> dz, double dt) {
  KalmanBucy out;
  out.mean.reserve(dz.size() + 1);
  out.var.reserve(dz.size() + 1);
  double m = m0, s = s0;
  out.mean.push_back(m);
  out.var.push_back(s);
  for (double d : dz) {
    const double gain = s * c;
    const double m_next = m - a * m * dt + gain * (d - c * m * dt);
    const double s_next = s + (1.0 - 2.0 * a * s - c * c * s * s) * dt;
    m = m_next;
    s = s_next;
    out.mean.push_back(m);
    out.var.push_back(s);
  }
  return out;
}

// Variance of an Ornstein-Uhlenbeck process dY = -a Y dt + dV at time t.
inline double ou_variance(double a, double v0, double t) {
  const double stat = 0.5 / a;
  return stat + (v0 - stat) * std::exp(-2.0 * a * t);
}

// Random complex state with N(0,1) real and imaginary parts.
inline StateVector gaussian_state(std::size_t n, cqsim::CounterRng& rng) {
  StateVector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = Complex(rng.normal(), rng.normal());
  return x;
}

inline OperatorMatrix gaussian_matrix(std::size_t n, cqsim::CounterRng& rng, double scale = 1.0) {
  OperatorMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = scale * Complex(rng.normal(), rng.normal());
  return m;
}

inline OperatorMatrix gaussian_hermitian(std::size_t n, cqsim::CounterRng& rng, double scale = 1.0) {
  const OperatorMatrix m = gaussian_matrix(n, rng, scale);
  return 0.5 * (m + m.adjoint());
}

// Hermitian N with the traceless part scaled to unit Frobenius norm.
inline OperatorMatrix unit_spread_hermitian(std::size_t n, cqsim::CounterRng& rng) {
  OperatorMatrix h = gaussian_hermitian(n, rng);
  const Complex mean = h.trace() / static_cast<double>(n);
  OperatorMatrix dev = h - mean * OperatorMatrix::identity(n);
  double fro = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) fro += std::norm(dev(i, j));
  return (1.0 / std::sqrt(fro)) * dev + mean * OperatorMatrix::identity(n);
}

inline double rel_err(const StateVector& a, const StateVector& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / std::max(den, 1.0);
}

inline double rel_err(const OperatorMatrix& a, const OperatorMatrix& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) {
      num = std::max(num, std::abs(a(i, j) - b(i, j)));
      den = std::max(den, std::abs(b(i, j)));
    }
  return num / std::max(den, 1.0);
}

}  // namespace oracle
