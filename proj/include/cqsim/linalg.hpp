/**
 * @file linalg.hpp
 * @brief Small dense complex linear algebra (n <= kMaxDim).
 *
 * StateVector stores its components inline so that the trajectory loops
 * never touch the heap. OperatorMatrix is a plain row-major n x n array.
 */
#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace cqsim {

using Complex = std::complex<double>;

inline constexpr std::size_t kMaxDim = 16;
inline constexpr double kHermitianTol = 1e-12;

void require_dimension(std::size_t n);

class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(std::size_t n);
  StateVector(std::initializer_list<Complex> values);
  explicit StateVector(std::span<const Complex> values);

  std::size_t size() const noexcept { return n_; }
  Complex& operator[](std::size_t i) noexcept { return data_[i]; }
  const Complex& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<const Complex> components() const noexcept { return {data_.data(), n_}; }
  const Complex* begin() const noexcept { return data_.data(); }
  const Complex* end() const noexcept { return data_.data() + n_; }

  /// x^dag x
  double norm_squared() const noexcept;
  double norm() const noexcept;
  StateVector conj() const noexcept;
  bool is_finite() const noexcept;

  StateVector& operator+=(const StateVector& other);
  StateVector& operator-=(const StateVector& other);
  StateVector& operator*=(Complex s) noexcept;

  friend StateVector operator+(StateVector a, const StateVector& b) { return a += b; }
  friend StateVector operator-(StateVector a, const StateVector& b) { return a -= b; }
  friend StateVector operator*(Complex s, StateVector a) noexcept { return a *= s; }
  friend StateVector operator*(StateVector a, Complex s) noexcept { return a *= s; }

  static StateVector basis(std::size_t n, std::size_t k);

 private:
  std::array<Complex, kMaxDim> data_{};
  std::size_t n_ = 0;
};

class OperatorMatrix {
 public:
  OperatorMatrix() = default;
  /// Zero matrix of dimension n.
  explicit OperatorMatrix(std::size_t n);
  OperatorMatrix(std::initializer_list<std::initializer_list<Complex>> rows);

  static OperatorMatrix identity(std::size_t n);
  static OperatorMatrix zero(std::size_t n) { return OperatorMatrix(n); }
  static OperatorMatrix diagonal(std::span<const Complex> d);
  static OperatorMatrix diagonal(std::initializer_list<Complex> d);
  /// x y^dag
  static OperatorMatrix outer(const StateVector& x, const StateVector& y);

  std::size_t dim() const noexcept { return n_; }
  Complex& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * n_ + j]; }
  const Complex& operator()(std::size_t i, std::size_t j) const noexcept {
    return data_[i * n_ + j];
  }

  OperatorMatrix adjoint() const;
  OperatorMatrix transpose() const;
  OperatorMatrix conj() const;
  Complex trace() const noexcept;

  /// max_ij |M_ij - conj(M_ji)|
  double hermiticity_error() const noexcept;
  bool is_hermitian(double tol = kHermitianTol) const noexcept {
    return hermiticity_error() <= tol;
  }
  double max_abs() const noexcept;
  double max_imag() const noexcept;
  bool is_finite() const noexcept;

  OperatorMatrix& operator+=(const OperatorMatrix& other);
  OperatorMatrix& operator-=(const OperatorMatrix& other);
  OperatorMatrix& operator*=(Complex s) noexcept;

  friend OperatorMatrix operator+(OperatorMatrix a, const OperatorMatrix& b) { return a += b; }
  friend OperatorMatrix operator-(OperatorMatrix a, const OperatorMatrix& b) { return a -= b; }
  friend OperatorMatrix operator*(Complex s, OperatorMatrix a) noexcept { return a *= s; }
  friend OperatorMatrix operator*(OperatorMatrix a, Complex s) noexcept { return a *= s; }
  friend OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b);
  friend StateVector operator*(const OperatorMatrix& m, const StateVector& x);

 private:
  std::size_t n_ = 0;
  std::vector<Complex> data_;
};

/// max_ij |a_ij - b_ij|
double max_abs_diff(const OperatorMatrix& a, const OperatorMatrix& b);
double max_abs_diff(const StateVector& a, const StateVector& b);

/// x^dag y (conjugate-linear in x).
Complex inner(const StateVector& x, const StateVector& y);
/// x^T y, no conjugation.
Complex dot(const StateVector& x, const StateVector& y);
/// x^dag M x
Complex quadratic_form(const OperatorMatrix& m, const StateVector& x);

/// Matrix inverse by Gauss-Jordan with partial pivoting.
OperatorMatrix inverse(const OperatorMatrix& m);

struct HermitianEigensystem {
  std::vector<double> values;          ///< ascending
  std::vector<StateVector> vectors;    ///< orthonormal, vectors[k] pairs with values[k]
};

/// Cyclic complex Jacobi diagonalisation. Throws ValidationError when the
/// input is not Hermitian to kHermitianTol.
HermitianEigensystem hermitian_eigensystem(const OperatorMatrix& m);

/// V diag(values) V^dag
OperatorMatrix reconstruct(const HermitianEigensystem& es);

}  // namespace cqsim
