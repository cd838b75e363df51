#include "cqsim/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cqsim/errors.hpp"

namespace cqsim {

void require_dimension(std::size_t n) {
  if (n < 1 || n > kMaxDim) {
    throw DimensionError("dimension " + std::to_string(n) + " outside [1, " +
                         std::to_string(kMaxDim) + "]");
  }
}

namespace {

void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// StateVector

StateVector::StateVector(std::size_t n) : n_(n) { require_dimension(n); }

StateVector::StateVector(std::initializer_list<Complex> values) : n_(values.size()) {
  require_dimension(n_);
  std::copy(values.begin(), values.end(), data_.begin());
}

StateVector::StateVector(std::span<const Complex> values) : n_(values.size()) {
  require_dimension(n_);
  std::copy(values.begin(), values.end(), data_.begin());
}

StateVector StateVector::basis(std::size_t n, std::size_t k) {
  StateVector e(n);
  if (k >= n) throw DimensionError("basis index out of range");
  e[k] = 1.0;
  return e;
}

double StateVector::norm_squared() const noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < n_; ++i) s += std::norm(data_[i]);
  return s;
}

double StateVector::norm() const noexcept { return std::sqrt(norm_squared()); }

StateVector StateVector::conj() const noexcept {
  StateVector out = *this;
  for (std::size_t i = 0; i < n_; ++i) out.data_[i] = std::conj(data_[i]);
  return out;
}

bool StateVector::is_finite() const noexcept {
  for (std::size_t i = 0; i < n_; ++i) {
    if (!std::isfinite(data_[i].real()) || !std::isfinite(data_[i].imag())) return false;
  }
  return true;
}

StateVector& StateVector::operator+=(const StateVector& other) {
  require_same(n_, other.n_, "vector add");
  for (std::size_t i = 0; i < n_; ++i) data_[i] += other.data_[i];
  return *this;
}

StateVector& StateVector::operator-=(const StateVector& other) {
  require_same(n_, other.n_, "vector subtract");
  for (std::size_t i = 0; i < n_; ++i) data_[i] -= other.data_[i];
  return *this;
}

StateVector& StateVector::operator*=(Complex s) noexcept {
  for (std::size_t i = 0; i < n_; ++i) data_[i] *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// OperatorMatrix

OperatorMatrix::OperatorMatrix(std::size_t n) : n_(n), data_(n * n) { require_dimension(n); }

OperatorMatrix::OperatorMatrix(std::initializer_list<std::initializer_list<Complex>> rows)
    : n_(rows.size()), data_(rows.size() * rows.size()) {
  require_dimension(n_);
  std::size_t i = 0;
  for (const auto& row : rows) {
    require_same(row.size(), n_, "matrix literal row");
    std::copy(row.begin(), row.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * n_));
    ++i;
  }
}

OperatorMatrix OperatorMatrix::identity(std::size_t n) {
  OperatorMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

OperatorMatrix OperatorMatrix::diagonal(std::span<const Complex> d) {
  OperatorMatrix m(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

OperatorMatrix OperatorMatrix::diagonal(std::initializer_list<Complex> d) {
  return diagonal(std::span<const Complex>(d.begin(), d.size()));
}

OperatorMatrix OperatorMatrix::outer(const StateVector& x, const StateVector& y) {
  require_same(x.size(), y.size(), "outer");
  OperatorMatrix m(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) m(i, j) = x[i] * std::conj(y[j]);
  return m;
}

OperatorMatrix OperatorMatrix::adjoint() const {
  OperatorMatrix out(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) out(j, i) = std::conj((*this)(i, j));
  return out;
}

OperatorMatrix OperatorMatrix::transpose() const {
  OperatorMatrix out(n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) out(j, i) = (*this)(i, j);
  return out;
}

OperatorMatrix OperatorMatrix::conj() const {
  OperatorMatrix out = *this;
  for (auto& v : out.data_) v = std::conj(v);
  return out;
}

Complex OperatorMatrix::trace() const noexcept {
  Complex t = 0.0;
  for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double OperatorMatrix::hermiticity_error() const noexcept {
  double err = 0.0;
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = i; j < n_; ++j)
      err = std::max(err, std::abs((*this)(i, j) - std::conj((*this)(j, i))));
  return err;
}

double OperatorMatrix::max_abs() const noexcept {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v));
  return m;
}

double OperatorMatrix::max_imag() const noexcept {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v.imag()));
  return m;
}

bool OperatorMatrix::is_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](const Complex& v) {
    return std::isfinite(v.real()) && std::isfinite(v.imag());
  });
}

OperatorMatrix& OperatorMatrix::operator+=(const OperatorMatrix& other) {
  require_same(n_, other.n_, "matrix add");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

OperatorMatrix& OperatorMatrix::operator-=(const OperatorMatrix& other) {
  require_same(n_, other.n_, "matrix subtract");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

OperatorMatrix& OperatorMatrix::operator*=(Complex s) noexcept {
  for (auto& v : data_) v *= s;
  return *this;
}

OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
  require_same(a.n_, b.n_, "matrix product");
  const std::size_t n = a.n_;
  OperatorMatrix out(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      const Complex aik = a(i, k);
      if (aik == Complex{}) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

StateVector operator*(const OperatorMatrix& m, const StateVector& x) {
  require_same(m.n_, x.size(), "matrix-vector product");
  const std::size_t n = m.n_;
  StateVector out(n);
  const Complex* row = m.data_.data();
  for (std::size_t i = 0; i < n; ++i, row += n) {
    Complex s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += row[j] * x[j];
    out[i] = s;
  }
  return out;
}

double max_abs_diff(const OperatorMatrix& a, const OperatorMatrix& b) {
  require_same(a.dim(), b.dim(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

double max_abs_diff(const StateVector& a, const StateVector& b) {
  require_same(a.size(), b.size(), "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

Complex inner(const StateVector& x, const StateVector& y) {
  require_same(x.size(), y.size(), "inner");
  Complex s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
  return s;
}

Complex dot(const StateVector& x, const StateVector& y) {
  require_same(x.size(), y.size(), "dot");
  Complex s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

Complex quadratic_form(const OperatorMatrix& m, const StateVector& x) {
  require_same(m.dim(), x.size(), "quadratic_form");
  return inner(x, m * x);
}

OperatorMatrix inverse(const OperatorMatrix& m) {
  const std::size_t n = m.dim();
  OperatorMatrix a = m;
  OperatorMatrix inv = OperatorMatrix::identity(n);
  const double scale = std::max(m.max_abs(), 1e-300);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (std::abs(a(piv, col)) <= 1e-14 * scale) throw ValidationError("singular matrix");
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(piv, j), a(col, j));
        std::swap(inv(piv, j), inv(col, j));
      }
    }
    const Complex d = 1.0 / a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) *= d;
      inv(col, j) *= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const Complex f = a(r, col);
      if (f == Complex{}) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

// ---------------------------------------------------------------------------
// Hermitian eigensolver

HermitianEigensystem hermitian_eigensystem(const OperatorMatrix& m) {
  if (!m.is_hermitian()) {
    throw ValidationError("hermitian_eigensystem: input not Hermitian (error " +
                          std::to_string(m.hermiticity_error()) + ")");
  }
  const std::size_t n = m.dim();
  OperatorMatrix a = m;
  OperatorMatrix v = OperatorMatrix::identity(n);
  for (std::size_t i = 0; i < n; ++i) a(i, i) = a(i, i).real();

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += std::norm(a(i, j));
    return std::sqrt(s);
  };
  const double scale = std::max(m.max_abs(), 1e-300);

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps && off_norm() > 1e-15 * scale; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const Complex apq = a(p, q);
        const double mag = std::abs(apq);
        if (mag <= 1e-300) continue;
        // The phase makes the (p,q) element real, then a real Jacobi rotation
        // annihilates it. J = diag(1, e^{-i phi}) * [[c, s], [-s, c]].
        const Complex phase = apq / mag;  // e^{i phi}
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * mag);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const Complex jqp = -s * std::conj(phase);
        const Complex jqq = c * std::conj(phase);

        // A <- A J (columns p, q)
        for (std::size_t k = 0; k < n; ++k) {
          const Complex akp = a(k, p);
          const Complex akq = a(k, q);
          a(k, p) = akp * c + akq * jqp;
          a(k, q) = akp * s + akq * jqq;
        }
        // A <- J^dag A (rows p, q)
        for (std::size_t k = 0; k < n; ++k) {
          const Complex apk = a(p, k);
          const Complex aqk = a(q, k);
          a(p, k) = c * apk + std::conj(jqp) * aqk;
          a(q, k) = s * apk + std::conj(jqq) * aqk;
        }
        // V <- V J
        for (std::size_t k = 0; k < n; ++k) {
          const Complex vkp = v(k, p);
          const Complex vkq = v(k, q);
          v(k, p) = vkp * c + vkq * jqp;
          v(k, q) = vkp * s + vkq * jqq;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
  }
  if (off_norm() > 1e-12 * scale) throw NumericalError("Jacobi eigensolver did not converge");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return a(i, i).real() < a(j, j).real(); });

  HermitianEigensystem es;
  es.values.reserve(n);
  es.vectors.reserve(n);
  for (std::size_t k : order) {
    es.values.push_back(a(k, k).real());
    StateVector col(n);
    for (std::size_t i = 0; i < n; ++i) col[i] = v(i, k);
    es.vectors.push_back(col);
  }
  return es;
}

OperatorMatrix reconstruct(const HermitianEigensystem& es) {
  const std::size_t n = es.vectors.front().size();
  OperatorMatrix out(n);
  for (std::size_t k = 0; k < es.values.size(); ++k)
    out += es.values[k] * OperatorMatrix::outer(es.vectors[k], es.vectors[k]);
  return out;
}

}  // namespace cqsim
