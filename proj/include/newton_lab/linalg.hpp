#pragma once

// Small dense linear algebra: vectors, row-major matrices, 2-norms, LU with
// partial pivoting and Cholesky. Sized for systems of a few hundred unknowns.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "newton_lab/errors.hpp"

namespace newton_lab {

/// Unit roundoff of binary64, 2^-53.
inline constexpr double unit_roundoff = 0x1p-53;

class Vector {
public:
  Vector() = default;
  explicit Vector(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  Vector& operator+=(const Vector& o) {
    for (std::size_t i = 0; i < size(); ++i) data_[i] += o[i];
    return *this;
  }
  Vector& operator-=(const Vector& o) {
    for (std::size_t i = 0; i < size(); ++i) data_[i] -= o[i];
    return *this;
  }
  Vector& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Vector&, const Vector&) = default;

private:
  std::vector<double> data_;
};

inline Vector operator+(Vector a, const Vector& b) { return a += b; }
inline Vector operator-(Vector a, const Vector& b) { return a -= b; }
inline Vector operator*(double s, Vector a) { return a *= s; }
inline Vector operator*(Vector a, double s) { return a *= s; }
inline Vector operator-(Vector a) { return a *= -1.0; }

inline double dot(const Vector& a, const Vector& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

/// Euclidean norm, scaled to avoid overflow and underflow of the squares.
inline double norm2(const Vector& v) {
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double sum = 0.0;
  for (double x : v) {
    const double t = x / scale;
    sum += t * t;
  }
  return scale * std::sqrt(sum);
}

inline double norm_inf(const Vector& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ConfigError("Matrix: ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline Vector operator*(const Matrix& a, const Vector& x) {
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double sum = 0.0;
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) sum += r[j] * x[j];
    y[i] = sum;
  }
  return y;
}

inline Matrix operator*(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline double norm_frobenius(const Matrix& a) {
  return norm2(Vector(std::vector<double>(a.data().begin(), a.data().end())));
}

/// Row-sum norm; cheap upper bound for the 2-norm scale of a matrix.
inline double norm_inf(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row(i)) s += std::abs(v);
    m = std::max(m, s);
  }
  return m;
}

/// PA = LU with partial pivoting; the factors are stored in place.
class LuFactorization {
public:
  /// Throws SingularMatrix when a pivot magnitude is <= pivot_threshold.
  explicit LuFactorization(Matrix a, double pivot_threshold = 0.0)
      : lu_(std::move(a)), perm_(lu_.rows()) {
    if (!lu_.square()) throw ConfigError("lu: matrix is not square");
    const std::size_t n = lu_.rows();
    for (std::size_t i = 0; i < n; ++i) perm_[i] = i;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t p = k;
      double best = std::abs(lu_(k, k));
      for (std::size_t i = k + 1; i < n; ++i) {
        if (std::abs(lu_(i, k)) > best) {
          best = std::abs(lu_(i, k));
          p = i;
        }
      }
      if (!(best > pivot_threshold))
        throw SingularMatrix("lu: pivot " + std::to_string(k) + " is zero");
      if (p != k) {
        std::swap_ranges(lu_.row(k).begin(), lu_.row(k).end(), lu_.row(p).begin());
        std::swap(perm_[k], perm_[p]);
      }
      const double pivot = lu_(k, k);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double l = lu_(i, k) / pivot;
        lu_(i, k) = l;
        if (l == 0.0) continue;
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= l * lu_(k, j);
      }
    }
  }

  std::size_t size() const noexcept { return lu_.rows(); }

  Vector solve(const Vector& b) const {
    const std::size_t n = size();
    if (b.size() != n) throw ConfigError("lu: right-hand side is not conformal");
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = b[perm_[i]];
      for (std::size_t j = 0; j < i; ++j) sum -= lu_(i, j) * x[j];
      x[i] = sum;
    }
    for (std::size_t i = n; i-- > 0;) {
      double sum = x[i];
      for (std::size_t j = i + 1; j < n; ++j) sum -= lu_(i, j) * x[j];
      x[i] = sum / lu_(i, i);
    }
    return x;
  }

private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
};

inline Vector lu_solve(const Matrix& a, const Vector& b, double pivot_threshold = 0.0) {
  return LuFactorization(a, pivot_threshold).solve(b);
}

/// S = L L^T for symmetric positive definite S. Factor once, solve many.
class CholeskyFactorization {
public:
  explicit CholeskyFactorization(const Matrix& s) : l_(s.rows(), s.cols()) {
    if (!s.square()) throw ConfigError("cholesky: matrix is not square");
    const std::size_t n = s.rows();
    double scale = norm_inf(s);
    double asym = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        asym = std::max(asym, std::abs(s(i, j) - s(j, i)));
    if (asym > 8.0 * unit_roundoff * scale)
      throw NotPositiveDefinite("cholesky: matrix is not symmetric");

    for (std::size_t j = 0; j < n; ++j) {
      double d = s(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > 0.0))
        throw NotPositiveDefinite("cholesky: pivot " + std::to_string(j) +
                                  " is not positive");
      const double ljj = std::sqrt(d);
      l_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n; ++i) {
        double v = s(i, j);
        for (std::size_t k = 0; k < j; ++k) v -= l_(i, k) * l_(j, k);
        l_(i, j) = v / ljj;
      }
    }
  }

  std::size_t size() const noexcept { return l_.rows(); }
  const Matrix& factor() const noexcept { return l_; }

  Vector solve(const Vector& b) const {
    const std::size_t n = size();
    if (b.size() != n) throw ConfigError("cholesky: right-hand side is not conformal");
    Vector y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double sum = b[i];
      for (std::size_t k = 0; k < i; ++k) sum -= l_(i, k) * y[k];
      y[i] = sum / l_(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double sum = y[i];
      for (std::size_t k = i + 1; k < n; ++k) sum -= l_(k, i) * y[k];
      y[i] = sum / l_(i, i);
    }
    return y;
  }

private:
  Matrix l_;
};

inline Vector cholesky_solve(const Matrix& s, const Vector& b) {
  return CholeskyFactorization(s).solve(b);
}

}  // namespace newton_lab
