#pragma once

// Small fixed-capacity tensors for chart-local computations. Every object
// carries its runtime dimension n <= kMaxDim and never allocates.

#include <array>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace ricci {

inline constexpr std::size_t kMaxDim = 4;

/// Point or coefficient vector in R^n.
class Vec {
public:
  Vec() = default;
  explicit Vec(std::size_t n, double fill = 0.0) : n_(n) {
    assert(n <= kMaxDim);
    c_.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) c_[i] = fill;
  }
  Vec(std::initializer_list<double> xs) : n_(xs.size()) {
    assert(xs.size() <= kMaxDim);
    c_.fill(0.0);
    std::size_t i = 0;
    for (double x : xs) c_[i++] = x;
  }
  static Vec from(std::span<const double> xs) {
    Vec v(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) v[i] = xs[i];
    return v;
  }
  static Vec unit(std::size_t n, std::size_t axis) {
    Vec v(n);
    v[axis] = 1.0;
    return v;
  }

  std::size_t size() const { return n_; }
  double& operator[](std::size_t i) { return c_[i]; }
  double operator[](std::size_t i) const { return c_[i]; }
  std::span<const double> span() const { return {c_.data(), n_}; }
  std::vector<double> to_vector() const { return {c_.begin(), c_.begin() + n_}; }

  Vec& operator+=(const Vec& o) {
    for (std::size_t i = 0; i < n_; ++i) c_[i] += o.c_[i];
    return *this;
  }
  Vec& operator-=(const Vec& o) {
    for (std::size_t i = 0; i < n_; ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Vec& operator*=(double s) {
    for (std::size_t i = 0; i < n_; ++i) c_[i] *= s;
    return *this;
  }
  friend Vec operator+(Vec a, const Vec& b) { return a += b; }
  friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
  friend Vec operator*(double s, Vec a) { return a *= s; }
  friend Vec operator*(Vec a, double s) { return a *= s; }

  double dot(const Vec& o) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += c_[i] * o.c_[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }
  double max_abs() const {
    double m = 0.0;
    for (std::size_t i = 0; i < n_; ++i) m = std::max(m, std::abs(c_[i]));
    return m;
  }

private:
  std::array<double, kMaxDim> c_{};
  std::size_t n_ = 0;
};

using Point = Vec;

/// Dense n x n matrix, row-major.
class Matrix {
public:
  Matrix() = default;
  explicit Matrix(std::size_t n, double diag = 0.0) : n_(n) {
    assert(n <= kMaxDim);
    a_.fill(0.0);
    for (std::size_t i = 0; i < n; ++i) (*this)(i, i) = diag;
  }
  static Matrix identity(std::size_t n) { return Matrix(n, 1.0); }

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return a_[i * kMaxDim + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a_[i * kMaxDim + j]; }

  Matrix& operator+=(const Matrix& o) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) (*this)(i, j) += o(i, j);
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) (*this)(i, j) -= o(i, j);
    return *this;
  }
  Matrix& operator*=(double s) {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) (*this)(i, j) *= s;
    return *this;
  }
  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(double s, Matrix a) { return a *= s; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix c(a.n_);
    for (std::size_t i = 0; i < a.n_; ++i)
      for (std::size_t k = 0; k < a.n_; ++k) {
        const double aik = a(i, k);
        for (std::size_t j = 0; j < a.n_; ++j) c(i, j) += aik * b(k, j);
      }
    return c;
  }
  friend Vec operator*(const Matrix& a, const Vec& v) {
    Vec r(a.n_);
    for (std::size_t i = 0; i < a.n_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.n_; ++j) s += a(i, j) * v[j];
      r[i] = s;
    }
    return r;
  }

  Matrix transpose() const {
    Matrix t(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) t(i, j) = (*this)(j, i);
    return t;
  }
  double trace() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += (*this)(i, i);
    return s;
  }
  double frobenius() const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) s += (*this)(i, j) * (*this)(i, j);
    return std::sqrt(s);
  }
  double max_abs() const {
    double m = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) m = std::max(m, std::abs((*this)(i, j)));
    return m;
  }
  /// a^T M b
  double bilinear(const Vec& a, const Vec& b) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) s += a[i] * (*this)(i, j) * b[j];
    return s;
  }

private:
  std::array<double, kMaxDim * kMaxDim> a_{};
  std::size_t n_ = 0;
};

/// Rank-3 array indexed (i, j, k) and read as Gamma^i_{jk}; also used for
/// metric derivatives stored as (k, i, j) = d_k g_{ij}.
class Rank3 {
public:
  Rank3() = default;
  explicit Rank3(std::size_t n) : n_(n) {
    assert(n <= kMaxDim);
    a_.fill(0.0);
  }

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return a_[(i * kMaxDim + j) * kMaxDim + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return a_[(i * kMaxDim + j) * kMaxDim + k];
  }

  Rank3& operator+=(const Rank3& o) {
    for_each([&](std::size_t i, std::size_t j, std::size_t k) { (*this)(i, j, k) += o(i, j, k); });
    return *this;
  }
  Rank3& operator-=(const Rank3& o) {
    for_each([&](std::size_t i, std::size_t j, std::size_t k) { (*this)(i, j, k) -= o(i, j, k); });
    return *this;
  }
  Rank3& operator*=(double s) {
    for_each([&](std::size_t i, std::size_t j, std::size_t k) { (*this)(i, j, k) *= s; });
    return *this;
  }
  friend Rank3 operator+(Rank3 a, const Rank3& b) { return a += b; }
  friend Rank3 operator-(Rank3 a, const Rank3& b) { return a -= b; }
  friend Rank3 operator*(double s, Rank3 a) { return a *= s; }

  double max_abs() const {
    double m = 0.0;
    for_each([&](std::size_t i, std::size_t j, std::size_t k) {
      m = std::max(m, std::abs((*this)(i, j, k)));
    });
    return m;
  }
  double abs_sum() const {
    double s = 0.0;
    for_each([&](std::size_t i, std::size_t j, std::size_t k) { s += std::abs((*this)(i, j, k)); });
    return s;
  }
  double square_sum() const {
    double s = 0.0;
    for_each([&](std::size_t i, std::size_t j, std::size_t k) {
      s += (*this)(i, j, k) * (*this)(i, j, k);
    });
    return s;
  }

  template <class F>
  void for_each(F&& f) const {
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t k = 0; k < n_; ++k) f(i, j, k);
  }

private:
  std::array<double, kMaxDim * kMaxDim * kMaxDim> a_{};
  std::size_t n_ = 0;
};

using Christoffel = Rank3;

// Linear algebra helpers for symmetric positive definite metrics.

/// Inverse by Gauss-Jordan with partial pivoting; returns false when singular.
bool invert(const Matrix& a, Matrix& out);
double determinant(const Matrix& a);
/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
Vec symmetric_eigenvalues(const Matrix& a);

}  // namespace ricci
