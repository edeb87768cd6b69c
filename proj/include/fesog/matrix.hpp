#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fesog {

/// Dense row-major matrix of doubles. Rows double as embedding vectors.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using Vec = std::vector<double>;

namespace linalg {

inline double dot(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

// y = M x
inline Vec matvec(const Matrix& m, std::span<const double> x) {
  Vec y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
  return y;
}

// y += M^T x
inline void matTvec_acc(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    auto mr = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += mr[c] * xr;
  }
}

// G += u v^T
inline void outer_acc(Matrix& g, std::span<const double> u, std::span<const double> v) {
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const double ur = u[r];
    if (ur == 0.0) continue;
    auto gr = g.row(r);
    for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += ur * v[c];
  }
}

// y += s x
inline void axpy(double s, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += s * x[i];
}

}  // namespace linalg
}  // namespace fesog
