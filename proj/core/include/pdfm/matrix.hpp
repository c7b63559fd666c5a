#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace pdfm {

/// Dense row-major matrix of doubles. The numeric workhorse for feature
/// blocks, layer weights and activations.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() { return {data_.data(), data_.size()}; }
  std::span<const double> flat() const { return {data_.data(), data_.size()}; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// c = a * b. Shapes (n,k) x (k,m) -> (n,m).
Matrix matmul(const Matrix& a, const Matrix& b);

/// c = a * b^T. Shapes (n,k) x (m,k) -> (n,m).
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// c = a^T * b. Shapes (k,n) x (k,m) -> (n,m).
Matrix matmul_tn(const Matrix& a, const Matrix& b);

/// y = M x for a single vector x.
std::vector<double> matvec(const Matrix& m, std::span<const double> x);

/// y = M^T x.
std::vector<double> matvec_t(const Matrix& m, std::span<const double> x);

/// a += scale * b, elementwise over equally-shaped matrices.
void add_scaled(Matrix& a, const Matrix& b, double scale = 1.0);

/// Throws SchemaError unless the matrix has the given shape.
void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                   const char* what);

}  // namespace pdfm
