#include "pdfm/matrix.hpp"

#include <string>

#include "pdfm/errors.hpp"

namespace pdfm {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw SchemaError("matmul: inner dimensions disagree (" +
                      std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + ")");
  Matrix c(a.rows(), b.cols());
  // i-k-j order keeps the inner loop contiguous in both b and c.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.data() + i * c.cols();
    const double* ai = a.data() + i * a.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = ai[k];
      if (aik == 0.0) continue;
      const double* bk = b.data() + k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw SchemaError("matmul_nt: inner dimensions disagree");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.data() + i * a.cols();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.data() + j * b.cols();
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += ai[k] * bj[k];
      c.at(i, j) = s;
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw SchemaError("matmul_tn: inner dimensions disagree");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* ak = a.data() + k * a.cols();
    const double* bk = b.data() + k * b.cols();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = ak[i];
      if (aki == 0.0) continue;
      double* ci = c.data() + i * c.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
  if (m.cols() != x.size()) throw SchemaError("matvec: dimension mismatch");
  std::vector<double> y(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double* mi = m.data() + i * m.cols();
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) s += mi[j] * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<double> matvec_t(const Matrix& m, std::span<const double> x) {
  if (m.rows() != x.size()) throw SchemaError("matvec_t: dimension mismatch");
  std::vector<double> y(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* mi = m.data() + i * m.cols();
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] += mi[j] * xi;
  }
  return y;
}

void add_scaled(Matrix& a, const Matrix& b, double scale) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw SchemaError("add_scaled: shape mismatch");
  double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < a.size(); ++i) pa[i] += scale * pb[i];
}

void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                   const char* what) {
  if (m.rows() != rows || m.cols() != cols)
    throw SchemaError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
}

}  // namespace pdfm
