// Serial textbook kernels. These are the oracles for the parallel kernels
// and the baseline for the benchmark target; keep them naive.

#include "krd/error.hpp"
#include "krd/kernels.hpp"

namespace krd::reference {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  DenseMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  DenseMatrix out(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.cols(); ++k)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.rows(); ++i) s += a(i, k) * b(i, j);
      out(k, j) = s;
    }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  DenseMatrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < b.rows(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * b(k, j);
      out(i, k) = s;
    }
  return out;
}

DenseMatrix densify(const CsrMatrix& a) {
  DenseMatrix d(a.rows, a.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t e = a.row_offsets[i]; e < a.row_offsets[i + 1]; ++e)
      d(i, a.col_indices[e]) += a.values[e];
  return d;
}

DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& x) {
  if (a.cols != x.rows()) throw ShapeError("spmm: adjacency columns differ from feature rows");
  return reference::matmul(densify(a), x);
}

}  // namespace krd::reference
