#include "krd/kernels.hpp"

#include <algorithm>

#include "krd/error.hpp"

namespace krd {
namespace {

constexpr std::size_t kColumnBlock = 64;

}  // namespace

double CsrMatrix::at(std::size_t r, std::size_t c) const noexcept {
  const auto first = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[r]);
  const auto last = col_indices.begin() + static_cast<std::ptrdiff_t>(row_offsets[r + 1]);
  const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
  if (it == last || *it != c) return 0.0;
  return values[static_cast<std::size_t>(it - col_indices.begin())];
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  const std::size_t n = a.rows(), inner = a.cols(), m = b.cols();
  DenseMatrix out(n, m);
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  double* op = out.values().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* orow = op + i * m;
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = ap[i * inner + k];
      if (aik == 0.0) continue;
      const double* brow = bp + k * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("matmul_tn: row counts differ");
  const std::size_t n = a.rows(), p = a.cols(), m = b.cols();
  DenseMatrix out(p, m);
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  double* op = out.values().data();
  const auto blocks = static_cast<std::ptrdiff_t>((p + kColumnBlock - 1) / kColumnBlock);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t blk = 0; blk < blocks; ++blk) {
    const std::size_t k0 = static_cast<std::size_t>(blk) * kColumnBlock;
    const std::size_t k1 = std::min(p, k0 + kColumnBlock);
    for (std::size_t i = 0; i < n; ++i) {
      const double* brow = bp + i * m;
      for (std::size_t k = k0; k < k1; ++k) {
        const double aik = ap[i * p + k];
        if (aik == 0.0) continue;
        double* orow = op + k * m;
        for (std::size_t j = 0; j < m; ++j) orow[j] += aik * brow[j];
      }
    }
  }
  return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("matmul_nt: column counts differ");
  const std::size_t n = a.rows(), q = a.cols(), p = b.rows();
  DenseMatrix out(n, p);
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  double* op = out.values().data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(n); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* arow = ap + i * q;
    for (std::size_t k = 0; k < p; ++k) {
      const double* brow = bp + k * q;
      double s = 0.0;
      for (std::size_t j = 0; j < q; ++j) s += arow[j] * brow[j];
      op[i * p + k] = s;
    }
  }
  return out;
}

DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& x) {
  if (a.cols != x.rows()) throw ShapeError("spmm: adjacency columns differ from feature rows");
  const std::size_t m = x.cols();
  DenseMatrix out(a.rows, m);
  const double* xp = x.values().data();
  double* op = out.values().data();
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(a.rows); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* orow = op + i * m;
    for (std::size_t e = a.row_offsets[i]; e < a.row_offsets[i + 1]; ++e) {
      const double w = a.values[e];
      const double* xrow = xp + static_cast<std::size_t>(a.col_indices[e]) * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += w * xrow[j];
    }
  }
  return out;
}

}  // namespace krd
