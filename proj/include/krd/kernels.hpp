#pragma once

// Dense and sparse products used by every forward and backward pass.
//
// The default kernels are OpenMP row-parallel. Each output element is
// accumulated by exactly one thread in ascending inner-index order, so
// results are bit-identical to the serial kernels in krd::reference for any
// thread count.

#include "krd/matrix.hpp"
#include "krd/sparse.hpp"

namespace krd {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);     // a * b
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);  // a^T * b
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);  // a * b^T
DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& x);         // a * x

namespace reference {

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix spmm(const CsrMatrix& a, const DenseMatrix& x);
DenseMatrix densify(const CsrMatrix& a);

}  // namespace reference
}  // namespace krd
