#pragma once

#include <cstdint>
#include <vector>

#include "gatecap/tensor.hpp"

namespace gatecap {

// Compressed-row matrix. Column indices are strictly increasing within each
// row and explicit zeros are never stored.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint64_t> row_ptr;  // rows + 1 offsets
  std::vector<std::uint32_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  std::size_t total() const { return rows * cols; }
  double sparsity() const {
    return total() == 0 ? 0.0 : 1.0 - static_cast<double>(nnz()) / static_cast<double>(total());
  }
};

// Lossless for nonzeros: from_sparse(to_sparse(x)) == x bit-exactly.
SparseMatrix to_sparse(const Tensor& dense);
Tensor from_sparse(const SparseMatrix& m);

// y = A . x; x length must equal A.cols.
std::vector<double> spmv(const SparseMatrix& a, const std::vector<double>& x);
void spmv_into(const SparseMatrix& a, const double* x, double* y);
// y[0..len) = rows [start, start+len) of A times x.
void spmv_row_range(const SparseMatrix& a, std::size_t start, std::size_t len, const double* x,
                    double* y);

}  // namespace gatecap
