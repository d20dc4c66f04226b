#include "gatecap/csr.hpp"

#include <stdexcept>

namespace gatecap {

SparseMatrix to_sparse(const Tensor& dense) {
  if (dense.rank() != 2) {
    throw std::invalid_argument("to_sparse expects rank 2, got " + dense.shape_str());
  }
  SparseMatrix m;
  m.rows = dense.dim(0);
  m.cols = dense.dim(1);
  m.row_ptr.assign(m.rows + 1, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      double v = dense.at(r, c);
      if (v != 0.0) {
        m.col_idx.push_back(static_cast<std::uint32_t>(c));
        m.values.push_back(v);
      }
    }
    m.row_ptr[r + 1] = m.values.size();
  }
  return m;
}

Tensor from_sparse(const SparseMatrix& m) {
  Tensor t({m.rows, m.cols});
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::uint64_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      t.at(r, m.col_idx[k]) = m.values[k];
    }
  }
  return t;
}

std::vector<double> spmv(const SparseMatrix& a, const std::vector<double>& x) {
  if (x.size() != a.cols) {
    throw std::invalid_argument("spmv length mismatch: vector " + std::to_string(x.size()) +
                                " vs matrix cols " + std::to_string(a.cols));
  }
  std::vector<double> y(a.rows, 0.0);
  spmv_into(a, x.data(), y.data());
  return y;
}

void spmv_into(const SparseMatrix& a, const double* x, double* y) {
  spmv_row_range(a, 0, a.rows, x, y);
}

void spmv_row_range(const SparseMatrix& a, std::size_t start, std::size_t len, const double* x,
                    double* y) {
  for (std::size_t r = 0; r < len; ++r) {
    double acc = 0.0;
    for (std::uint64_t k = a.row_ptr[start + r]; k < a.row_ptr[start + r + 1]; ++k) {
      acc += a.values[k] * x[a.col_idx[k]];
    }
    y[r] = acc;
  }
}

}  // namespace gatecap
