#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "binilasso/errors.hpp"

namespace binilasso {

/// One design column, compressed: only rows with nonzero entries are stored.
/// An empty `values` vector means every stored entry is exactly 1 (the
/// indicator-column case); coordinate descent exploits this.
struct SparseColumn {
  std::vector<std::int32_t> rows;  // original row ids, strictly increasing
  std::vector<double> values;      // empty => implicit 1.0

  bool binary() const { return values.empty(); }
  std::size_t nnz() const { return rows.size(); }
  double value_at(std::size_t k) const { return values.empty() ? 1.0 : values[k]; }
};

/// Column-compressed design matrix. Coordinate descent iterates columns, so
/// column-major access is the only access path provided.
struct ColumnSet {
  int n_rows = 0;
  std::vector<SparseColumn> columns;

  int cols() const { return static_cast<int>(columns.size()); }

  static ColumnSet from_dense(const Eigen::MatrixXd& X) {
    ColumnSet out;
    out.n_rows = static_cast<int>(X.rows());
    out.columns.resize(X.cols());
    for (int j = 0; j < X.cols(); ++j) {
      auto& col = out.columns[j];
      bool all_ones = true;
      for (int i = 0; i < X.rows(); ++i) {
        const double v = X(i, j);
        if (v != 0.0) {
          col.rows.push_back(i);
          col.values.push_back(v);
          if (v != 1.0) all_ones = false;
        }
      }
      if (all_ones) col.values.clear();
    }
    return out;
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(n_rows, cols());
    for (int j = 0; j < cols(); ++j) {
      const auto& col = columns[j];
      for (std::size_t k = 0; k < col.nnz(); ++k) X(col.rows[k], j) = col.value_at(k);
    }
    return X;
  }

  /// X * beta in original row order.
  std::vector<double> multiply(const std::vector<double>& beta) const {
    if (static_cast<int>(beta.size()) != cols())
      throw DimensionMismatch("beta length != number of columns");
    std::vector<double> f(n_rows, 0.0);
    for (int j = 0; j < cols(); ++j) {
      const double b = beta[j];
      if (b == 0.0) continue;
      const auto& col = columns[j];
      for (std::size_t k = 0; k < col.nnz(); ++k) f[col.rows[k]] += b * col.value_at(k);
    }
    return f;
  }
};

}  // namespace binilasso
