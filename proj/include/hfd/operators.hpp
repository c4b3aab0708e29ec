#pragma once

#include "hfd/approx.hpp"
#include "hfd/nodegen.hpp"

#include <span>
#include <vector>

namespace hfd {

/// Row-compressed N x N operator with row-sorted column indices.
class SparseOperator {
 public:
  SparseOperator() = default;
  SparseOperator(std::size_t n, std::vector<Index> row_ptr, std::vector<Index> cols, std::vector<double> vals);
  static SparseOperator identity(std::size_t n);

  std::size_t rows() const { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
  std::size_t nonzeros() const { return vals_.size(); }
  std::size_t row_size(std::size_t i) const {
    return static_cast<std::size_t>(row_ptr_[i + 1] - row_ptr_[i]);
  }
  std::span<const Index> row_cols(std::size_t i) const;
  std::span<const double> row_vals(std::size_t i) const;

  /// out_i = sum_j w_ij field_j. Throws on length mismatch.
  void apply(std::span<const double> field, std::span<double> out) const;
  std::vector<double> apply(std::span<const double> field) const;
  /// Value of row i applied to field.
  double apply_row(std::size_t i, std::span<const double> field) const;

 private:
  std::vector<Index> row_ptr_;
  std::vector<Index> cols_;
  std::vector<double> vals_;
};

/// Scatters weight slot `op` of every row selected by `boundary_rows` (true: boundary nodes,
/// false: interior nodes) into a global operator. Unselected rows stay empty.
SparseOperator assemble(const NodeSet& nodes, const WeightSet& weights, std::size_t op, bool boundary_rows);

/// Global operators for the flow solver.
struct OperatorSet {
  SparseOperator laplacian;
  std::vector<SparseOperator> partial;  ///< one per axis
  SparseOperator normal;                ///< boundary rows only

  static OperatorSet build(const NodeSet& nodes, const WeightSet& weights);
  int dim() const { return static_cast<int>(partial.size()); }
};

/// Sum of axis derivatives of the velocity components.
std::vector<double> divergence(std::span<const SparseOperator> partial, std::span<const std::vector<double>> velocity);

}  // namespace hfd
