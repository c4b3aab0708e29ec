#include "hfd/operators.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace hfd {

SparseOperator::SparseOperator(std::size_t n, std::vector<Index> row_ptr, std::vector<Index> cols, std::vector<double> vals)
    : row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), vals_(std::move(vals)) {
  if (row_ptr_.size() != n + 1 || cols_.size() != vals_.size() ||
      static_cast<std::size_t>(row_ptr_.back()) != cols_.size())
    throw std::invalid_argument("inconsistent row-compressed layout");
}

SparseOperator SparseOperator::identity(std::size_t n) {
  std::vector<Index> ptr(n + 1);
  std::iota(ptr.begin(), ptr.end(), Index{0});
  std::vector<Index> cols(n);
  std::iota(cols.begin(), cols.end(), Index{0});
  return SparseOperator(n, std::move(ptr), std::move(cols), std::vector<double>(n, 1.0));
}

std::span<const Index> SparseOperator::row_cols(std::size_t i) const {
  return {cols_.data() + row_ptr_[i], row_size(i)};
}

std::span<const double> SparseOperator::row_vals(std::size_t i) const {
  return {vals_.data() + row_ptr_[i], row_size(i)};
}

double SparseOperator::apply_row(std::size_t i, std::span<const double> field) const {
  double s = 0.0;
  for (Index k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
    s += vals_[static_cast<std::size_t>(k)] * field[static_cast<std::size_t>(cols_[static_cast<std::size_t>(k)])];
  return s;
}

void SparseOperator::apply(std::span<const double> field, std::span<double> out) const {
  const std::size_t n = rows();
  if (field.size() != n || out.size() != n)
    throw std::invalid_argument("operator of size " + std::to_string(n) + " applied to field of size " +
                                std::to_string(field.size()));
  const Index* ptr = row_ptr_.data();
  const Index* col = cols_.data();
  const double* val = vals_.data();
  const double* f = field.data();
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index k = ptr[i]; k < ptr[i + 1]; ++k) s += val[k] * f[col[k]];
    out[i] = s;
  }
}

std::vector<double> SparseOperator::apply(std::span<const double> field) const {
  std::vector<double> out(rows());
  apply(field, out);
  return out;
}

SparseOperator assemble(const NodeSet& nodes, const WeightSet& weights, std::size_t op, bool boundary_rows) {
  const std::size_t n = nodes.size();
  if (weights.rows.size() != n) throw std::invalid_argument("weight set does not match the node set");
  std::vector<Index> ptr(n + 1, 0);
  std::vector<Index> cols;
  std::vector<double> vals;
  std::vector<std::pair<Index, double>> entries;
  for (std::size_t i = 0; i < n; ++i) {
    if (nodes.nodes()[i].is_boundary() == boundary_rows) {
      const WeightRow& row = weights.rows[i];
      if (row.weights.size() <= op || row.weights[op].size() != row.neighbors.size() || row.neighbors.empty())
        throw std::invalid_argument("missing weight row for node " + std::to_string(i));
      entries.clear();
      for (std::size_t k = 0; k < row.neighbors.size(); ++k) entries.emplace_back(row.neighbors[k], row.weights[op][k]);
      std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [c, w] : entries) {
        cols.push_back(c);
        vals.push_back(w);
      }
    }
    ptr[i + 1] = static_cast<Index>(cols.size());
  }
  return SparseOperator(n, std::move(ptr), std::move(cols), std::move(vals));
}

OperatorSet OperatorSet::build(const NodeSet& nodes, const WeightSet& weights) {
  OperatorSet ops;
  ops.laplacian = assemble(nodes, weights, WeightSet::kLaplacian, false);
  for (int a = 0; a < nodes.dim(); ++a) ops.partial.push_back(assemble(nodes, weights, WeightSet::partial(a), false));
  ops.normal = assemble(nodes, weights, WeightSet::kNormal, true);
  return ops;
}

std::vector<double> divergence(std::span<const SparseOperator> partial, std::span<const std::vector<double>> velocity) {
  if (partial.size() != velocity.size()) throw std::invalid_argument("divergence: dimension mismatch");
  std::vector<double> out(partial.empty() ? 0 : partial[0].rows(), 0.0);
  std::vector<double> tmp(out.size());
  for (std::size_t a = 0; a < partial.size(); ++a) {
    partial[a].apply(velocity[a], tmp);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += tmp[i];
  }
  return out;
}

}  // namespace hfd
