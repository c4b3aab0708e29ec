#include "hfd/approx.hpp"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cmath>
#include <fstream>
#include <optional>
#include <vector>

namespace hfd {

namespace {

constexpr int kMaxSystem = 40;  // 30 PHS + 10 monomials in 3D
using LocalMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSystem, kMaxSystem>;
using LocalRhs = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxSystem, 4>;

std::optional<std::array<Index, 6>> axis_neighbors(const NodeSet& nodes, const KdTree& tree, Index i) {
  const Node& node = nodes[i];
  std::array<Index, 6> found{};
  for (int a = 0; a < nodes.dim(); ++a) {
    const double h = nodes.lattice_spacing()[a];
    for (int s = 0; s < 2; ++s) {
      Vec q = node.position;
      q[a] += s == 0 ? -h : h;
      const auto nb = tree.nearest_within(q, 1e-9 * h);
      if (!nb) return std::nullopt;
      found[static_cast<std::size_t>(2 * a + s)] = nb->index;
    }
  }
  return found;
}

// Dense grid of the nodes sitting on lattice points, so MON selection needs no tree queries. A
// hit is accepted under the same 1e-9 h distance test as axis_neighbors.
class LatticeIndex {
 public:
  explicit LatticeIndex(const NodeSet& nodes) : nodes_(nodes), h_(nodes.lattice_spacing()) {
    const auto first = std::find_if(nodes.nodes().begin(), nodes.nodes().end(),
                                    [](const Node& n) { return n.kind == NodeKind::Regular; });
    if (first == nodes.nodes().end()) return;
    const int dim = nodes.dim();
    for (int a = 0; a < dim; ++a)
      if (!(h_[a] > 0.0)) return;
    origin_ = first->position;
    std::vector<std::pair<std::array<long, 3>, Index>> on;
    on.reserve(nodes.size());
    lo_.fill(0);
    hi_.fill(0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Vec& x = nodes.nodes()[i].position;
      const auto k = key(x);
      if (!k || (x - point(*k)).norm() > 2e-9 * h_.head(dim).minCoeff()) continue;
      for (std::size_t a = 0; a < 3; ++a) {
        lo_[a] = std::min(lo_[a], (*k)[a]);
        hi_[a] = std::max(hi_[a], (*k)[a]);
      }
      on.emplace_back(*k, static_cast<Index>(i));
    }
    // A sparse scatter of lattice points over a huge range falls back to tree queries.
    std::size_t total = 1;
    for (std::size_t a = 0; a < 3; ++a) {
      stride_[a] = total;
      total *= static_cast<std::size_t>(hi_[a] - lo_[a] + 1);
      if (total > 64 * nodes.size() + 4096) return;
    }
    grid_.assign(total, -1);
    for (const auto& [k, i] : on) {
      Index& slot = grid_[offset(k)];
      if (slot < 0) slot = i;
    }
    enabled_ = true;
  }

  bool enabled() const { return enabled_; }

  std::optional<std::array<Index, 6>> axis_neighbors(Index i) const {
    const Vec& x = nodes_[i].position;
    const auto k = key(x);
    if (!k) return std::nullopt;
    std::array<Index, 6> found{};
    for (int a = 0; a < nodes_.dim(); ++a) {
      for (int s = 0; s < 2; ++s) {
        std::array<long, 3> kk = *k;
        kk[static_cast<std::size_t>(a)] += s == 0 ? -1 : 1;
        const Index j = find(kk);
        if (j < 0) return std::nullopt;
        Vec q = x;
        q[a] += s == 0 ? -h_[a] : h_[a];
        if ((nodes_[j].position - q).norm() > 1e-9 * h_[a]) return std::nullopt;
        found[static_cast<std::size_t>(2 * a + s)] = j;
      }
    }
    return found;
  }

 private:
  static constexpr long kOffset = 1L << 20;

  std::optional<std::array<long, 3>> key(const Vec& x) const {
    std::array<long, 3> k{0, 0, 0};
    for (int a = 0; a < nodes_.dim(); ++a) {
      const double t = (x[a] - origin_[a]) / h_[a];
      if (!(std::abs(t) < static_cast<double>(kOffset - 2))) return std::nullopt;
      k[static_cast<std::size_t>(a)] = std::lround(t);
    }
    return k;
  }
  Vec point(const std::array<long, 3>& k) const {
    Vec p = origin_;
    for (int a = 0; a < nodes_.dim(); ++a) p[a] += static_cast<double>(k[static_cast<std::size_t>(a)]) * h_[a];
    return p;
  }
  std::size_t offset(const std::array<long, 3>& k) const {
    std::size_t o = 0;
    for (std::size_t a = 0; a < 3; ++a) o += static_cast<std::size_t>(k[a] - lo_[a]) * stride_[a];
    return o;
  }
  Index find(const std::array<long, 3>& k) const {
    for (std::size_t a = 0; a < 3; ++a)
      if (k[a] < lo_[a] || k[a] > hi_[a]) return -1;
    return grid_[offset(k)];
  }

  const NodeSet& nodes_;
  Vec h_;
  Vec origin_ = Vec::Zero();
  bool enabled_ = false;
  std::array<long, 3> lo_{}, hi_{};
  std::array<std::size_t, 3> stride_{};
  std::vector<Index> grid_;
};

// Monomials of total degree <= 2: 1, y_a, y_a * y_b (a <= b).
void monomial_row(const Vec& y, int dim, double* out) {
  int k = 0;
  out[k++] = 1.0;
  for (int a = 0; a < dim; ++a) out[k++] = y[a];
  for (int a = 0; a < dim; ++a)
    for (int b = a; b < dim; ++b) out[k++] = y[a] * y[b];
}

// L applied to the degree <= 2 monomials, evaluated at the origin.
void monomial_operator(const OperatorKind& op, int dim, double* out) {
  const int q = monomial_count(dim);
  for (int k = 0; k < q; ++k) out[k] = 0.0;
  switch (op.type) {
    case OperatorKind::Type::Laplacian: {
      int k = 1 + dim;
      for (int a = 0; a < dim; ++a)
        for (int b = a; b < dim; ++b, ++k)
          if (a == b) out[k] = 2.0;
      break;
    }
    case OperatorKind::Type::Partial: out[1 + op.axis] = 1.0; break;
    case OperatorKind::Type::NormalDerivative:
      for (int a = 0; a < dim; ++a) out[1 + a] = op.normal[a];
      break;
  }
}

double operator_scale(const OperatorKind& op, double s) {
  return op.type == OperatorKind::Type::Laplacian ? 1.0 / (s * s) : 1.0 / s;
}

}  // namespace

const char* to_string(Method m) { return m == Method::MON ? "MON" : "RBFFD"; }

int monomial_count(int dim) { return dim == 2 ? 6 : 10; }

int stencil_size(Method m, int dim) {
  if (m == Method::MON) return 2 * dim + 1;
  return dim == 2 ? 12 : 30;
}

Method select_method(const NodeSet& nodes, const KdTree& tree, Index i) {
  if (nodes[i].kind != NodeKind::Regular) return Method::RBFFD;
  return axis_neighbors(nodes, tree, i) ? Method::MON : Method::RBFFD;
}

StencilSpec find_stencil(const KdTree& tree, Index center, int n) {
  if (n < 1 || static_cast<std::size_t>(n) > tree.size())
    throw std::invalid_argument("stencil of " + std::to_string(n) + " nodes requested from a set of " +
                                std::to_string(tree.size()));
  StencilSpec s;
  s.center = center;
  s.neighbors.reserve(static_cast<std::size_t>(n));
  for (const auto& nb : tree.knn(tree.point(center), n)) s.neighbors.push_back(nb.index);
  if (s.neighbors.front() != center) {
    // Coincident points: keep the center in front.
    std::erase(s.neighbors, center);
    s.neighbors.insert(s.neighbors.begin(), center);
    if (s.neighbors.size() > static_cast<std::size_t>(n)) s.neighbors.pop_back();
  }
  return s;
}

StencilSpec find_boundary_stencil(const NodeSet& nodes, const KdTree& tree, Index center, int n) {
  const NodeCounts c = nodes.counts();
  const std::size_t interior = c.regular + c.scattered;
  if (n < 2 || interior < static_cast<std::size_t>(n - 1))
    throw std::invalid_argument("boundary stencil of " + std::to_string(n) + " nodes needs more interior nodes");
  StencilSpec s;
  s.center = center;
  for (std::size_t k = static_cast<std::size_t>(2 * n);; k *= 2) {
    k = std::min(k, tree.size());
    s.neighbors.assign(1, center);
    for (const auto& nb : tree.knn(tree.point(center), static_cast<int>(k))) {
      if (nodes[nb.index].is_boundary()) continue;
      s.neighbors.push_back(nb.index);
      if (s.neighbors.size() == static_cast<std::size_t>(n)) return s;
    }
    if (k == tree.size()) break;
  }
  throw std::logic_error("boundary stencil search exhausted the node set");
}

double condition_number(const Eigen::Ref<const Eigen::MatrixXd>& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw std::invalid_argument("condition number needs a square matrix");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin == 0.0) return kInf;
  return sv(0) / smin;
}

namespace {

// MON systems are 5x5 or 7x7; fixed-size matrices keep them off the heap.
template <int N>
WeightRow mon_weights_fixed(const StencilSpec& stencil, std::span<const Vec> positions, double h,
                            std::span<const OperatorKind> ops, bool with_condition) {
  constexpr int dim = (N - 1) / 2;
  using Mat = Eigen::Matrix<double, N, N>;
  using Col = Eigen::Matrix<double, N, 1>;
  const Vec& xc = positions[static_cast<std::size_t>(stencil.center)];

  Mat m;
  for (int i = 0; i < N; ++i) {
    const Vec y = (positions[static_cast<std::size_t>(stencil.neighbors[static_cast<std::size_t>(i)])] - xc) / h;
    m(0, i) = 1.0;
    for (int a = 0; a < dim; ++a) {
      m(1 + a, i) = y[a];
      m(1 + dim + a, i) = y[a] * y[a];
    }
  }
  WeightRow row;
  row.method = Method::MON;
  row.neighbors = stencil.neighbors;
  if (with_condition) row.kappa = condition_number(m);
  // Scaled lattice systems are well conditioned, so partial pivoting suffices; a near-zero
  // pivot ratio still flags duplicate or degenerate nodes.
  Eigen::PartialPivLU<Mat> lu(m);
  const auto& u = lu.matrixLU();
  const double umax = u.diagonal().cwiseAbs().maxCoeff();
  if (!(u.diagonal().cwiseAbs().minCoeff() > 1e-12 * umax)) {
    const double kappa = with_condition ? row.kappa : condition_number(m);
    throw SingularSystemError("singular MON system at node " + std::to_string(stencil.center), kappa);
  }
  row.weights.resize(ops.size());
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const OperatorKind& op = ops[k];
    Col rhs = Col::Zero();
    switch (op.type) {
      case OperatorKind::Type::Laplacian:
        for (int a = 0; a < dim; ++a) rhs(1 + dim + a) = 2.0;
        break;
      case OperatorKind::Type::Partial: rhs(1 + op.axis) = 1.0; break;
      case OperatorKind::Type::NormalDerivative:
        for (int a = 0; a < dim; ++a) rhs(1 + a) = op.normal[a];
        break;
    }
    const Col w = lu.solve(rhs);
    const double scale = operator_scale(op, h);
    auto& out = row.weights[k];
    out.resize(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) out[static_cast<std::size_t>(i)] = w(i) * scale;
  }
  return row;
}

}  // namespace

WeightRow mon_weights(const StencilSpec& stencil, std::span<const Vec> positions, int dim, double h,
                      std::span<const OperatorKind> ops, bool with_condition) {
  const int n = static_cast<int>(stencil.neighbors.size());
  if (n != 2 * dim + 1) throw std::invalid_argument("MON needs a stencil of 2d+1 nodes");
  return dim == 2 ? mon_weights_fixed<5>(stencil, positions, h, ops, with_condition)
                  : mon_weights_fixed<7>(stencil, positions, h, ops, with_condition);
}

WeightRow rbf_fd_weights(const StencilSpec& stencil, std::span<const Vec> positions, int dim,
                         std::span<const OperatorKind> ops, bool with_condition) {
  const int n = static_cast<int>(stencil.neighbors.size());
  const int q = monomial_count(dim);
  if (n < q || n + q > kMaxSystem) throw std::invalid_argument("unsupported RBF-FD stencil size");
  const Vec& xc = positions[static_cast<std::size_t>(stencil.center)];

  std::array<Vec, kMaxSystem> y;
  double radius = 0.0;
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = positions[static_cast<std::size_t>(stencil.neighbors[static_cast<std::size_t>(i)])] - xc;
    radius = std::max(radius, y[static_cast<std::size_t>(i)].norm());
  }
  if (!(radius > 0.0)) throw SingularSystemError("RBF-FD stencil collapsed to a point", kInf);
  for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] /= radius;

  const int size = n + q;
  LocalMatrix m = LocalMatrix::Zero(size, size);
  std::array<double, 10> mono{};
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (int j = i + 1; j < n; ++j) {
      const double r = (y[ui] - y[static_cast<std::size_t>(j)]).norm();
      m(i, j) = m(j, i) = r * r * r;
    }
    monomial_row(y[ui], dim, mono.data());
    for (int k = 0; k < q; ++k) m(i, n + k) = m(n + k, i) = mono[static_cast<std::size_t>(k)];
  }

  WeightRow row;
  row.method = Method::RBFFD;
  row.neighbors = stencil.neighbors;
  if (with_condition) row.kappa = condition_number(m);
  Eigen::FullPivLU<LocalMatrix> lu(m);
  if (!lu.isInvertible()) {
    const double kappa = with_condition ? row.kappa : condition_number(m);
    throw SingularSystemError("singular RBF-FD system at node " + std::to_string(stencil.center), kappa);
  }
  row.weights.resize(ops.size());
  // Right-hand sides go through the factorization in blocks of LocalRhs's column capacity.
  for (std::size_t first = 0; first < ops.size(); first += LocalRhs::MaxColsAtCompileTime) {
    const std::size_t count = std::min<std::size_t>(LocalRhs::MaxColsAtCompileTime, ops.size() - first);
    LocalRhs rhs = LocalRhs::Zero(size, static_cast<int>(count));
    for (std::size_t k = 0; k < count; ++k) {
      const OperatorKind& op = ops[first + k];
      const int col = static_cast<int>(k);
      for (int i = 0; i < n; ++i) {
        const Vec& yi = y[static_cast<std::size_t>(i)];
        const double r = yi.norm();
        switch (op.type) {
          case OperatorKind::Type::Laplacian: rhs(i, col) = 3.0 * (dim + 1) * r; break;
          case OperatorKind::Type::Partial: rhs(i, col) = -3.0 * r * yi[op.axis]; break;
          case OperatorKind::Type::NormalDerivative: {
            double g = 0.0;
            for (int a = 0; a < dim; ++a) g += op.normal[a] * yi[a];
            rhs(i, col) = -3.0 * r * g;
            break;
          }
        }
      }
      monomial_operator(op, dim, mono.data());
      for (int j = 0; j < q; ++j) rhs(n + j, col) = mono[static_cast<std::size_t>(j)];
    }
    const LocalRhs sol = lu.solve(rhs);
    for (std::size_t k = 0; k < count; ++k) {
      const double scale = operator_scale(ops[first + k], radius);
      auto& out = row.weights[first + k];
      out.resize(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = sol(i, static_cast<int>(k)) * scale;
    }
  }
  return row;
}

WeightSet compute_weights(const NodeSet& nodes, const KdTree& tree, const WeightOptions& options) {
  const int dim = nodes.dim();
  std::vector<OperatorKind> interior_ops{OperatorKind::laplacian()};
  for (int a = 0; a < dim; ++a) interior_ops.push_back(OperatorKind::partial(a));
  const int rbf_n = stencil_size(Method::RBFFD, dim);

  const LatticeIndex lattice(nodes);
  WeightSet set;
  set.dim = dim;
  set.rows.resize(nodes.size());
  for (std::size_t idx = 0; idx < nodes.size(); ++idx) {
    const Index i = static_cast<Index>(idx);
    const Node& node = nodes[i];
    if (node.is_boundary()) {
      const OperatorKind normal = OperatorKind::normal_derivative(node.normal);
      set.rows[idx] = rbf_fd_weights(find_boundary_stencil(nodes, tree, i, rbf_n), nodes.positions(), dim,
                                     std::span<const OperatorKind>(&normal, 1), options.condition);
      continue;
    }
    if (node.kind == NodeKind::Regular) {
      if (const auto axis = lattice.enabled() ? lattice.axis_neighbors(i) : axis_neighbors(nodes, tree, i)) {
        StencilSpec s;
        s.center = i;
        s.method = Method::MON;
        s.neighbors.push_back(i);
        for (int k = 0; k < 2 * dim; ++k) s.neighbors.push_back((*axis)[static_cast<std::size_t>(k)]);
        set.rows[idx] = mon_weights(s, nodes.positions(), dim, node.h, interior_ops, options.condition);
        continue;
      }
    }
    set.rows[idx] = rbf_fd_weights(find_stencil(tree, i, rbf_n), nodes.positions(), dim, interior_ops, options.condition);
  }
  return set;
}

void write_weights_csv(const NodeSet& nodes, const WeightSet& weights, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(12);
  const bool three = nodes.dim() == 3;
  out << (three ? "x,y,z" : "x,y") << ",kind,method,stencil_size,kappa\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes.nodes()[i];
    const WeightRow& row = weights.rows[i];
    out << n.position.x() << "," << n.position.y();
    if (three) out << "," << n.position.z();
    out << "," << to_string(n.kind) << "," << to_string(row.method) << "," << row.neighbors.size() << "," << row.kappa
        << "\n";
  }
}

}  // namespace hfd
