// Small fixtures and independent oracles shared by the unit tests.
#pragma once

#include "hfd/bench.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>
#include <vector>

namespace hfd::test {

inline std::array<WallCondition, 6> insulated_walls() {
  std::array<WallCondition, 6> w;
  w.fill(WallCondition::insulated());
  return w;
}

/// Cold x = 0 wall, hot x = 1 wall, the rest insulated.
inline std::array<WallCondition, 6> cavity_walls(double cold = -0.5, double hot = 0.5) {
  auto w = insulated_walls();
  w[0] = WallCondition::dirichlet(cold);
  w[1] = WallCondition::dirichlet(hot);
  return w;
}

inline DomainSpec unit_square(std::vector<Obstacle> obstacles = {}, std::array<WallCondition, 6> walls = cavity_walls()) {
  return DomainSpec(2, Box{Vec(0, 0, 0), Vec(1, 1, 0)}, std::move(obstacles), walls);
}

inline NodeSet make_nodes(const DomainSpec& domain, RegionRule rule, double h, std::uint64_t seed = 1) {
  DiscretizationPlan p;
  p.rule = rule;
  p.h_r = h;
  p.h_s = h;
  p.rng_seed = seed;
  return hybrid_discretize(domain, p);
}

/// Nodes, tree, weights and operators for one node set.
struct Ops {
  NodeSet nodes;
  KdTree tree;
  WeightSet weights;
  OperatorSet ops;
};

inline Ops make_ops(NodeSet nodes, bool condition = false) {
  Ops o;
  o.nodes = std::move(nodes);
  o.tree = KdTree(o.nodes.positions(), o.nodes.dim());
  WeightOptions wo;
  wo.condition = condition;
  o.weights = compute_weights(o.nodes, o.tree, wo);
  o.ops = OperatorSet::build(o.nodes, o.weights);
  return o;
}

template <class F>
std::vector<double> sample(const NodeSet& nodes, F&& f) {
  std::vector<double> out(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = f(nodes.nodes()[i].position);
  return out;
}

/// All-pairs k nearest neighbours ordered by (distance, index).
inline std::vector<std::pair<double, Index>> brute_knn(const std::vector<Vec>& pts, const Vec& x, std::size_t k) {
  std::vector<std::pair<double, Index>> all;
  for (std::size_t i = 0; i < pts.size(); ++i) all.emplace_back((pts[i] - x).squaredNorm(), static_cast<Index>(i));
  std::sort(all.begin(), all.end());
  all.resize(std::min(k, all.size()));
  return all;
}

inline std::vector<Vec> random_cloud(std::size_t n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec> pts(n, Vec::Zero());
  for (auto& p : pts)
    for (int a = 0; a < dim; ++a) p[a] = u(rng);
  return pts;
}

/// Monomials of total degree <= 2, the same family the RBF-FD augmentation uses, in a fixed order
/// of its own: 1, x_a, x_a x_b (a <= b).
inline std::vector<std::array<int, 3>> quadratic_exponents(int dim) {
  std::vector<std::array<int, 3>> e{{0, 0, 0}};
  for (int a = 0; a < dim; ++a) {
    std::array<int, 3> m{0, 0, 0};
    m[static_cast<std::size_t>(a)] = 1;
    e.push_back(m);
  }
  for (int a = 0; a < dim; ++a)
    for (int b = a; b < dim; ++b) {
      std::array<int, 3> m{0, 0, 0};
      ++m[static_cast<std::size_t>(a)];
      ++m[static_cast<std::size_t>(b)];
      e.push_back(m);
    }
  return e;
}

inline double monomial(const std::array<int, 3>& e, const Vec& x) {
  double v = 1.0;
  for (int a = 0; a < 3; ++a) v *= std::pow(x[a], e[static_cast<std::size_t>(a)]);
  return v;
}

/// Derivative of a monomial at x: Laplacian (axis = -1) or d/dx_axis.
inline double monomial_derivative(const std::array<int, 3>& e, const Vec& x, int axis) {
  auto d1 = [&](int a) {
    const int k = e[static_cast<std::size_t>(a)];
    if (k == 0) return 0.0;
    std::array<int, 3> f = e;
    --f[static_cast<std::size_t>(a)];
    return k * monomial(f, x);
  };
  if (axis >= 0) return d1(axis);
  double lap = 0.0;
  for (int a = 0; a < 3; ++a) {
    const int k = e[static_cast<std::size_t>(a)];
    if (k < 2) continue;
    std::array<int, 3> f = e;
    f[static_cast<std::size_t>(a)] -= 2;
    lap += k * (k - 1) * monomial(f, x);
  }
  return lap;
}

/// Reference RBF-FD weights: the r^3 + quadratic saddle system assembled directly in unscaled
/// coordinates relative to the centre and solved in long double by Gaussian elimination with
/// partial pivoting. Shares no code with the library.
inline std::vector<double> reference_rbf_weights(const std::vector<Vec>& x, int dim, int axis) {
  using R = long double;
  const auto ex = quadratic_exponents(dim);
  const std::size_t n = x.size(), q = ex.size(), m = n + q;
  std::vector<std::vector<R>> a(m, std::vector<R>(m + 1, 0.0L));
  const Vec c = x[0];
  auto phi_op = [&](const Vec& d) -> R {
    const R r = static_cast<R>(d.head(dim).norm());
    if (axis < 0) return 3.0L * static_cast<R>(dim + 1) * r;  // lap r^3 = 3 (d + 1) r
    return 3.0L * r * static_cast<R>(-d[axis]);             // d/dx_c of |x_c - x_j|^3 with d = x_j - x_c
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const R r = static_cast<R>((x[i] - x[j]).head(dim).norm());
      a[i][j] = r * r * r;
    }
    for (std::size_t k = 0; k < q; ++k) {
      a[i][n + k] = static_cast<R>(monomial(ex[k], x[i] - c));
      a[n + k][i] = a[i][n + k];
    }
    a[i][m] = phi_op(x[i] - c);
  }
  for (std::size_t k = 0; k < q; ++k) a[n + k][m] = static_cast<R>(monomial_derivative(ex[k], Vec::Zero(), axis));
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < m; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    for (std::size_t r = col + 1; r < m; ++r) {
      const R f = a[r][col] / a[col][col];
      for (std::size_t k = col; k <= m; ++k) a[r][k] -= f * a[col][k];
    }
  }
  std::vector<R> sol(m);
  for (std::size_t r = m; r-- > 0;) {
    R s = a[r][m];
    for (std::size_t k = r + 1; k < m; ++k) s -= a[r][k] * sol[k];
    sol[r] = s / a[r][r];
  }
  return {sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(n)};
}

/// Recovers cos(pi x) cos(pi y) from its Laplacian; the error is gauge-relative and maximal over all nodes.
struct ManufacturedPressure {
  double error = 0.0;
  double residual = 0.0;
  double gauge_value = 0.0;
};

inline ManufacturedPressure manufactured_pressure(const Ops& o, const PoissonSolveSettings& s = {}) {
  using std::numbers::pi;
  PressureSolver solver(o.nodes, o.ops, s);
  const auto exact = sample(o.nodes, [](const Vec& x) { return std::cos(pi * x.x()) * std::cos(pi * x.y()); });
  std::vector<double> rhs(exact.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -2.0 * pi * pi * exact[i];
  const auto p = solver.solve(rhs);
  ManufacturedPressure m;
  m.residual = solver.relative_residual(p, rhs);
  m.gauge_value = p[static_cast<std::size_t>(solver.gauge())];
  const double ref = exact[static_cast<std::size_t>(solver.gauge())];
  for (std::size_t i = 0; i < p.size(); ++i) m.error = std::max(m.error, std::abs(p[i] - (exact[i] - ref)));
  return m;
}

/// Divergence-free part from the stream function sin^2(pi x) sin^2(pi y), plus grad cos(pi x) cos(pi y).
inline Velocity manufactured_vstar(const NodeSet& nodes, bool with_gradient) {
  using std::numbers::pi;
  Velocity v(2, std::vector<double>(nodes.size(), 0.0));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes.nodes()[i].is_boundary()) continue;
    const double x = nodes.nodes()[i].position.x(), y = nodes.nodes()[i].position.y();
    const double sx = std::sin(pi * x), sy = std::sin(pi * y), cx = std::cos(pi * x), cy = std::cos(pi * y);
    v[0][i] = 2.0 * pi * sx * sx * sy * cy;
    v[1][i] = -2.0 * pi * sy * sy * sx * cx;
    if (with_gradient) {
      v[0][i] += -pi * sx * cy;
      v[1][i] += -pi * cx * sy;
    }
  }
  return v;
}

/// dT/dt = lap T from sin(pi x) with cold = hot = 0 walls; returns the fitted decay rate.
inline double heat_decay_rate(RegionRule rule, double h, long steps = 100) {
  using std::numbers::pi;
  const auto o = make_ops(make_nodes(unit_square({}, cavity_walls(0.0, 0.0)), rule, h));
  NeumannTemperature neumann(o.nodes, o.ops);
  FieldState s = FieldState::zeros(o.nodes.dim(), o.nodes.size());
  s.temperature = sample(o.nodes, [](const Vec& x) { return std::sin(pi * x.x()); });
  neumann.apply(s.temperature);
  const double dt = TimeControls::stable_dt(o.nodes.min_h());
  // Amplitude from a least-squares fit against the initial profile over interior nodes.
  auto amplitude = [&](const std::vector<double>& T) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < T.size(); ++i) {
      if (o.nodes.nodes()[i].is_boundary()) continue;
      const double b = std::sin(pi * o.nodes.nodes()[i].position.x());
      num += T[i] * b;
      den += b * b;
    }
    return num / den;
  };
  const double a0 = amplitude(s.temperature);
  for (long k = 0; k < steps; ++k) s.temperature = temperature_step(o.nodes, s, o.ops, neumann, dt);
  return -std::log(amplitude(s.temperature) / a0) / (static_cast<double>(steps) * dt);
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace hfd::test
