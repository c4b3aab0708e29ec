#include "hfd/nodegen.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numbers>
#include <random>
#include <unordered_set>

namespace hfd {

NodeSet::NodeSet(int dim, std::vector<Node> nodes, Vec lattice_spacing)
    : dim_(dim), nodes_(std::move(nodes)), lattice_spacing_(lattice_spacing) {
  positions_.reserve(nodes_.size());
  for (const Node& n : nodes_) {
    if (!(n.h > 0.0)) throw ConfigError("node spacing must be positive");
    positions_.push_back(n.position);
    switch (n.kind) {
      case NodeKind::Regular: ++counts_.regular; break;
      case NodeKind::Scattered: ++counts_.scattered; break;
      case NodeKind::Boundary: ++counts_.boundary; break;
    }
  }
}

double NodeSet::min_h() const {
  double h = kInf;
  for (const Node& n : nodes_) h = std::min(h, n.h);
  return h;
}

SpacingFunction::SpacingFunction(double h_r, double h_s, double delta_h, DistanceQuery irregular_distance)
    : h_r_(h_r), h_s_(h_s), delta_h_(delta_h), distance_(std::move(irregular_distance)) {
  if (!(h_r > 0.0) || !(h_s > 0.0)) throw ConfigError("spacings must be positive");
  if (h_s > h_r) throw ConfigError("h_s must not exceed h_r");
  if (delta_h < 0.0) throw ConfigError("delta_h must be non-negative");
}

SpacingFunction SpacingFunction::constant(double h) {
  return SpacingFunction(h, h, 0.0, [](const Vec&, double) { return kInf; });
}

double SpacingFunction::operator()(const Vec& x) const {
  if (h_s_ == h_r_) return h_r_;
  const double w = width();
  if (w <= 0.0) return h_r_;
  const double d = distance_(x, w);
  const double t = std::clamp(d / w, 0.0, 1.0);
  return h_s_ + (h_r_ - h_s_) * t;
}

RegularLattice regular_fill(const DomainSpec& spec, double h_r) {
  if (!(h_r > 0.0)) throw ConfigError("h_r must be positive");
  const auto counts = lattice_counts(spec, h_r);
  const int dim = spec.dim();
  RegularLattice out;
  double h = 0.0;
  for (int a = 0; a < dim; ++a) {
    out.spacing[a] = spec.extent()[a] / counts[static_cast<std::size_t>(a)];
    h = std::max(h, out.spacing[a]);
  }
  const int kmax = dim == 3 ? counts[2] - 1 : 0;
  const int kmin = dim == 3 ? 1 : 0;
  for (int k = kmin; k <= kmax; ++k) {
    for (int j = 1; j < counts[1]; ++j) {
      for (int i = 1; i < counts[0]; ++i) {
        Vec p = spec.box().lower;
        p.x() += i * out.spacing.x();
        p.y() += j * out.spacing.y();
        if (dim == 3) p.z() += k * out.spacing.z();
        if (spec.signed_distance(p) >= -0.5 * h) continue;
        out.nodes.push_back({p, h, NodeKind::Regular, NodeRole::interior(), Vec::Zero(), {}});
      }
    }
  }
  return out;
}

std::vector<Node> carve_transition(std::vector<Node> nodes, const DomainSpec& spec, double delta_h, double h_r) {
  const double width = delta_h * h_r;
  if (width <= 0.0) return nodes;
  std::erase_if(nodes, [&](const Node& n) {
    return n.kind == NodeKind::Regular && spec.obstacle_distance(n.position, width) < width;
  });
  return nodes;
}

namespace {

// Uniform bucket grid with per-cell linked lists; supports insertion during the fill.
class BucketGrid {
 public:
  BucketGrid(const Box& box, int dim, double cell) : dim_(dim), lower_(box.lower), cell_(cell) {
    for (int a = 0; a < 3; ++a) {
      dims_[static_cast<std::size_t>(a)] =
          a < dim ? std::max(1, static_cast<int>(std::ceil((box.upper[a] - box.lower[a]) / cell)) + 1) : 1;
    }
    head_.assign(static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2], -1);
  }

  void insert(const Vec& x, Index id) {
    const std::size_t c = flat(coords(x));
    if (next_.size() <= static_cast<std::size_t>(id)) next_.resize(static_cast<std::size_t>(id) + 1, -1);
    next_[static_cast<std::size_t>(id)] = head_[c];
    head_[c] = id;
  }

  template <class F>
  bool any_within(const Vec& x, double radius, F&& visit) const {
    const auto c = coords(x);
    const int reach = static_cast<int>(std::ceil(radius / cell_));
    std::array<int, 3> lo{}, hi{};
    for (int a = 0; a < 3; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      lo[ua] = a < dim_ ? std::max(0, c[ua] - reach) : 0;
      hi[ua] = a < dim_ ? std::min(dims_[ua] - 1, c[ua] + reach) : 0;
    }
    for (int k = lo[2]; k <= hi[2]; ++k)
      for (int j = lo[1]; j <= hi[1]; ++j)
        for (int i = lo[0]; i <= hi[0]; ++i)
          for (Index id = head_[flat({i, j, k})]; id >= 0; id = next_[static_cast<std::size_t>(id)])
            if (visit(id)) return true;
    return false;
  }

 private:
  std::array<int, 3> coords(const Vec& x) const {
    std::array<int, 3> c{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      c[ua] = std::clamp(static_cast<int>(std::floor((x[a] - lower_[a]) / cell_)), 0, dims_[ua] - 1);
    }
    return c;
  }
  std::size_t flat(const std::array<int, 3>& c) const {
    return (static_cast<std::size_t>(c[2]) * dims_[1] + c[1]) * dims_[0] + c[0];
  }

  int dim_;
  Vec lower_;
  double cell_;
  std::array<int, 3> dims_{};
  std::vector<Index> head_;
  std::vector<Index> next_;
};

// Random rotation of the coordinate frame (uniform quaternion in 3D, angle in 2D).
Eigen::Matrix3d random_frame(int dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (dim == 2) {
    const double t = 2.0 * std::numbers::pi * uni(rng);
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    r(0, 0) = std::cos(t);
    r(0, 1) = -std::sin(t);
    r(1, 0) = std::sin(t);
    r(1, 1) = std::cos(t);
    return r;
  }
  const double u1 = uni(rng), u2 = uni(rng), u3 = uni(rng);
  const Eigen::Quaterniond q(std::sqrt(u1) * std::cos(2.0 * std::numbers::pi * u3),
                             std::sqrt(1.0 - u1) * std::sin(2.0 * std::numbers::pi * u2),
                             std::sqrt(1.0 - u1) * std::cos(2.0 * std::numbers::pi * u2),
                             std::sqrt(u1) * std::sin(2.0 * std::numbers::pi * u3));
  return q.normalized().toRotationMatrix();
}

// Evenly spread unit directions: equal angles on the circle, Fibonacci points on the sphere.
std::vector<Vec> candidate_pattern(int dim, int count) {
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  if (dim == 2) {
    for (int k = 0; k < count; ++k) {
      const double t = 2.0 * std::numbers::pi * k / count;
      out.emplace_back(std::cos(t), std::sin(t), 0.0);
    }
    return out;
  }
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int k = 0; k < count; ++k) {
    const double z = 1.0 - (2.0 * k + 1.0) / count;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    out.emplace_back(rho * std::cos(golden * k), rho * std::sin(golden * k), z);
  }
  return out;
}

}  // namespace

int default_candidate_count(int dim) { return dim == 2 ? 15 : 45; }

std::vector<Node> scattered_fill(const DomainSpec& spec, std::span<const Node> existing, std::span<const Index> seeds,
                                 const SpacingFunction& spacing, const ScatteredFillOptions& options) {
  const int dim = spec.dim();
  std::vector<Node> all(existing.begin(), existing.end());
  const std::size_t first_new = all.size();
  if (seeds.empty()) return {};

  BucketGrid grid(spec.box(), dim, spacing.h_s());
  for (std::size_t i = 0; i < all.size(); ++i) grid.insert(all[i].position, static_cast<Index>(i));

  std::mt19937_64 rng(options.rng_seed);
  std::deque<Index> front(seeds.begin(), seeds.end());
  const int count = options.candidates > 0 ? options.candidates : default_candidate_count(dim);
  const std::vector<Vec> pattern = candidate_pattern(dim, count);
  std::vector<Vec> dirs(pattern.size());

  while (!front.empty()) {
    const Index pi = front.front();
    front.pop_front();
    const Vec p = all[static_cast<std::size_t>(pi)].position;
    const double r = spacing(p);

    const Eigen::Matrix3d frame = random_frame(dim, rng);
    for (std::size_t k = 0; k < pattern.size(); ++k) dirs[k] = frame * pattern[k];

    for (const Vec& d : dirs) {
      const Vec c = p + r * d;
      if (spec.box_signed_distance(c) >= 0.0) continue;
      if (!options.region(c)) continue;
      const double hc = spacing(c);
      if (spec.signed_distance(c) >= -0.5 * hc) continue;
      // Where the spacing grows, h(c) exceeds the parent distance r; testing against the smaller
      // of the two (slightly relaxed) keeps the parent itself from blocking its candidates.
      const double gap = (1.0 - 1e-9) * std::min(r, hc);
      const double reach = std::max(gap, options.regular_gap);
      const bool blocked = grid.any_within(c, reach, [&](Index q) {
        const Node& other = all[static_cast<std::size_t>(q)];
        const double limit = other.kind == NodeKind::Regular ? options.regular_gap : gap;
        return (other.position - c).squaredNorm() < limit * limit;
      });
      if (blocked) continue;
      const Index id = static_cast<Index>(all.size());
      all.push_back({c, hc, NodeKind::Scattered, NodeRole::interior(), Vec::Zero(), {}});
      grid.insert(c, id);
      front.push_back(id);
    }
  }
  return {all.begin() + static_cast<std::ptrdiff_t>(first_new), all.end()};
}

namespace {

std::uint64_t spread_bits(std::uint64_t v, int dim) {
  std::uint64_t out = 0;
  for (int b = 0; b < 21; ++b) {
    if (v & (std::uint64_t{1} << b)) out |= std::uint64_t{1} << (b * dim);
  }
  return out;
}

std::uint64_t morton_key(const Vec& x, const Box& box, int dim) {
  std::uint64_t key = 0;
  const double scale = static_cast<double>((1u << 20) - 1);
  for (int a = 0; a < dim; ++a) {
    const double t = std::clamp((x[a] - box.lower[a]) / (box.upper[a] - box.lower[a]), 0.0, 1.0);
    key |= spread_bits(static_cast<std::uint64_t>(t * scale), dim) << a;
  }
  return key;
}

struct LatticeKeyHash {
  std::size_t operator()(const std::array<long, 3>& k) const {
    return static_cast<std::size_t>(k[0] * 73856093L ^ k[1] * 19349663L ^ k[2] * 83492791L);
  }
};

}  // namespace

NodeSet hybrid_discretize(const DomainSpec& spec, const DiscretizationPlan& plan) {
  const int dim = spec.dim();
  const bool refined = !spec.obstacles().empty() && plan.h_s < plan.h_r;
  const SpacingFunction spacing =
      refined ? SpacingFunction(plan.h_r, plan.h_s, plan.delta_h,
                                [&spec](const Vec& x, double cutoff) { return spec.obstacle_distance(x, cutoff); })
              : SpacingFunction::constant(plan.h_r);

  RegularLattice lattice = regular_fill(spec, plan.h_r);
  const double wall_h = lattice.spacing.head(dim).maxCoeff();

  std::vector<Node> nodes;
  for (const BoundarySample& s : discretize_boundary(spec, plan.h_r, [&](const Vec& x) { return spacing(x); })) {
    Node n;
    n.position = s.position;
    n.kind = NodeKind::Boundary;
    n.h = s.origin.type == BoundaryOrigin::Type::Wall ? wall_h : spacing(s.position);
    n.role = s.bc.is_dirichlet() ? NodeRole::dirichlet(*s.bc.value) : NodeRole::neumann(0.0);
    n.normal = s.normal;
    n.origin = s.origin;
    nodes.push_back(n);
  }
  const std::size_t boundary_count = nodes.size();

  const Vec mid = spec.centroid();
  std::function<bool(const Vec&)> region;
  switch (plan.rule) {
    case RegionRule::AllRegular:
      region = [](const Vec&) { return false; };
      break;
    case RegionRule::AllScattered:
      region = [](const Vec&) { return true; };
      break;
    case RegionRule::DiagonalQuarters:
      region = [mid](const Vec& x) {
        return (x.x() < mid.x() && x.y() < mid.y()) || (x.x() > mid.x() && x.y() > mid.y());
      };
      break;
    case RegionRule::SplitHorizontal:
      region = [&spec, s = plan.split](const Vec& x) { return x.y() < spec.box().lower.y() + s; };
      break;
    case RegionRule::SplitVertical:
      region = [&spec, s = plan.split](const Vec& x) { return x.x() < spec.box().lower.x() + s; };
      break;
    case RegionRule::ObstacleLayer: {
      const double w = plan.delta_h * plan.h_r;
      region = [&spec, w](const Vec& x) { return spec.obstacle_distance(x, w) < w; };
      break;
    }
  }

  std::vector<Node> regular;
  if (plan.rule == RegionRule::ObstacleLayer) {
    regular = carve_transition(std::move(lattice.nodes), spec, plan.delta_h, plan.h_r);
  } else {
    for (Node& n : lattice.nodes)
      if (!region(n.position)) regular.push_back(std::move(n));
  }

  // Front seeds: every boundary node plus regular nodes with a missing lattice neighbour.
  const auto counts = lattice_counts(spec, plan.h_r);
  auto key_of = [&](const Vec& x) {
    std::array<long, 3> k{0, 0, 0};
    for (int a = 0; a < dim; ++a)
      k[static_cast<std::size_t>(a)] = std::lround((x[a] - spec.box().lower[a]) / lattice.spacing[a]);
    return k;
  };
  std::unordered_set<std::array<long, 3>, LatticeKeyHash> present;
  for (const Node& n : regular) present.insert(key_of(n.position));

  nodes.insert(nodes.end(), regular.begin(), regular.end());
  std::vector<Index> seeds;
  for (std::size_t i = 0; i < boundary_count; ++i) seeds.push_back(static_cast<Index>(i));
  for (std::size_t i = boundary_count; i < nodes.size(); ++i) {
    const auto k = key_of(nodes[i].position);
    bool frontier = false;
    const int dz = dim == 3 ? 1 : 0;
    for (int oz = -dz; oz <= dz && !frontier; ++oz)
      for (int oy = -1; oy <= 1 && !frontier; ++oy)
        for (int ox = -1; ox <= 1 && !frontier; ++ox) {
          const std::array<long, 3> q{k[0] + ox, k[1] + oy, k[2] + oz};
          bool in_range = true;
          for (int a = 0; a < dim; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            in_range = in_range && q[ua] >= 1 && q[ua] < counts[ua];
          }
          if (in_range && !present.contains(q)) frontier = true;
        }
    if (frontier) seeds.push_back(static_cast<Index>(i));
  }

  if (plan.rule != RegionRule::AllRegular) {
    ScatteredFillOptions opts;
    opts.region = region;
    opts.regular_gap = 0.9 * plan.h_r;
    opts.rng_seed = plan.rng_seed;
    opts.candidates = plan.candidates;
    std::vector<Node> scattered = scattered_fill(spec, nodes, seeds, spacing, opts);
    nodes.insert(nodes.end(), std::make_move_iterator(scattered.begin()), std::make_move_iterator(scattered.end()));
  }

  if (nodes.size() == boundary_count) throw ConfigError("discretization produced no interior nodes");

  std::vector<std::pair<std::uint64_t, std::size_t>> keys(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) keys[i] = {morton_key(nodes[i].position, spec.box(), dim), i};
  std::sort(keys.begin(), keys.end());
  std::vector<Node> ordered;
  ordered.reserve(nodes.size());
  for (const auto& [key, i] : keys) ordered.push_back(nodes[i]);
  return NodeSet(dim, std::move(ordered), lattice.spacing);
}

const char* to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Regular: return "regular";
    case NodeKind::Scattered: return "scattered";
    case NodeKind::Boundary: return "boundary";
  }
  return "?";
}

const char* to_string(NodeRole::Type role) {
  switch (role) {
    case NodeRole::Type::Interior: return "interior";
    case NodeRole::Type::Dirichlet: return "dirichlet";
    case NodeRole::Type::Neumann: return "neumann";
  }
  return "?";
}

void write_nodes_csv(const NodeSet& nodes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  const bool three = nodes.dim() == 3;
  out << (three ? "x,y,z" : "x,y") << ",h,kind,role,bc_value," << (three ? "nx,ny,nz" : "nx,ny") << "\n";
  for (const Node& n : nodes.nodes()) {
    out << n.position.x() << "," << n.position.y();
    if (three) out << "," << n.position.z();
    out << "," << n.h << "," << to_string(n.kind) << "," << to_string(n.role.type) << "," << n.role.value << ","
        << n.normal.x() << "," << n.normal.y();
    if (three) out << "," << n.normal.z();
    out << "\n";
  }
}

}  // namespace hfd
