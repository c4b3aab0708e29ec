#pragma once

#include "hfd/geometry.hpp"
#include "hfd/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hfd {

enum class NodeKind { Regular, Scattered, Boundary };

/// Temperature role of a node. Velocity is no-slip on every boundary node regardless.
struct NodeRole {
  enum class Type { Interior, Dirichlet, Neumann };
  Type type = Type::Interior;
  double value = 0.0;

  static NodeRole interior() { return {}; }
  static NodeRole dirichlet(double v) { return {Type::Dirichlet, v}; }
  static NodeRole neumann(double v) { return {Type::Neumann, v}; }
};

struct Node {
  Vec position = Vec::Zero();
  double h = 0.0;
  NodeKind kind = NodeKind::Regular;
  NodeRole role;
  Vec normal = Vec::Zero();  ///< boundary nodes only
  BoundaryOrigin origin;     ///< boundary nodes only

  bool is_boundary() const { return kind == NodeKind::Boundary; }
};

struct NodeCounts {
  std::size_t regular = 0;
  std::size_t scattered = 0;
  std::size_t boundary = 0;
  std::size_t total() const { return regular + scattered + boundary; }
};

class NodeSet {
 public:
  NodeSet() = default;
  NodeSet(int dim, std::vector<Node> nodes, Vec lattice_spacing);

  int dim() const { return dim_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& operator[](Index i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  std::span<const Vec> positions() const { return positions_; }
  /// Spacing of the regular lattice per axis (what MON axis neighbours are tested against).
  const Vec& lattice_spacing() const { return lattice_spacing_; }
  const NodeCounts& counts() const { return counts_; }
  double min_h() const;

 private:
  int dim_ = 2;
  std::vector<Node> nodes_;
  std::vector<Vec> positions_;
  Vec lattice_spacing_ = Vec::Zero();
  NodeCounts counts_;
};

/// Linear grading from h_s on the irregular boundary to h_r at distance delta_h * h_r.
class SpacingFunction {
 public:
  using DistanceQuery = std::function<double(const Vec&, double cutoff)>;

  SpacingFunction(double h_r, double h_s, double delta_h, DistanceQuery irregular_distance);
  static SpacingFunction constant(double h);

  double operator()(const Vec& x) const;
  double h_r() const { return h_r_; }
  double h_s() const { return h_s_; }
  double delta_h() const { return delta_h_; }
  double width() const { return delta_h_ * h_r_; }

 private:
  double h_r_;
  double h_s_;
  double delta_h_;
  DistanceQuery distance_;
};

struct RegularLattice {
  std::vector<Node> nodes;
  Vec spacing = Vec::Zero();
};

/// Axis-aligned lattice with (approximately) spacing h_r; points within h_r/2 of the domain
/// boundary are dropped since boundary nodes are placed separately.
RegularLattice regular_fill(const DomainSpec& spec, double h_r);

/// Drops regular nodes closer than delta_h * h_r to an obstacle. Box walls never trigger removal.
std::vector<Node> carve_transition(std::vector<Node> nodes, const DomainSpec& spec, double delta_h, double h_r);

struct ScatteredFillOptions {
  /// Where scattered nodes may be placed.
  std::function<bool(const Vec&)> region;
  /// Minimum distance kept to nodes of kind Regular.
  double regular_gap = 0.0;
  std::uint64_t rng_seed = 0;
  /// Candidates proposed around each front node; 0 selects default_candidate_count(dim).
  int candidates = 0;
};

/// 15 in 2D, 45 in 3D.
int default_candidate_count(int dim);

/// Advancing-front fill. `existing` are the nodes already placed (boundary and retained regular
/// nodes); `seeds` indexes into `existing` and starts the front. Returns only the new nodes.
std::vector<Node> scattered_fill(const DomainSpec& spec, std::span<const Node> existing, std::span<const Index> seeds,
                                 const SpacingFunction& spacing, const ScatteredFillOptions& options);

/// Which part of the domain carries scattered nodes.
enum class RegionRule {
  AllRegular,
  AllScattered,
  DiagonalQuarters,  ///< lower-left and upper-right quarters scattered
  SplitHorizontal,   ///< scattered where y < split
  SplitVertical,     ///< scattered where x < split
  ObstacleLayer,     ///< scattered within delta_h * h_r of obstacles
};

struct DiscretizationPlan {
  RegionRule rule = RegionRule::DiagonalQuarters;
  double h_r = 0.0;
  double h_s = 0.0;
  double delta_h = 4.0;
  /// Split coordinate for the split rules (delta_h * h measured from the lower box corner).
  double split = 0.0;
  std::uint64_t rng_seed = 0;
  /// Candidates proposed around each front node; 0 selects default_candidate_count(dim).
  int candidates = 0;
};


NodeSet hybrid_discretize(const DomainSpec& spec, const DiscretizationPlan& plan);

/// Writes the nodes CSV: x,y[,z],h,kind,role,bc_value,nx,ny[,nz].
void write_nodes_csv(const NodeSet& nodes, const std::string& path);

const char* to_string(NodeKind kind);
const char* to_string(NodeRole::Type role);

}  // namespace hfd
