#pragma once

#include "hfd/types.hpp"

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <variant>
#include <vector>

namespace hfd {

struct Circle {  // sphere when the domain is 3D
  Vec center = Vec::Zero();
  double radius = 0.0;
};

struct Ellipse {  // 2D only
  Vec center = Vec::Zero();
  double semi_a = 0.0;
  double semi_b = 0.0;
  double rotation = 0.0;
};

/// Polar curve r(theta) = mean_radius + amplitude * cos(lobes * theta + phase). 2D only.
struct Star {
  Vec center = Vec::Zero();
  double mean_radius = 0.0;
  double amplitude = 0.0;
  int lobes = 5;
  double phase = 0.0;
};

using Shape = std::variant<Circle, Ellipse, Star>;

/// Temperature condition on a wall or obstacle surface. `value == nullopt` means insulated.
struct WallCondition {
  std::optional<double> value;

  static WallCondition dirichlet(double v) { return {v}; }
  static WallCondition insulated() { return {std::nullopt}; }
  bool is_dirichlet() const { return value.has_value(); }
};

class Obstacle {
 public:
  Obstacle(Shape shape, WallCondition wall);

  const Shape& shape() const { return shape_; }
  const WallCondition& wall() const { return wall_; }
  Vec center() const;
  /// Radius of a ball around center() that encloses the obstacle.
  double bounding_radius() const;

  /// Negative inside the obstacle, positive outside, Lipschitz-1.
  double signed_distance(const Vec& x) const;

 private:
  Shape shape_;
  WallCondition wall_;
};

struct Box {
  Vec lower = Vec::Zero();
  Vec upper = Vec::Ones();
};

/// Box face numbering: 2*axis for the lower face, 2*axis+1 for the upper face.
inline constexpr int face_id(int axis, bool upper) { return 2 * axis + (upper ? 1 : 0); }

class DomainSpec {
 public:
  /// Validates that obstacles sit strictly inside the box and keep a surface gap >= min_gap.
  DomainSpec(int dim, Box box, std::vector<Obstacle> obstacles, std::array<WallCondition, 6> walls,
             double min_gap = 0.0);

  int dim() const { return dim_; }
  const Box& box() const { return box_; }
  const std::vector<Obstacle>& obstacles() const { return obstacles_; }
  const WallCondition& wall(int face) const { return walls_[static_cast<std::size_t>(face)]; }
  Vec extent() const { return box_.upper - box_.lower; }
  Vec centroid() const { return 0.5 * (box_.lower + box_.upper); }

  double box_signed_distance(const Vec& x) const;
  /// max(box_sd, -min obstacle_sd): negative inside the fluid domain.
  double signed_distance(const Vec& x) const;
  /// Distance to the nearest obstacle surface. Values >= cutoff are only guaranteed to be >= cutoff.
  double obstacle_distance(const Vec& x, double cutoff = kInf) const;

 private:
  int dim_;
  Box box_;
  std::vector<Obstacle> obstacles_;
  std::array<WallCondition, 6> walls_;
};

struct BoundaryOrigin {
  enum class Type { Wall, Obstacle };
  Type type = Type::Wall;
  int index = 0;        ///< face id or obstacle index
  bool corner = false;  ///< lies on more than one box face
};

struct BoundarySample {
  Vec position = Vec::Zero();
  Vec normal = Vec::Zero();
  WallCondition bc;
  BoundaryOrigin origin;
};

/// Box walls are sampled on the lattice with spacing `wall_spacing`; obstacle surfaces follow
/// `obstacle_spacing` (arc-length stepping in 2D, Fibonacci points on spheres in 3D).
/// Obstacle normals point away from the obstacle, wall normals point out of the box.
std::vector<BoundarySample> discretize_boundary(const DomainSpec& spec, double wall_spacing,
                                                const std::function<double(const Vec&)>& obstacle_spacing);
std::vector<BoundarySample> discretize_boundary(const DomainSpec& spec, double spacing);

/// Lattice intervals per axis used for both the regular fill and the wall samples.
std::array<int, 3> lattice_counts(const DomainSpec& spec, double h);

/// Random placement of `shapes` (their centers are overwritten) inside the box by rejection
/// sampling. Obstacles keep `gap` from each other and `wall_gap` from the walls.
std::vector<Obstacle> place_obstacles(int dim, const Box& box, std::vector<Shape> shapes,
                                      std::vector<WallCondition> walls, double gap, double wall_gap,
                                      std::mt19937_64& rng, int max_attempts = 10000);

}  // namespace hfd
