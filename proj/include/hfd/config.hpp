#pragma once

#include "hfd/geometry.hpp"
#include "hfd/solver.hpp"
#include "hfd/types.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hfd {

enum class CaseType { DVD, DVDSplit, Obstacles2D, Spheres3D, Custom };
enum class Discretization { PureRegular, PureScattered, Hybrid };
enum class SplitOrientation { Horizontal, Vertical };

const char* to_string(CaseType t);
const char* to_string(Discretization d);
const char* to_string(SplitOrientation s);

/// One explicitly placed obstacle ([obstacle] section).
struct ObstacleConfig {
  Shape shape;
  WallCondition wall;
};

/// Randomly placed obstacles ([obstacles] section); the first `cold` get T_cold, the rest T_hot.
struct ObstacleLayout {
  int count = 0;
  int cold = -1;  ///< -1: count / 2
  std::string shape = "star";
  double mean_radius = 0.08;
  double amplitude = 0.02;
  int lobes = 5;
  double radius_min = 0.08;
  double radius_max = 0.15;
  std::optional<double> gap;       ///< default 2 h_s
  std::optional<double> wall_gap;  ///< default 2 h_r
};

struct CaseConfig {
  std::string name = "case";
  CaseType type = CaseType::DVD;
  Discretization discretization = Discretization::Hybrid;
  SplitOrientation split = SplitOrientation::Horizontal;
  int dim = 2;
  std::uint64_t seed = 1;

  Box box;
  double h_r = 0.0398;
  std::optional<double> h_s;  ///< default depends on the case
  double h_s_ratio = 1.0;     ///< h_s / h_r used when h_s is not given
  double delta_h = 4.0;

  PhysicsParams physics;
  double T_cold = -0.5;
  double T_hot = 0.5;
  double T_init = 0.0;

  double t_end = 0.15;
  std::optional<double> dt;  ///< default: dt_safety * h_min^2 / 2
  double dt_safety = 0.1;
  double dt_max = kInf;  ///< cap on the formula step (explicit advection bound on coarse grids)
  double steady_tol = 1e-6;
  long nu_stride = 10;
  long nu_window = 1000;
  std::vector<double> snapshots;
  bool stop_when_steady = true;

  PoissonSolveSettings poisson;
  bool condition = false;  ///< compute per-node kappa (weights-diag always does)
  std::string output_dir;  ///< empty: out/<name>

  std::vector<ObstacleConfig> obstacles;
  ObstacleLayout layout;
  std::array<std::optional<WallCondition>, 6> wall_overrides;

  double spacing_s() const { return h_s ? *h_s : h_r * h_s_ratio; }
  /// Wall conditions after applying case defaults and [walls] overrides.
  std::array<WallCondition, 6> walls() const;
  bool has_obstacles() const;
  void validate() const;
};

/// Defaults of a case type before any key is applied.
CaseConfig default_config(CaseType type);

/// Parses `key = value` text with [section] headers. Unknown keys are rejected with their line.
CaseConfig parse_config_string(const std::string& text, const std::string& source = "<string>");
CaseConfig parse_config(const std::string& path);

/// Applies one `section.key = value` override (sweeps and CLI). `h` sets h_r and keeps h_s / h_r.
void set_parameter(CaseConfig& config, const std::string& name, const std::string& value);

}  // namespace hfd
