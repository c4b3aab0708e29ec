#include "hfd/bench.hpp"

#include "hfd/kdtree.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>

namespace hfd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  return out;
}

bool box_only(const CaseConfig& c) { return !c.has_obstacles(); }

}  // namespace

DomainSpec build_domain(const CaseConfig& c) {
  const auto walls = c.walls();
  if (!c.obstacles.empty()) {
    std::vector<Obstacle> obs;
    for (const ObstacleConfig& o : c.obstacles) obs.emplace_back(o.shape, o.wall);
    return DomainSpec(c.dim, c.box, std::move(obs), walls);
  }
  if (c.layout.count == 0) return DomainSpec(c.dim, c.box, {}, walls);

  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ObstacleLayout& l = c.layout;
  const int cold = l.cold < 0 ? l.count / 2 : l.cold;
  std::vector<Shape> shapes;
  std::vector<WallCondition> conditions;
  for (int k = 0; k < l.count; ++k) {
    if (l.shape == "sphere") {
      shapes.emplace_back(Circle{Vec::Zero(), l.radius_min + (l.radius_max - l.radius_min) * unit(rng)});
    } else if (l.shape == "circle") {
      shapes.emplace_back(Circle{Vec::Zero(), l.mean_radius});
    } else {
      shapes.emplace_back(Star{Vec::Zero(), l.mean_radius, l.amplitude, l.lobes, 2.0 * std::numbers::pi * unit(rng)});
    }
    conditions.push_back(WallCondition::dirichlet(k < cold ? c.T_cold : c.T_hot));
  }
  const double gap = l.gap.value_or(2.0 * c.spacing_s());
  const double wall_gap = l.wall_gap.value_or(2.0 * c.h_r);
  auto obstacles = place_obstacles(c.dim, c.box, std::move(shapes), std::move(conditions), gap, wall_gap, rng);
  return DomainSpec(c.dim, c.box, std::move(obstacles), walls);
}

DiscretizationPlan build_plan(const CaseConfig& c) {
  DiscretizationPlan p;
  p.h_r = c.h_r;
  p.h_s = box_only(c) ? c.h_r : c.spacing_s();
  p.delta_h = c.delta_h;
  p.rng_seed = c.seed;
  if (c.discretization == Discretization::PureRegular) {
    p.rule = RegionRule::AllRegular;
  } else if (c.discretization == Discretization::PureScattered) {
    p.rule = RegionRule::AllScattered;
  } else if (c.type == CaseType::DVDSplit) {
    p.rule = c.split == SplitOrientation::Horizontal ? RegionRule::SplitHorizontal : RegionRule::SplitVertical;
    p.split = c.delta_h * c.h_r;
  } else if (box_only(c)) {
    p.rule = RegionRule::DiagonalQuarters;
  } else {
    p.rule = RegionRule::ObstacleLayer;
  }
  return p;
}

std::vector<Index> cold_nodes(const CaseConfig& c, const NodeSet& nodes) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes.nodes()[i];
    if (n.is_boundary() && n.role.type == NodeRole::Type::Dirichlet && n.role.value == c.T_cold && !n.origin.corner)
      out.push_back(static_cast<Index>(i));
  }
  return out;
}

Discretized discretize(const CaseConfig& c, bool with_weights) {
  c.validate();
  auto t0 = Clock::now();
  DomainSpec domain = build_domain(c);
  NodeSet nodes = hybrid_discretize(domain, build_plan(c));
  PhaseTimings t;
  t.nodes = seconds_since(t0);
  WeightSet weights;
  OperatorSet ops;
  if (with_weights) {
    auto t1 = Clock::now();
    KdTree tree(nodes.positions(), nodes.dim());
    WeightOptions wo;
    wo.condition = c.condition;
    weights = compute_weights(nodes, tree, wo);
    t.weights = seconds_since(t1);
    auto t2 = Clock::now();
    ops = OperatorSet::build(nodes, weights);
    t.assembly = seconds_since(t2);
  }
  return {std::move(domain), std::move(nodes), std::move(weights), std::move(ops), t};
}

const char* to_string(RunResult::Status s) {
  switch (s) {
    case RunResult::Status::Completed: return "completed";
    case RunResult::Status::Steady: return "steady";
    case RunResult::Status::Failed: return "failed";
  }
  return "?";
}

std::string output_directory(const CaseConfig& c) { return c.output_dir.empty() ? "out/" + c.name : c.output_dir; }

std::string fields_filename(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "fields_%.6f.csv", t);
  return buf;
}

void write_nu_series(const std::vector<NuSample>& nu, const std::string& path) {
  auto out = open_csv(path);
  out << "step,t,Nu\n";
  for (const NuSample& s : nu) out << s.step << "," << s.time << "," << s.nu << "\n";
}

void write_timings(const PhaseTimings& t, const std::string& path) {
  auto out = open_csv(path);
  out << "phase,seconds\n"
      << "nodes," << t.nodes << "\n"
      << "weights," << t.weights << "\n"
      << "assembly," << t.assembly << "\n"
      << "stepping," << t.stepping << "\n"
      << "total," << t.total << "\n";
}

void write_divergence(const std::vector<DivergenceSample>& d, const std::string& path) {
  auto out = open_csv(path);
  out << "step,t,div_predicted,div_corrected,div_bound\n";
  for (const DivergenceSample& s : d) out << s.step << "," << s.time << "," << s.predicted << "," << s.corrected << "," << s.bound << "\n";
}

void write_fields(const NodeSet& nodes, const FieldState& state, const std::string& path) {
  auto out = open_csv(path);
  const bool three = nodes.dim() == 3;
  out << (three ? "x,y,z" : "x,y") << ",h,kind," << (three ? "vx,vy,vz" : "vx,vy") << ",p,T\n";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes.nodes()[i];
    out << n.position.x() << "," << n.position.y();
    if (three) out << "," << n.position.z();
    out << "," << n.h << "," << to_string(n.kind);
    for (const auto& vc : state.velocity) out << "," << vc[i];
    out << "," << state.pressure[i] << "," << state.temperature[i] << "\n";
  }
}

RunResult run_case(const CaseConfig& c, const RunOptions& options) {
  const auto t0 = Clock::now();
  Discretized d = discretize(c);
  RunResult result;
  result.counts = d.nodes.counts();
  result.timings = d.timings;
  if (options.verbose)
    std::cerr << c.name << ": N = " << result.counts.total() << " (regular " << result.counts.regular << ", scattered "
              << result.counts.scattered << ", boundary " << result.counts.boundary << ")\n";

  const std::string dir = output_directory(c);
  if (options.write_outputs) std::filesystem::create_directories(dir);

  RunSettings rs;
  rs.physics = c.physics;
  rs.time.dt = c.dt ? *c.dt : std::min(TimeControls::stable_dt(d.nodes.min_h(), c.dt_safety), c.dt_max);
  rs.time.t_end = c.t_end;
  rs.time.steady_tol = c.steady_tol;
  rs.time.nu_stride = c.nu_stride;
  rs.time.nu_window = c.nu_window;
  rs.poisson = c.poisson;
  rs.cold_nodes = cold_nodes(c, d.nodes);
  rs.reference_length = c.box.upper.x() - c.box.lower.x();
  rs.delta_t = c.T_hot - c.T_cold;
  rs.initial_temperature = c.T_init;
  rs.stop_when_steady = c.stop_when_steady;
  rs.snapshot_times = c.snapshots;
  result.dt = rs.time.dt;
  if (options.write_outputs) {
    const NodeSet& nodes = d.nodes;
    rs.on_snapshot = [&nodes, dir](const FieldState& s) { write_fields(nodes, s, dir + "/" + fields_filename(s.time)); };
    rs.on_failure = [&nodes, dir](const FieldState& s) { write_fields(nodes, s, dir + "/fields_failure.csv"); };
  }

  RunOutcome outcome = run(d.nodes, d.ops, rs);
  result.timings.stepping = outcome.stepping_seconds;
  result.timings.total = seconds_since(t0);
  result.status = outcome.status == RunOutcome::Status::Steady ? RunResult::Status::Steady : RunResult::Status::Completed;
  result.final_nu = outcome.final_nu;
  result.nu = std::move(outcome.nu);
  result.divergence = std::move(outcome.divergence);
  result.poisson_iterations = outcome.poisson_iterations;
  result.state = std::move(outcome.state);

  if (options.write_outputs) {
    write_nodes_csv(d.nodes, dir + "/nodes.csv");
    write_nu_series(result.nu, dir + "/nu_series.csv");
    write_timings(result.timings, dir + "/timings.csv");
    write_divergence(result.divergence, dir + "/divergence.csv");
    write_fields(d.nodes, result.state, dir + "/" + fields_filename(result.state.time));
  }
  if (options.verbose)
    std::cerr << c.name << ": Nu = " << result.final_nu << " at t = " << result.state.time << " ("
              << to_string(result.status) << ", " << result.timings.total << " s)\n";
  return result;
}

std::vector<RunResult> sweep(const CaseConfig& base, const std::string& parameter, std::span<const std::string> values,
                             const std::string& csv_path, const RunOptions& options) {
  std::vector<RunResult> results;
  const std::string base_dir = output_directory(base);
  for (const std::string& v : values) {
    RunResult r;
    try {
      CaseConfig c = base;
      set_parameter(c, parameter, v);
      c.output_dir = base_dir + "/" + parameter + "_" + v;
      c.name = base.name + "_" + parameter + "_" + v;
      r = run_case(c, options);
    } catch (const std::exception& e) {
      r.status = RunResult::Status::Failed;
      r.error = e.what();
      r.final_nu = std::numeric_limits<double>::quiet_NaN();
      if (options.verbose) std::cerr << parameter << " = " << v << ": failed: " << e.what() << "\n";
    }
    results.push_back(std::move(r));
  }
  if (!csv_path.empty()) {
    if (auto parent = std::filesystem::path(csv_path).parent_path(); !parent.empty())
      std::filesystem::create_directories(parent);
    auto out = open_csv(csv_path);
    out << "parameter,N,Nu,time_total,time_weights,time_stepping,status\n";
    for (std::size_t k = 0; k < results.size(); ++k) {
      const RunResult& r = results[k];
      out << values[k] << "," << r.counts.total() << "," << r.final_nu << "," << r.timings.total << ","
          << r.timings.weights << "," << r.timings.stepping << "," << to_string(r.status) << "\n";
    }
  }
  return results;
}

}  // namespace hfd
