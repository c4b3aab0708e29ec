#pragma once

#include "hfd/approx.hpp"
#include "hfd/config.hpp"
#include "hfd/geometry.hpp"
#include "hfd/nodegen.hpp"
#include "hfd/operators.hpp"
#include "hfd/solver.hpp"

#include <span>
#include <string>
#include <vector>

namespace hfd {

/// Box, walls and obstacles for a case. Random layouts are drawn from the case seed.
DomainSpec build_domain(const CaseConfig& config);
DiscretizationPlan build_plan(const CaseConfig& config);

/// Dirichlet boundary nodes held at T_cold, corners excluded.
std::vector<Index> cold_nodes(const CaseConfig& config, const NodeSet& nodes);

struct PhaseTimings {
  double nodes = 0.0;     ///< node generation
  double weights = 0.0;   ///< stencil search and local weight solves
  double assembly = 0.0;  ///< global operators
  double stepping = 0.0;  ///< time loop, including the pressure factorization
  double total = 0.0;
};

/// Everything up to the time loop.
struct Discretized {
  DomainSpec domain;
  NodeSet nodes;
  WeightSet weights;
  OperatorSet ops;
  PhaseTimings timings;
};

Discretized discretize(const CaseConfig& config, bool with_weights = true);

struct RunResult {
  enum class Status { Completed, Steady, Failed };
  Status status = Status::Failed;
  std::string error;
  double final_nu = 0.0;
  double dt = 0.0;
  std::vector<NuSample> nu;
  std::vector<DivergenceSample> divergence;
  NodeCounts counts;
  PhaseTimings timings;
  long poisson_iterations = 0;
  FieldState state;
};

const char* to_string(RunResult::Status s);

struct RunOptions {
  bool write_outputs = true;
  bool verbose = false;
};

/// Geometry, nodes, weights, operators and the time loop; writes the run artifacts into
/// config.output_dir (out/<name> when empty). Errors propagate.
RunResult run_case(const CaseConfig& config, const RunOptions& options = {});

/// One run per value of `parameter`; failures are recorded and the sweep continues.
/// Writes `csv_path` (columns parameter,N,Nu,time_total,time_weights,time_stepping,status) when non-empty.
std::vector<RunResult> sweep(const CaseConfig& base, const std::string& parameter, std::span<const std::string> values,
                             const std::string& csv_path, const RunOptions& options = {});

std::string output_directory(const CaseConfig& config);

void write_nu_series(const std::vector<NuSample>& nu, const std::string& path);
void write_timings(const PhaseTimings& t, const std::string& path);
void write_divergence(const std::vector<DivergenceSample>& d, const std::string& path);
void write_fields(const NodeSet& nodes, const FieldState& state, const std::string& path);
/// fields_<t>.csv with t printed with six decimals.
std::string fields_filename(double t);

}  // namespace hfd
