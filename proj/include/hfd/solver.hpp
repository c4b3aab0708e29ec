#pragma once

#include "hfd/nodegen.hpp"
#include "hfd/operators.hpp"
#include "hfd/types.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <Eigen/IterativeLinearSolvers>
#include <unsupported/Eigen/IterativeSolvers>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace hfd {

struct PhysicsParams {
  double Ra = 1e6;
  double Pr = 0.71;
  Vec gravity = Vec(0.0, -1.0, 0.0);

  void validate(int dim) const;
};

struct TimeControls {
  double dt = 0.0;
  double t_end = 0.0;
  /// Relative change of windowed-mean Nu per unit time below which the run counts as steady.
  double steady_tol = 1e-6;
  long nu_stride = 1;   ///< steps between Nu samples
  long nu_window = 10;  ///< steps per averaging window (multiple of nu_stride)

  /// 0.1 * h^2 / 2 for the default safety factor.
  static double stable_dt(double h_min, double safety = 0.1) { return safety * h_min * h_min / 2.0; }
};

struct PoissonSolveSettings {
  /// Lu: complete sparse LU of the fixed matrix; Ilut: incomplete LU (less memory, more iterations).
  enum class Preconditioner { Lu, Ilut };
  double tolerance = 1e-8;
  int max_iterations = 5000;
  Index gauge = -1;  ///< -1: interior node nearest to the domain centroid
  double ilut_droptol = 1e-4;
  int ilut_fill = 10;
  int restart = 0;  ///< 0: 5 with Lu (one iteration is typical), 50 with Ilut
  Preconditioner preconditioner = Preconditioner::Lu;

  int effective_restart() const { return restart > 0 ? restart : preconditioner == Preconditioner::Lu ? 5 : 50; }
};

/// GMRES preconditioner that switches between sparse LU and IncompleteLUT at run time.
class PoissonPreconditioner {
 public:
  using Scalar = double;
  using StorageIndex = int;

  void configure(const PoissonSolveSettings& s) { settings_ = s; }
  template <typename M>
  PoissonPreconditioner& analyzePattern(const M&) { return *this; }
  template <typename M>
  PoissonPreconditioner& factorize(const M& m) { return compute(m); }
  template <typename M>
  PoissonPreconditioner& compute(const M& m) {
    const Eigen::SparseMatrix<double> a(m);
    compute_impl(a);
    return *this;
  }
  template <typename R>
  Eigen::VectorXd solve(const Eigen::MatrixBase<R>& b) const {
    return solve_impl(Eigen::VectorXd(b));
  }
  Eigen::ComputationInfo info() const { return info_; }
  /// Nonzeros of the stored factors.
  long factor_nonzeros() const { return factor_nonzeros_; }

 private:
  void compute_impl(const Eigen::SparseMatrix<double>& a);
  Eigen::VectorXd solve_impl(const Eigen::VectorXd& b) const;

  PoissonSolveSettings settings_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
  Eigen::IncompleteLUT<double> ilut_;
  Eigen::ComputationInfo info_ = Eigen::Success;
  long factor_nonzeros_ = 0;
};

struct FieldState {
  std::vector<std::vector<double>> velocity;  ///< one component per axis
  std::vector<double> pressure;
  std::vector<double> temperature;
  double time = 0.0;
  long step = 0;

  static FieldState zeros(int dim, std::size_t n);
  /// Index of the first non-finite value, or -1.
  Index first_non_finite() const;
};

/// Pressure Poisson system: Laplacian rows inside, homogeneous Neumann rows on the boundary,
/// one interior gauge row pinned to zero. Restarted GMRES with an incomplete-LU preconditioner.
///
/// The discrete Neumann problem annihilates constants, so a rhs is solvable only if it is
/// orthogonal to the left null vector psi. Before each solve a uniform shift is removed from the
/// interior rhs to make it so; otherwise the mismatch would pile up as a spike at the gauge node.
class PressureSolver {
 public:
  PressureSolver(const NodeSet& nodes, const OperatorSet& ops, const PoissonSolveSettings& settings);

  /// Solves lap p = rhs - c at interior nodes, with c the compatibility shift. Boundary entries of rhs are ignored.
  std::vector<double> solve(std::span<const double> rhs, std::span<const double> guess = {});

  Index gauge() const { return gauge_; }
  int last_iterations() const { return last_iterations_; }
  double last_residual() const { return last_residual_; }
  /// Uniform shift removed from the interior rhs in the last solve.
  double last_shift() const { return last_shift_; }
  /// ||b||_2 of the system rhs in the last solve (after the shift).
  double last_rhs_norm() const { return last_rhs_norm_; }
  /// Left null vector of the unpinned system, normalized so psi[gauge] = 1.
  const Eigen::VectorXd& null_vector() const { return psi_; }
  long factor_nonzeros() const { return solver_->preconditioner().factor_nonzeros(); }
  /// ||A p - b||_2 / ||b||_2 of the (row-scaled) system for an interior rhs; 0 when b = 0.
  double relative_residual(std::span<const double> p, std::span<const double> rhs) const;

 private:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  Eigen::VectorXd system_rhs(std::span<const double> rhs) const;

  std::vector<double> row_scale_;
  std::vector<bool> boundary_;
  Index gauge_ = 0;
  Matrix matrix_;
  PoissonSolveSettings settings_;
  std::unique_ptr<Eigen::GMRES<Matrix, PoissonPreconditioner>> solver_;
  Eigen::VectorXd psi_;
  double psi_interior_ = 0.0;  ///< psi summed over interior rows
  mutable double last_shift_ = 0.0;
  double last_rhs_norm_ = 0.0;
  int last_iterations_ = 0;
  double last_residual_ = 0.0;
};

/// Boundary temperatures on insulated nodes obtained by solving the coupled Neumann rows.
class NeumannTemperature {
 public:
  NeumannTemperature(const NodeSet& nodes, const OperatorSet& ops);
  void apply(std::vector<double>& temperature) const;
  std::span<const Index> nodes() const { return neumann_; }

 private:
  std::vector<Index> neumann_;
  std::vector<Index> local_;  ///< global -> position in neumann_, or -1
  std::vector<double> values_;
  const SparseOperator* normal_ = nullptr;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

using Velocity = std::vector<std::vector<double>>;

/// v* = v + dt (-(v.grad) v + Pr lap v - Ra Pr g T) inside; zero on the boundary.
Velocity momentum_predict(const NodeSet& nodes, const FieldState& state, const OperatorSet& ops,
                          const PhysicsParams& params, double dt);

/// Solves lap p = div(v*) / dt with the prepared pressure system.
std::vector<double> pressure_solve(const Velocity& vstar, const OperatorSet& ops, PressureSolver& solver, double dt,
                                   std::span<const double> guess = {});

/// v = v* - dt grad p inside, no-slip on the boundary.
Velocity velocity_correct(const NodeSet& nodes, const Velocity& vstar, std::span<const double> pressure,
                          const OperatorSet& ops, double dt);

/// T + dt (lap T - v.grad T) inside; Dirichlet values reset, insulated nodes reconstructed.
std::vector<double> temperature_step(const NodeSet& nodes, const FieldState& state, const OperatorSet& ops,
                                     const NeumannTemperature& neumann, double dt);

/// Mean over `cold_nodes` of L / (T_H - T_C) |dT/dn|. Zero when T_H == T_C.
double nusselt_average(std::span<const double> temperature, const OperatorSet& ops, std::span<const Index> cold_nodes,
                       double reference_length, double delta_t);

/// Max |div v| over interior nodes.
double max_interior_divergence(const NodeSet& nodes, const OperatorSet& ops, const Velocity& v);

/// Bound on max interior |div v| after velocity_correct with pressure p from the last solve of `solver`:
///   dt (|c| + 10 tol ||b||_2) + dt max_i |(lap p - div grad p)_i|,
/// where grad p is zeroed on the boundary as in the correction. The first term is what the Krylov
/// tolerance and the compatibility shift c leave; the second is the commutation defect of the
/// collocated operators, which no solver tolerance removes.
double projection_divergence_bound(const NodeSet& nodes, const OperatorSet& ops, std::span<const double> pressure,
                                   const PressureSolver& solver, double tolerance, double dt);

struct NuSample {
  long step;
  double time;
  double nu;
};

struct DivergenceSample {
  long step;
  double time;
  double predicted;  ///< max |div v*|
  double corrected;  ///< max |div v| after the projection
  double bound;      ///< projection_divergence_bound for this step
};

struct RunSettings {
  PhysicsParams physics;
  TimeControls time;
  PoissonSolveSettings poisson;
  std::vector<Index> cold_nodes;
  double reference_length = 1.0;
  double delta_t = 1.0;
  double initial_temperature = 0.0;
  std::vector<double> snapshot_times;
  std::function<void(const FieldState&)> on_snapshot;
  /// Called with the last finite state before a DivergenceError propagates.
  std::function<void(const FieldState&)> on_failure;
  bool stop_when_steady = true;
};

struct RunOutcome {
  enum class Status { Completed, Steady };
  Status status = Status::Completed;
  std::vector<NuSample> nu;
  std::vector<DivergenceSample> divergence;
  double final_nu = 0.0;  ///< mean over the last averaging window
  FieldState state;
  double stepping_seconds = 0.0;
  double poisson_seconds = 0.0;
  long poisson_iterations = 0;
};

/// Explicit Euler time loop with Chorin projection. Throws DivergenceError on blow-up.
RunOutcome run(const NodeSet& nodes, const OperatorSet& ops, const RunSettings& settings);

/// Interior node closest to the domain centroid.
Index default_gauge(const NodeSet& nodes);

}  // namespace hfd
