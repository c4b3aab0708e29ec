#include "hfd/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hfd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Index first_non_finite_in(std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) return static_cast<Index>(i);
  return -1;
}

}  // namespace

void PhysicsParams::validate(int dim) const {
  if (!(Ra > 0.0)) throw ConfigError("Ra must be positive");
  if (!(Pr > 0.0)) throw ConfigError("Pr must be positive");
  if (std::abs(gravity.norm() - 1.0) > 1e-12) throw ConfigError("gravity must be a unit vector");
  if (dim == 2 && gravity.z() != 0.0) throw ConfigError("gravity must lie in the xy plane for 2D cases");
}

FieldState FieldState::zeros(int dim, std::size_t n) {
  FieldState s;
  s.velocity.assign(static_cast<std::size_t>(dim), std::vector<double>(n, 0.0));
  s.pressure.assign(n, 0.0);
  s.temperature.assign(n, 0.0);
  return s;
}

Index FieldState::first_non_finite() const {
  for (const auto& c : velocity)
    if (Index i = first_non_finite_in(c); i >= 0) return i;
  if (Index i = first_non_finite_in(pressure); i >= 0) return i;
  return first_non_finite_in(temperature);
}

Index default_gauge(const NodeSet& nodes) {
  Vec lo = Vec::Constant(kInf), hi = Vec::Constant(-kInf);
  for (const Node& n : nodes.nodes()) {
    lo = lo.cwiseMin(n.position);
    hi = hi.cwiseMax(n.position);
  }
  const Vec c = 0.5 * (lo + hi);
  Index best = -1;
  double best_d = kInf;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes.nodes()[i];
    if (n.is_boundary()) continue;
    const double d = (n.position - c).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<Index>(i);
    }
  }
  if (best < 0) throw ConfigError("no interior node available for the pressure gauge");
  return best;
}

// ---------------------------------------------------------------------------------------------

void PoissonPreconditioner::compute_impl(const Eigen::SparseMatrix<double>& a) {
  if (settings_.preconditioner == PoissonSolveSettings::Preconditioner::Lu) {
    lu_.analyzePattern(a);
    lu_.factorize(a);
    info_ = lu_.info();
    factor_nonzeros_ = info_ == Eigen::Success ? static_cast<long>(lu_.nnzL() + lu_.nnzU()) : 0;
  } else {
    ilut_.setDroptol(settings_.ilut_droptol);
    ilut_.setFillfactor(settings_.ilut_fill);
    ilut_.compute(a);
    info_ = ilut_.info();
    factor_nonzeros_ = 0;
  }
}

Eigen::VectorXd PoissonPreconditioner::solve_impl(const Eigen::VectorXd& b) const {
  if (settings_.preconditioner == PoissonSolveSettings::Preconditioner::Lu) return lu_.solve(b);
  return ilut_.solve(b);
}

PressureSolver::PressureSolver(const NodeSet& nodes, const OperatorSet& ops, const PoissonSolveSettings& settings)
    : settings_(settings) {
  if (!(settings.tolerance > 0.0 && settings.tolerance < 1.0))
    throw ConfigError("Poisson tolerance must lie in (0, 1)");
  if (settings.max_iterations <= 0) throw ConfigError("Poisson max_iterations must be positive");
  if (settings.restart < 0) throw ConfigError("GMRES restart length must be non-negative");
  const std::size_t n = nodes.size();
  gauge_ = settings.gauge >= 0 ? settings.gauge : default_gauge(nodes);
  if (static_cast<std::size_t>(gauge_) >= n || nodes[gauge_].is_boundary())
    throw ConfigError("pressure gauge must be an interior node");

  // Rows are scaled to a common 1/h^2 magnitude so the preconditioner and the residual
  // treat boundary and interior equations alike. The solution is unaffected.
  row_scale_.assign(n, 1.0);
  boundary_.assign(n, false);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(ops.laplacian.nonzeros() + ops.normal.nonzeros() + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = nodes.nodes()[i];
    const Index r = static_cast<Index>(i);
    if (r == gauge_) {
      row_scale_[i] = 1.0 / (node.h * node.h);
      triplets.emplace_back(r, r, row_scale_[i]);
      continue;
    }
    const SparseOperator& op = node.is_boundary() ? ops.normal : ops.laplacian;
    if (op.row_size(i) == 0) throw std::invalid_argument("pressure system: empty row for node " + std::to_string(i));
    boundary_[i] = node.is_boundary();
    row_scale_[i] = node.is_boundary() ? 1.0 / node.h : 1.0;
    const auto cols = op.row_cols(i);
    const auto vals = op.row_vals(i);
    for (std::size_t k = 0; k < cols.size(); ++k) triplets.emplace_back(r, cols[k], row_scale_[i] * vals[k]);
  }
  matrix_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  matrix_.setFromTriplets(triplets.begin(), triplets.end());
  matrix_.makeCompressed();

  solver_ = std::make_unique<Eigen::GMRES<Matrix, PoissonPreconditioner>>();
  solver_->set_restart(settings.effective_restart());
  solver_->preconditioner().configure(settings);
  solver_->setTolerance(settings.tolerance);
  solver_->setMaxIterations(settings.max_iterations);
  solver_->compute(matrix_);
  if (solver_->info() != Eigen::Success)
    throw SingularSystemError("pressure system: preconditioner factorization failed", kInf);

  // psi solves M^T psi = s e_g - a_g, where M is the pinned matrix and a_g the gauge Laplacian row.
  // Since M 1 = s e_g this gives psi_g = 1 and psi^T A = 0 for the unpinned matrix A.
  Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  {
    const auto gi = static_cast<std::size_t>(gauge_);
    const auto cols = ops.laplacian.row_cols(gi);
    const auto vals = ops.laplacian.row_vals(gi);
    for (std::size_t k = 0; k < cols.size(); ++k) f[cols[k]] -= vals[k];
    f[gauge_] += row_scale_[gi];
  }
  const Eigen::SparseMatrix<double, Eigen::RowMajor> mt = matrix_.transpose();
  Eigen::GMRES<Matrix, PoissonPreconditioner> adjoint;
  adjoint.set_restart(settings.effective_restart());
  adjoint.preconditioner().configure(settings);
  adjoint.setTolerance(std::min(settings.tolerance, 1e-10));
  // Setup solve: not bound by the per-step iteration cap.
  adjoint.setMaxIterations(std::max(settings.max_iterations, 1000));
  adjoint.compute(mt);
  psi_ = adjoint.solve(f);
  if (adjoint.info() != Eigen::Success || !psi_.allFinite())
    throw ConvergenceError("pressure system: left null vector did not converge", adjoint.error());
  for (std::size_t i = 0; i < n; ++i)
    if (!boundary_[i]) psi_interior_ += psi_[static_cast<Eigen::Index>(i)];
}

namespace {

Index first_non_finite_entry(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i])) return static_cast<Index>(i);
  return -1;
}

}  // namespace

Eigen::VectorXd PressureSolver::system_rhs(std::span<const double> rhs) const {
  const std::size_t n = row_scale_.size();
  if (rhs.size() != n) throw std::invalid_argument("pressure rhs has the wrong length");
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    b[e] = boundary_[i] ? 0.0 : rhs[i];
    dot += psi_[e] * b[e];
  }
  last_shift_ = psi_interior_ != 0.0 ? dot / psi_interior_ : 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (!boundary_[i]) b[static_cast<Eigen::Index>(i)] -= last_shift_;
  b[gauge_] = 0.0;
  return b;
}

std::vector<double> PressureSolver::solve(std::span<const double> rhs, std::span<const double> guess) {
  const Eigen::VectorXd b = system_rhs(rhs);
  const Eigen::Index n = b.size();
  if (Index bad = first_non_finite_entry(b); bad >= 0)
    throw DivergenceError("non-finite pressure right-hand side at node " + std::to_string(bad), 0, bad);
  last_rhs_norm_ = b.norm();
  Eigen::VectorXd x;
  if (b.squaredNorm() == 0.0) {
    x = Eigen::VectorXd::Zero(n);
    last_iterations_ = 0;
    last_residual_ = 0.0;
  } else {
    if (!guess.empty() && static_cast<Eigen::Index>(guess.size()) != n)
      throw std::invalid_argument("pressure guess has the wrong length");
    bool direct = false;
    if (settings_.preconditioner == PoissonSolveSettings::Preconditioner::Lu) {
      // The exact factorization usually meets the tolerance alone; GMRES only refines when it does not.
      x = solver_->preconditioner().solve(b);
      last_iterations_ = 1;
      last_residual_ = (b - matrix_ * x).norm() / last_rhs_norm_;
      direct = x.allFinite() && last_residual_ <= settings_.tolerance;
    }
    if (!direct) {
      if (x.size() == n && x.allFinite()) {
        x = solver_->solveWithGuess(b, x);
      } else if (!guess.empty()) {
        x = solver_->solveWithGuess(b, Eigen::Map<const Eigen::VectorXd>(guess.data(), n));
      } else {
        x = solver_->solve(b);
      }
      last_iterations_ = static_cast<int>(solver_->iterations());
      last_residual_ = solver_->error();
    }
    if (Index bad = first_non_finite_entry(x); bad >= 0)
      throw DivergenceError("non-finite pressure at node " + std::to_string(bad), 0, bad);
    if (!direct && solver_->info() != Eigen::Success) {
      std::ostringstream msg;
      msg << "pressure solve did not converge in " << last_iterations_ << " iterations (relative residual "
          << last_residual_ << ")";
      throw ConvergenceError(msg.str(), last_residual_);
    }
    x[gauge_] = 0.0;
  }
  return {x.data(), x.data() + n};
}

double PressureSolver::relative_residual(std::span<const double> p, std::span<const double> rhs) const {
  const Eigen::VectorXd b = system_rhs(rhs);
  if (p.size() != row_scale_.size()) throw std::invalid_argument("pressure field has the wrong length");
  const double bn = b.norm();
  if (bn == 0.0) return 0.0;
  const Eigen::VectorXd r = matrix_ * Eigen::Map<const Eigen::VectorXd>(p.data(), b.size()) - b;
  return r.norm() / bn;
}

// ---------------------------------------------------------------------------------------------

NeumannTemperature::NeumannTemperature(const NodeSet& nodes, const OperatorSet& ops) : normal_(&ops.normal) {
  const std::size_t n = nodes.size();
  local_.assign(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = nodes.nodes()[i];
    if (node.is_boundary() && node.role.type == NodeRole::Type::Neumann) {
      local_[i] = static_cast<Index>(neumann_.size());
      neumann_.push_back(static_cast<Index>(i));
      values_.push_back(node.role.value);
    }
  }
  if (neumann_.empty()) return;
  std::vector<Eigen::Triplet<double>> triplets;
  for (std::size_t r = 0; r < neumann_.size(); ++r) {
    const auto i = static_cast<std::size_t>(neumann_[r]);
    const auto cols = ops.normal.row_cols(i);
    const auto vals = ops.normal.row_vals(i);
    if (cols.empty()) throw std::invalid_argument("insulated node " + std::to_string(i) + " has no normal-derivative row");
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (Index c = local_[static_cast<std::size_t>(cols[k])]; c >= 0)
        triplets.emplace_back(static_cast<Index>(r), c, vals[k]);
  }
  const auto m = static_cast<Eigen::Index>(neumann_.size());
  Eigen::SparseMatrix<double> k(m, m);
  k.setFromTriplets(triplets.begin(), triplets.end());
  k.makeCompressed();
  lu_.analyzePattern(k);
  lu_.factorize(k);
  if (lu_.info() != Eigen::Success)
    throw SingularSystemError("insulated-boundary temperature system is singular", kInf);
}

void NeumannTemperature::apply(std::vector<double>& temperature) const {
  if (neumann_.empty()) return;
  const auto m = static_cast<Eigen::Index>(neumann_.size());
  Eigen::VectorXd rhs(m);
  for (Eigen::Index r = 0; r < m; ++r) {
    const auto i = static_cast<std::size_t>(neumann_[static_cast<std::size_t>(r)]);
    const auto cols = normal_->row_cols(i);
    const auto vals = normal_->row_vals(i);
    double s = values_[static_cast<std::size_t>(r)];
    for (std::size_t k = 0; k < cols.size(); ++k)
      if (local_[static_cast<std::size_t>(cols[k])] < 0) s -= vals[k] * temperature[static_cast<std::size_t>(cols[k])];
    rhs[r] = s;
  }
  const Eigen::VectorXd t = lu_.solve(rhs);
  for (Eigen::Index r = 0; r < m; ++r) temperature[static_cast<std::size_t>(neumann_[static_cast<std::size_t>(r)])] = t[r];
}

// ---------------------------------------------------------------------------------------------

Velocity momentum_predict(const NodeSet& nodes, const FieldState& state, const OperatorSet& ops,
                          const PhysicsParams& params, double dt) {
  const int dim = nodes.dim();
  const std::size_t n = nodes.size();
  const double buoyancy = params.Ra * params.Pr;
  Velocity vstar(static_cast<std::size_t>(dim), std::vector<double>(n, 0.0));
  std::vector<double> lap(n), grad(n);
  for (int c = 0; c < dim; ++c) {
    const auto& vc = state.velocity[static_cast<std::size_t>(c)];
    auto& out = vstar[static_cast<std::size_t>(c)];
    ops.laplacian.apply(vc, lap);
    for (std::size_t i = 0; i < n; ++i) out[i] = params.Pr * lap[i] - buoyancy * params.gravity[c] * state.temperature[i];
    for (int a = 0; a < dim; ++a) {
      ops.partial[static_cast<std::size_t>(a)].apply(vc, grad);
      const auto& va = state.velocity[static_cast<std::size_t>(a)];
      for (std::size_t i = 0; i < n; ++i) out[i] -= va[i] * grad[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] = nodes.nodes()[i].is_boundary() ? 0.0 : vc[i] + dt * out[i];
    if (Index bad = first_non_finite_in(out); bad >= 0)
      throw DivergenceError("non-finite predicted velocity at node " + std::to_string(bad), state.step + 1, bad);
  }
  return vstar;
}

std::vector<double> pressure_solve(const Velocity& vstar, const OperatorSet& ops, PressureSolver& solver, double dt,
                                   std::span<const double> guess) {
  std::vector<double> rhs = divergence(ops.partial, vstar);
  for (double& r : rhs) r /= dt;
  return solver.solve(rhs, guess);
}

Velocity velocity_correct(const NodeSet& nodes, const Velocity& vstar, std::span<const double> pressure,
                          const OperatorSet& ops, double dt) {
  const std::size_t n = nodes.size();
  Velocity v(vstar.size(), std::vector<double>(n, 0.0));
  std::vector<double> grad(n);
  for (std::size_t c = 0; c < vstar.size(); ++c) {
    ops.partial[c].apply(pressure, grad);
    for (std::size_t i = 0; i < n; ++i) v[c][i] = nodes.nodes()[i].is_boundary() ? 0.0 : vstar[c][i] - dt * grad[i];
  }
  return v;
}

std::vector<double> temperature_step(const NodeSet& nodes, const FieldState& state, const OperatorSet& ops,
                                     const NeumannTemperature& neumann, double dt) {
  const std::size_t n = nodes.size();
  const auto& T = state.temperature;
  std::vector<double> rate = ops.laplacian.apply(T);
  std::vector<double> grad(n);
  for (int a = 0; a < nodes.dim(); ++a) {
    ops.partial[static_cast<std::size_t>(a)].apply(T, grad);
    const auto& va = state.velocity[static_cast<std::size_t>(a)];
    for (std::size_t i = 0; i < n; ++i) rate[i] -= va[i] * grad[i];
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = nodes.nodes()[i];
    if (!node.is_boundary())
      out[i] = T[i] + dt * rate[i];
    else if (node.role.type == NodeRole::Type::Dirichlet)
      out[i] = node.role.value;
    else
      out[i] = T[i];
  }
  neumann.apply(out);
  if (Index bad = first_non_finite_in(out); bad >= 0)
    throw DivergenceError("non-finite temperature at node " + std::to_string(bad), state.step + 1, bad);
  return out;
}

double nusselt_average(std::span<const double> temperature, const OperatorSet& ops, std::span<const Index> cold_nodes,
                       double reference_length, double delta_t) {
  if (delta_t == 0.0 || cold_nodes.empty()) return 0.0;
  double sum = 0.0;
  for (Index i : cold_nodes) sum += std::abs(ops.normal.apply_row(static_cast<std::size_t>(i), temperature));
  return reference_length / std::abs(delta_t) * sum / static_cast<double>(cold_nodes.size());
}

double max_interior_divergence(const NodeSet& nodes, const OperatorSet& ops, const Velocity& v) {
  const std::vector<double> div = divergence(ops.partial, v);
  double m = 0.0;
  for (std::size_t i = 0; i < div.size(); ++i)
    if (!nodes.nodes()[i].is_boundary()) m = std::max(m, std::abs(div[i]));
  return m;
}

double projection_divergence_bound(const NodeSet& nodes, const OperatorSet& ops, std::span<const double> pressure,
                                   const PressureSolver& solver, double tolerance, double dt) {
  const std::size_t n = nodes.size();
  std::vector<double> defect = ops.laplacian.apply(pressure);
  std::vector<double> grad(n), second(n);
  for (const SparseOperator& d : ops.partial) {
    d.apply(pressure, grad);
    for (std::size_t i = 0; i < n; ++i)
      if (nodes.nodes()[i].is_boundary()) grad[i] = 0.0;
    d.apply(grad, second);
    for (std::size_t i = 0; i < n; ++i) defect[i] -= second[i];
  }
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (!nodes.nodes()[i].is_boundary()) m = std::max(m, std::abs(defect[i]));
  return dt * (std::abs(solver.last_shift()) + 10.0 * tolerance * solver.last_rhs_norm() + m);
}

// ---------------------------------------------------------------------------------------------

RunOutcome run(const NodeSet& nodes, const OperatorSet& ops, const RunSettings& settings) {
  const TimeControls& tc = settings.time;
  if (!(tc.dt > 0.0)) throw ConfigError("time step must be positive");
  if (tc.t_end < 0.0) throw ConfigError("t_end must be non-negative");
  if (tc.nu_stride <= 0 || tc.nu_window <= 0) throw ConfigError("nu_stride and nu_window must be positive");
  if (tc.nu_window % tc.nu_stride != 0) throw ConfigError("nu_window must be a multiple of nu_stride");
  settings.physics.validate(nodes.dim());
  for (Index c : settings.cold_nodes)
    if (c < 0 || static_cast<std::size_t>(c) >= nodes.size() || !nodes[c].is_boundary())
      throw ConfigError("cold node set must reference boundary nodes");

  const auto start = Clock::now();
  const std::size_t n = nodes.size();
  PressureSolver pressure(nodes, ops, settings.poisson);
  NeumannTemperature neumann(nodes, ops);

  RunOutcome out;
  FieldState& s = out.state;
  s = FieldState::zeros(nodes.dim(), n);
  for (std::size_t i = 0; i < n; ++i) {
    const Node& node = nodes.nodes()[i];
    s.temperature[i] = node.role.type == NodeRole::Type::Dirichlet ? node.role.value : settings.initial_temperature;
  }
  neumann.apply(s.temperature);

  const long steps = static_cast<long>(std::ceil(tc.t_end / tc.dt - 1e-9));
  const long window_samples = tc.nu_window / tc.nu_stride;
  const double window_time = static_cast<double>(tc.nu_window) * tc.dt;
  std::vector<double> snapshots = settings.snapshot_times;
  std::sort(snapshots.begin(), snapshots.end());
  std::size_t next_snapshot = 0;
  while (next_snapshot < snapshots.size() && snapshots[next_snapshot] <= 0.0) {
    if (settings.on_snapshot) settings.on_snapshot(s);
    ++next_snapshot;
  }

  double previous_window_mean = std::numeric_limits<double>::quiet_NaN();
  auto window_mean = [&]() {
    double m = 0.0;
    for (std::size_t k = out.nu.size() - static_cast<std::size_t>(window_samples); k < out.nu.size(); ++k) m += out.nu[k].nu;
    return m / static_cast<double>(window_samples);
  };

  FieldState last_good;
  for (long step = 1; step <= steps; ++step) {
    if (settings.on_failure) last_good = s;
    try {
      Velocity vstar = momentum_predict(nodes, s, ops, settings.physics, tc.dt);
      const auto p0 = Clock::now();
      std::vector<double> p = pressure_solve(vstar, ops, pressure, tc.dt, s.pressure);
      out.poisson_seconds += seconds_since(p0);
      out.poisson_iterations += pressure.last_iterations();
      Velocity v = velocity_correct(nodes, vstar, p, ops, tc.dt);
      const bool sample = step % tc.nu_stride == 0;
      if (sample) {
        out.divergence.push_back({step, static_cast<double>(step) * tc.dt, max_interior_divergence(nodes, ops, vstar),
                                  max_interior_divergence(nodes, ops, v),
                                  projection_divergence_bound(nodes, ops, p, pressure, settings.poisson.tolerance, tc.dt)});
      }
      s.velocity = std::move(v);
      s.pressure = std::move(p);
      s.temperature = temperature_step(nodes, s, ops, neumann, tc.dt);
      s.step = step;
      s.time = static_cast<double>(step) * tc.dt;
      if (Index bad = s.first_non_finite(); bad >= 0)
        throw DivergenceError("non-finite field value at node " + std::to_string(bad), step, bad);
      if (sample) {
        out.nu.push_back({step, s.time, nusselt_average(s.temperature, ops, settings.cold_nodes,
                                                         settings.reference_length, settings.delta_t)});
      }
    } catch (const DivergenceError& e) {
      if (settings.on_failure) settings.on_failure(last_good);
      if (e.step() == 0) throw DivergenceError("step " + std::to_string(step) + ": " + e.what(), step, e.node());
      throw;
    } catch (const ConvergenceError& e) {
      if (settings.on_failure) settings.on_failure(s);
      throw ConvergenceError("step " + std::to_string(step) + ": " + e.what(), e.residual());
    }

    while (next_snapshot < snapshots.size() && snapshots[next_snapshot] <= s.time + 0.5 * tc.dt) {
      if (settings.on_snapshot) settings.on_snapshot(s);
      ++next_snapshot;
    }

    if (step % tc.nu_window == 0 && static_cast<long>(out.nu.size()) >= window_samples) {
      const double m = window_mean();
      if (settings.stop_when_steady && std::isfinite(previous_window_mean)) {
        const double scale = std::max(std::abs(m), std::numeric_limits<double>::min());
        const double rate = std::abs(m - previous_window_mean) / scale / window_time;
        if (rate < tc.steady_tol) {
          out.status = RunOutcome::Status::Steady;
          break;
        }
      }
      previous_window_mean = m;
    }
  }

  if (static_cast<long>(out.nu.size()) >= window_samples)
    out.final_nu = window_mean();
  else if (!out.nu.empty())
    out.final_nu = out.nu.back().nu;
  else
    out.final_nu = nusselt_average(s.temperature, ops, settings.cold_nodes, settings.reference_length, settings.delta_t);
  out.stepping_seconds = seconds_since(start);
  return out;
}

}  // namespace hfd
