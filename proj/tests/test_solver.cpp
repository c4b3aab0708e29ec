#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace hfd;
using hfd::test::unit_square;
using std::numbers::pi;

namespace {

FieldState zero_state(const NodeSet& nodes) { return FieldState::zeros(nodes.dim(), nodes.size()); }

std::vector<Index> cold_wall(const NodeSet& nodes, double cold) {
  std::vector<Index> out;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& n = nodes.nodes()[i];
    if (n.is_boundary() && n.role.type == NodeRole::Type::Dirichlet && n.role.value == cold && !n.origin.corner)
      out.push_back(static_cast<Index>(i));
  }
  return out;
}

double manufactured_pressure_error(const test::Ops& o, const PoissonSolveSettings& s = {}) {
  const test::ManufacturedPressure m = test::manufactured_pressure(o, s);
  CHECK(m.residual <= s.tolerance);
  CHECK(m.gauge_value == 0.0);
  return m.error;
}

RunSettings cavity_settings(const NodeSet& nodes, double dt, double t_end, double cold = -0.5, double hot = 0.5) {
  RunSettings rs;
  rs.time.dt = dt;
  rs.time.t_end = t_end;
  rs.time.nu_stride = 1;
  rs.time.nu_window = 10;
  rs.cold_nodes = cold_wall(nodes, cold);
  rs.delta_t = hot - cold;
  rs.stop_when_steady = false;
  return rs;
}

}  // namespace

TEST_CASE("momentum predictor: quiescent state and the buoyancy kick") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::DiagonalQuarters, 0.05));
  PhysicsParams params;
  const double dt = 1e-4;
  for (const auto& c : momentum_predict(o.nodes, zero_state(o.nodes), o.ops, params, dt)) CHECK(test::max_abs(c) == 0.0);

  FieldState s = zero_state(o.nodes);
  std::fill(s.temperature.begin(), s.temperature.end(), 1.0);
  const Velocity v = momentum_predict(o.nodes, s, o.ops, params, dt);
  for (std::size_t i = 0; i < o.nodes.size(); ++i) {
    const bool b = o.nodes.nodes()[i].is_boundary();
    CHECK(v[0][i] == 0.0);
    CHECK(v[1][i] == doctest::Approx(b ? 0.0 : dt * params.Ra * params.Pr).epsilon(1e-14));
  }
}

TEST_CASE("momentum predictor: linear velocity advects exactly") {
  // v = (a + b x + c y, d + e x + f y); lap v = 0 and (v.grad) v is exact for linear fields.
  for (RegionRule rule : {RegionRule::AllRegular, RegionRule::AllScattered}) {
    const auto o = test::make_ops(test::make_nodes(unit_square(), rule, 0.05));
    PhysicsParams params;
    params.Ra = 1e3;
    const double dt = 1e-3;
    FieldState s = zero_state(o.nodes);
    auto u = [](const Vec& x) { return 0.3 + 1.1 * x.x() - 0.7 * x.y(); };
    auto w = [](const Vec& x) { return -0.2 + 0.4 * x.x() + 0.9 * x.y(); };
    s.velocity = {test::sample(o.nodes, u), test::sample(o.nodes, w)};
    std::fill(s.temperature.begin(), s.temperature.end(), 0.25);
    const Velocity v = momentum_predict(o.nodes, s, o.ops, params, dt);
    for (std::size_t i = 0; i < o.nodes.size(); ++i) {
      if (o.nodes.nodes()[i].is_boundary()) continue;
      const Vec& x = o.nodes.nodes()[i].position;
      const double ui = u(x), wi = w(x);
      const double adv_u = ui * 1.1 + wi * -0.7, adv_w = ui * 0.4 + wi * 0.9;
      CHECK(v[0][i] == doctest::Approx(ui - dt * adv_u).epsilon(1e-9));
      CHECK(v[1][i] == doctest::Approx(wi + dt * (-adv_w + params.Ra * params.Pr * 0.25)).epsilon(1e-9));
    }
  }
}

TEST_CASE("non-finite predictions raise a divergence error") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::AllRegular, 0.1));
  FieldState s = zero_state(o.nodes);
  Index interior = 0;
  while (o.nodes[interior].is_boundary()) ++interior;
  s.temperature[static_cast<std::size_t>(interior)] = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(momentum_predict(o.nodes, s, o.ops, PhysicsParams{}, 1e-4), DivergenceError);
}

TEST_CASE("pressure: solenoidal v* gives zero pressure") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::DiagonalQuarters, 0.04));
  PressureSolver solver(o.nodes, o.ops, {});
  const Velocity zero(2, std::vector<double>(o.nodes.size(), 0.0));
  CHECK(test::max_abs(pressure_solve(zero, o.ops, solver, 1e-4)) == 0.0);
  const Velocity rot{test::sample(o.nodes, [](const Vec& x) { return x.y(); }),
                     test::sample(o.nodes, [](const Vec& x) { return -x.x(); })};
  CHECK(test::max_abs(pressure_solve(rot, o.ops, solver, 1e-4)) <= 1e-8);
}

TEST_CASE("pressure: manufactured solution converges at second order") {
  for (RegionRule rule : {RegionRule::AllRegular, RegionRule::AllScattered, RegionRule::DiagonalQuarters}) {
    // h = 0.04 is still pre-asymptotic on the lattice, where the one-sided Neumann rows dominate.
    const double e1 = manufactured_pressure_error(test::make_ops(test::make_nodes(unit_square(), rule, 0.02)));
    const double e2 = manufactured_pressure_error(test::make_ops(test::make_nodes(unit_square(), rule, 0.01)));
    const double e3 = manufactured_pressure_error(test::make_ops(test::make_nodes(unit_square(), rule, 0.005)));
    const double order = std::log2(e1 / e3) / 2.0;
    MESSAGE(static_cast<int>(rule) << ": errors " << e1 << " " << e2 << " " << e3 << ", order " << order);
    CHECK(order >= 1.8);
    CHECK(e3 <= 1e-3);
  }
}

TEST_CASE("pressure: LU and ILUT preconditioners agree; the compatibility shift is consistent") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::DiagonalQuarters, 0.03));
  PoissonSolveSettings lu, ilut;
  ilut.preconditioner = PoissonSolveSettings::Preconditioner::Ilut;
  CHECK(lu.effective_restart() == 5);
  CHECK(ilut.effective_restart() == 50);
  PressureSolver a(o.nodes, o.ops, lu), b(o.nodes, o.ops, ilut);
  CHECK(a.gauge() == default_gauge(o.nodes));
  CHECK_FALSE(o.nodes[a.gauge()].is_boundary());
  const Velocity v = test::manufactured_vstar(o.nodes, true);
  const auto pa = pressure_solve(v, o.ops, a, 1e-3);
  const auto pb = pressure_solve(v, o.ops, b, 1e-3);
  CHECK(a.last_iterations() <= 2);
  CHECK(b.last_iterations() >= 1);
  double diff = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) diff = std::max(diff, std::abs(pa[i] - pb[i]));
  CHECK(diff <= 1e-6 * test::max_abs(pa));
  CHECK(a.last_shift() == doctest::Approx(b.last_shift()).epsilon(1e-8));
  // psi annihilates the shifted interior rhs.
  const auto rhs = divergence(o.ops.partial, v);
  const Eigen::VectorXd& psi = a.null_vector();
  CHECK(psi[a.gauge()] == doctest::Approx(1.0));
  double dot = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < rhs.size(); ++i) {
    if (o.nodes.nodes()[i].is_boundary()) continue;
    const double bi = rhs[i] / 1e-3 - a.last_shift();
    dot += psi[static_cast<Eigen::Index>(i)] * bi;
    scale += std::abs(psi[static_cast<Eigen::Index>(i)] * bi);
  }
  CHECK(std::abs(dot) <= 1e-12 * scale);
}

TEST_CASE("pressure: iteration cap raises a convergence error with the residual") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::AllScattered, 0.03));
  PoissonSolveSettings s;
  s.preconditioner = PoissonSolveSettings::Preconditioner::Ilut;
  s.max_iterations = 1;
  s.tolerance = 1e-12;
  PressureSolver solver(o.nodes, o.ops, s);
  try {
    pressure_solve(test::manufactured_vstar(o.nodes, true), o.ops, solver, 1e-3);
    FAIL("expected a convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.residual() > s.tolerance);
  }
}

TEST_CASE("velocity correction: constant pressure, no-slip, and the projection bound") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::DiagonalQuarters, 0.04));
  const Velocity vstar = test::manufactured_vstar(o.nodes, true);
  const std::vector<double> pconst(o.nodes.size(), 3.5);
  const Velocity same = velocity_correct(o.nodes, vstar, pconst, o.ops, 1e-3);
  for (int c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < o.nodes.size(); ++i)
      CHECK(std::abs(same[static_cast<std::size_t>(c)][i] - vstar[static_cast<std::size_t>(c)][i]) <= 1e-9);

  for (double h : {0.04, 0.02}) {
    const auto oh = test::make_ops(test::make_nodes(unit_square(), RegionRule::DiagonalQuarters, h));
    const double dt = 1e-3;
    PoissonSolveSettings settings;
    PressureSolver solver(oh.nodes, oh.ops, settings);
    const Velocity vs = test::manufactured_vstar(oh.nodes, true);
    const auto p = pressure_solve(vs, oh.ops, solver, dt);
    const Velocity v = velocity_correct(oh.nodes, vs, p, oh.ops, dt);
    for (std::size_t i = 0; i < oh.nodes.size(); ++i)
      if (oh.nodes.nodes()[i].is_boundary()) {
        CHECK(v[0][i] == 0.0);
        CHECK(v[1][i] == 0.0);
      }
    const double before = max_interior_divergence(oh.nodes, oh.ops, vs);
    const double after = max_interior_divergence(oh.nodes, oh.ops, v);
    const double bound = projection_divergence_bound(oh.nodes, oh.ops, p, solver, settings.tolerance, dt);
    MESSAGE("h " << h << ": div before " << before << ", after " << after << ", bound " << bound);
    CHECK(after <= bound);
    CHECK(after < before);
    // The corrected field approaches the solenoidal part.
    const Velocity w = test::manufactured_vstar(oh.nodes, false);
    double err = 0.0;
    for (int c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < oh.nodes.size(); ++i)
        err = std::max(err, std::abs(v[static_cast<std::size_t>(c)][i] - w[static_cast<std::size_t>(c)][i]));
    CHECK(err <= 0.15 * pi);
  }
}

TEST_CASE("temperature: linear conduction profile is steady") {
  for (RegionRule rule : {RegionRule::AllRegular, RegionRule::DiagonalQuarters}) {
    const auto o = test::make_ops(test::make_nodes(unit_square(), rule, 0.04));
    NeumannTemperature neumann(o.nodes, o.ops);
    FieldState s = zero_state(o.nodes);
    s.temperature = test::sample(o.nodes, [](const Vec& x) { return x.x() - 0.5; });
    const double dt = TimeControls::stable_dt(o.nodes.min_h());
    for (int k = 0; k < 20; ++k) {
      const auto next = temperature_step(o.nodes, s, o.ops, neumann, dt);
      double change = 0.0;
      for (std::size_t i = 0; i < next.size(); ++i) change = std::max(change, std::abs(next[i] - s.temperature[i]));
      CHECK(change <= 1e-9);
      s.temperature = next;
    }
  }
}

TEST_CASE("temperature: sin(pi x) decays at pi^2 to O(h^2)") {
  const double exact = pi * pi;
  const double r1 = test::heat_decay_rate(RegionRule::AllRegular, 0.04), r2 = test::heat_decay_rate(RegionRule::AllRegular, 0.02);
  const double order = std::log2(std::abs(r1 - exact) / std::abs(r2 - exact));
  MESSAGE("lattice rates " << r1 << " " << r2 << ", order " << order);
  CHECK(order >= 1.8);
  for (RegionRule rule : {RegionRule::AllRegular, RegionRule::AllScattered, RegionRule::DiagonalQuarters}) {
    const double h = 0.02;
    const double r = test::heat_decay_rate(rule, h);
    MESSAGE(static_cast<int>(rule) << ": rate " << r << ", relative error " << (r - exact) / exact);
    // O(h^2): within six times the lattice truncation constant pi^2 / 12.
    CHECK(std::abs(r - exact) / exact <= 6.0 * pi * pi / 12.0 * h * h);
  }
}

TEST_CASE("temperature: insulated walls carry zero normal derivative, Dirichlet values are exact") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::DiagonalQuarters, 0.04));
  NeumannTemperature neumann(o.nodes, o.ops);
  CHECK(!neumann.nodes().empty());
  FieldState s = zero_state(o.nodes);
  s.temperature = test::sample(o.nodes, [](const Vec& x) { return std::sin(3 * x.x()) * std::cos(2 * x.y()) + x.y(); });
  s.velocity = {test::sample(o.nodes, [](const Vec& x) { return x.y() * (1 - x.y()); }),
                test::sample(o.nodes, [](const Vec& x) { return x.x() * (1 - x.x()); })};
  const auto T = temperature_step(o.nodes, s, o.ops, neumann, 1e-4);
  const double scale = test::max_abs(T);
  const auto dn = o.ops.normal.apply(T);
  for (std::size_t i = 0; i < o.nodes.size(); ++i) {
    const Node& n = o.nodes.nodes()[i];
    if (!n.is_boundary()) continue;
    if (n.role.type == NodeRole::Type::Neumann) CHECK(std::abs(dn[i]) <= 1e-6 * scale);
    if (n.role.type == NodeRole::Type::Dirichlet) CHECK(T[i] == n.role.value);
  }
}

TEST_CASE("Nusselt number: conduction limit and constant temperature") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::DiagonalQuarters, 0.04));
  const auto cold = cold_wall(o.nodes, -0.5);
  CHECK(cold.size() == 24);
  const auto T = test::sample(o.nodes, [](const Vec& x) { return x.x() - 0.5; });
  CHECK(nusselt_average(T, o.ops, cold, 1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
  const std::vector<double> flat(o.nodes.size(), 0.3);
  CHECK(nusselt_average(flat, o.ops, cold, 1.0, 1.0) <= 1e-9);
  CHECK(nusselt_average(T, o.ops, cold, 1.0, 0.0) == 0.0);
}

TEST_CASE("run: equal wall temperatures keep the fluid at rest") {
  const NodeSet nodes = test::make_nodes(unit_square({}, test::cavity_walls(0.0, 0.0)), RegionRule::DiagonalQuarters, 0.05);
  const auto o = test::make_ops(nodes);
  RunSettings rs = cavity_settings(o.nodes, 1e-4, 0.005, 0.0, 0.0);
  const RunOutcome out = run(o.nodes, o.ops, rs);
  CHECK(out.state.step == 50);
  for (const auto& c : out.state.velocity) CHECK(test::max_abs(c) == 0.0);
  for (const NuSample& s : out.nu) CHECK(s.nu == 0.0);
}

TEST_CASE("run: bitwise determinism, boundary contracts and the monitored projection bound") {
  auto once = []() {
    const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::DiagonalQuarters, 0.05));
    RunSettings rs = cavity_settings(o.nodes, 1e-4, 0.01);
    rs.physics.Ra = 1e4;
    std::vector<FieldState> snaps;
    rs.snapshot_times = {0.002, 0.005, 0.008};
    rs.on_snapshot = [&snaps](const FieldState& s) { snaps.push_back(s); };
    RunOutcome out = run(o.nodes, o.ops, rs);
    snaps.push_back(out.state);
    for (const FieldState& s : snaps)
      for (std::size_t i = 0; i < o.nodes.size(); ++i) {
        const Node& n = o.nodes.nodes()[i];
        if (!n.is_boundary()) continue;
        CHECK(s.velocity[0][i] == 0.0);
        CHECK(s.velocity[1][i] == 0.0);
        if (n.role.type == NodeRole::Type::Dirichlet) CHECK(s.temperature[i] == n.role.value);
      }
    CHECK(snaps.size() == 4);
    for (const DivergenceSample& d : out.divergence) CHECK(d.corrected <= d.bound);
    return out;
  };
  const RunOutcome a = once(), b = once();
  REQUIRE(a.nu.size() == b.nu.size());
  REQUIRE(a.nu.size() == 100);
  for (std::size_t k = 0; k < a.nu.size(); ++k) CHECK(a.nu[k].nu == b.nu[k].nu);
  CHECK(a.final_nu == b.final_nu);
  CHECK(a.final_nu > 1.0);
  CHECK(a.state.temperature == b.state.temperature);
}

TEST_CASE("run: invalid controls and physics are rejected") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::AllRegular, 0.1));
  RunSettings rs = cavity_settings(o.nodes, 1e-4, 0.001);
  RunSettings bad = rs;
  bad.time.dt = 0.0;
  CHECK_THROWS_AS(run(o.nodes, o.ops, bad), ConfigError);
  bad = rs;
  bad.time.nu_window = 15;
  bad.time.nu_stride = 10;
  CHECK_THROWS_AS(run(o.nodes, o.ops, bad), ConfigError);
  bad = rs;
  bad.physics.Ra = -1.0;
  CHECK_THROWS_AS(run(o.nodes, o.ops, bad), ConfigError);
  bad = rs;
  bad.physics.gravity = Vec(0.0, -2.0, 0.0);
  CHECK_THROWS_AS(run(o.nodes, o.ops, bad), ConfigError);
  bad = rs;
  bad.cold_nodes = {0};
  while (o.nodes[bad.cold_nodes[0]].is_boundary()) ++bad.cold_nodes[0];
  CHECK_THROWS_AS(run(o.nodes, o.ops, bad), ConfigError);
}

TEST_CASE("run: blow-up raises a divergence error and hands back the last finite state") {
  const auto o = test::make_ops(test::make_nodes(unit_square(), RegionRule::AllRegular, 0.1));
  RunSettings rs = cavity_settings(o.nodes, 0.05, 100.0);
  rs.physics.Ra = 1e8;
  bool called = false;
  rs.on_failure = [&called](const FieldState& s) {
    called = true;
    CHECK(s.first_non_finite() < 0);
  };
  CHECK_THROWS_AS(run(o.nodes, o.ops, rs), DivergenceError);
  CHECK(called);
}

TEST_CASE("time step formula uses the smallest spacing") {
  CHECK(TimeControls::stable_dt(0.01) == doctest::Approx(0.1 * 0.01 * 0.01 / 2));
  CHECK(TimeControls::stable_dt(0.02, 0.2) == doctest::Approx(0.2 * 0.02 * 0.02 / 2));
}
