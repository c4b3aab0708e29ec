#include "hfd/config.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace hfd;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_string(text, "test.ini");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("minimal dvd config fills the defaults") {
  const CaseConfig c = parse_config_string("[physics]\nRa = 1e6\nPr = 0.71\n");
  CHECK(c.type == CaseType::DVD);
  CHECK(c.discretization == Discretization::Hybrid);
  CHECK(c.dim == 2);
  CHECK(c.h_r == 0.0398);
  CHECK(c.spacing_s() == 0.0398);
  CHECK(c.delta_h == 4.0);
  CHECK(c.poisson.tolerance == 1e-8);
  CHECK(c.poisson.preconditioner == PoissonSolveSettings::Preconditioner::Lu);
  CHECK(c.physics.Ra == 1e6);
  CHECK(c.physics.Pr == 0.71);
  CHECK(c.physics.gravity == Vec(0.0, -1.0, 0.0));
  CHECK(c.T_cold == -0.5);
  CHECK(c.T_hot == 0.5);
  CHECK(c.seed == 1);
  CHECK_FALSE(c.has_obstacles());
  const auto w = c.walls();
  CHECK(w[0].is_dirichlet());
  CHECK(*w[0].value == -0.5);
  CHECK(*w[1].value == 0.5);
  CHECK_FALSE(w[2].is_dirichlet());
  CHECK_FALSE(w[3].is_dirichlet());
}

TEST_CASE("case defaults for the obstacle cases") {
  const CaseConfig o = default_config(CaseType::Obstacles2D);
  CHECK(o.h_r == 0.01);
  CHECK(o.spacing_s() == doctest::Approx(0.01 / 3));
  CHECK(o.layout.count == 4);
  CHECK(o.layout.shape == "star");
  CHECK(o.layout.mean_radius == 0.08);
  CHECK(o.layout.amplitude == 0.02);
  CHECK(o.layout.lobes == 5);
  CHECK(o.T_cold == 0.0);
  CHECK(o.T_hot == 1.0);
  CHECK(o.T_init == 0.0);
  CHECK_NOTHROW(o.validate());

  const CaseConfig s = default_config(CaseType::Spheres3D);
  CHECK(s.dim == 3);
  CHECK(s.h_r == 0.025);
  CHECK(s.spacing_s() == doctest::Approx(0.0125));
  CHECK(s.physics.Ra == 1e4);
  CHECK(s.layout.radius_min == 0.08);
  CHECK(s.layout.radius_max == 0.15);
  CHECK(s.physics.gravity == Vec(0.0, 0.0, -1.0));
  CHECK_NOTHROW(s.validate());
  // Box walls of the obstacle cases are insulated.
  for (const auto& w : s.walls()) CHECK_FALSE(w.is_dirichlet());
}

TEST_CASE("schema violations are rejected with their line") {
  CHECK(error_of("[nodes]\ndelta_h = -1\n").find("test.ini:2") != std::string::npos);
  CHECK_FALSE(error_of("[case]\ntype = spheres3d\n[domain]\ndim = 2\n").empty());
  CHECK(error_of("[case]\ntype = spheres3d\n[domain]\ndim = 2\n").find("test.ini:4: spheres3d requires a 3D") != std::string::npos);
  CHECK(error_of("[nodes]\nh_s = 0.03\nh_r = 0.02\n").find("test.ini:3") != std::string::npos);
  const std::string unknown = error_of("[physics]\nRa = 1e6\n\nfoo = 3\n");
  CHECK(unknown.find("test.ini:4") != std::string::npos);
  CHECK(unknown.find("foo") != std::string::npos);
  CHECK_FALSE(error_of("[nosuchsection]\nx = 1\n").empty());
  CHECK_FALSE(error_of("Ra = 1e6\n").empty());
  CHECK(error_of("[physics\nRa = 1\n").find("test.ini:1") != std::string::npos);
  CHECK(error_of("[physics]\nRa\n").find("test.ini:2") != std::string::npos);
  CHECK(error_of("[physics]\nRa =\n").find("test.ini:2") != std::string::npos);
  CHECK_FALSE(error_of("[physics]\nRa = abc\n").empty());
  CHECK_FALSE(error_of("[physics]\nRa = 1e6x\n").empty());
  CHECK_FALSE(error_of("[physics]\nRa = -5\n").empty());
  CHECK_FALSE(error_of("[nodes]\nh_r = 0.02\nh_s = 0.03\n").empty());
  CHECK_FALSE(error_of("[time]\nnu_stride = 7\nnu_window = 100\n").empty());
  CHECK_FALSE(error_of("[poisson]\ntol = 2\n").empty());
  CHECK_FALSE(error_of("[poisson]\npreconditioner = jacobi\n").empty());
  CHECK_FALSE(error_of("[case]\ntype = moon\n").empty());
  CHECK_FALSE(error_of("[case]\ndiscretization = pure-regular\ntype = obstacles2d\n").empty());
  CHECK_FALSE(error_of("[obstacle]\nshape = circle\ncenter = 0.5, 0.5\nradius = 0\n").empty());
  CHECK_FALSE(error_of("[case]\ntype = custom\n[obstacle]\nshape = circle\ncenter = 0.5, 0.5\n").empty());
}

TEST_CASE("sections, comments, obstacles and wall overrides") {
  const CaseConfig c = parse_config_string(R"(
# comment
[case]
type = custom        ; trailing comment
name = two_circles
seed = 42
[nodes]
h_r = 0.02
h_s_ratio = 0.5
delta_h = 6
[poisson]
preconditioner = ilut
tol = 1e-9
[walls]
x_lo = 0
y_hi = insulated
[obstacle]
shape = circle
center = 0.3, 0.5
radius = 0.1
temperature = 1
[obstacle]
shape = ellipse
center = 0.7, 0.5
semi_a = 0.1
semi_b = 0.05
)");
  CHECK(c.type == CaseType::Custom);
  CHECK(c.name == "two_circles");
  CHECK(c.seed == 42);
  CHECK(c.h_r == 0.02);
  CHECK(c.spacing_s() == 0.01);
  CHECK(c.delta_h == 6.0);
  CHECK(c.poisson.preconditioner == PoissonSolveSettings::Preconditioner::Ilut);
  CHECK(c.poisson.tolerance == 1e-9);
  REQUIRE(c.obstacles.size() == 2);
  CHECK(std::holds_alternative<Circle>(c.obstacles[0].shape));
  CHECK(c.obstacles[0].wall.is_dirichlet());
  CHECK(*c.obstacles[0].wall.value == 1.0);
  CHECK_FALSE(c.obstacles[1].wall.is_dirichlet());
  const auto w = c.walls();
  CHECK(w[0].is_dirichlet());
  CHECK(*w[0].value == 0.0);
  CHECK_FALSE(w[3].is_dirichlet());
}

TEST_CASE("parse_config reads files and names the case after the file") {
  const auto path = std::filesystem::temp_directory_path() / "hfd_test_case.ini";
  {
    std::ofstream out(path);
    out << "[case]\ntype = dvd-split\nsplit = vertical\n[nodes]\ndelta_h = 10\n";
  }
  const CaseConfig c = parse_config(path.string());
  CHECK(c.type == CaseType::DVDSplit);
  CHECK(c.split == SplitOrientation::Vertical);
  CHECK(c.name == "hfd_test_case");
  std::filesystem::remove(path);
  CHECK_THROWS_AS(parse_config(path.string()), ConfigError);
}

TEST_CASE("the repository configs parse") {
  for (const char* name : {"configs/dvd.ini", "configs/dvd-split.ini", "configs/obstacles2d.ini", "configs/spheres3d.ini"}) {
    CAPTURE(name);
    CHECK_NOTHROW(parse_config(name));
  }
}

TEST_CASE("set_parameter: bare names, dotted names, and h keeping the spacing ratio") {
  CaseConfig c = default_config(CaseType::Obstacles2D);
  set_parameter(c, "h", "0.02");
  CHECK(c.h_r == 0.02);
  CHECK(c.spacing_s() == doctest::Approx(0.02 / 3));
  set_parameter(c, "delta_h", "16");
  CHECK(c.delta_h == 16.0);
  set_parameter(c, "physics.Ra", "1e5");
  CHECK(c.physics.Ra == 1e5);
  set_parameter(c, "discretization", "pure-scattered");
  CHECK(c.discretization == Discretization::PureScattered);
  CHECK_THROWS_AS(set_parameter(c, "bogus", "1"), ConfigError);
  CHECK_THROWS_AS(set_parameter(c, "type", "dvd"), ConfigError);
  CHECK_THROWS_AS(set_parameter(c, "delta_h", "-2"), ConfigError);
  CHECK_THROWS_AS(set_parameter(c, "h", "0"), ConfigError);
}

TEST_CASE("enum names round-trip through the parser") {
  for (Discretization d : {Discretization::PureRegular, Discretization::PureScattered, Discretization::Hybrid}) {
    CaseConfig c = default_config(CaseType::DVD);
    set_parameter(c, "discretization", to_string(d));
    CHECK(c.discretization == d);
  }
  for (CaseType t : {CaseType::DVD, CaseType::DVDSplit, CaseType::Obstacles2D, CaseType::Spheres3D, CaseType::Custom}) {
    const CaseConfig c = parse_config_string(std::string("[case]\ntype = ") + to_string(t) + "\n");
    CHECK(c.type == t);
  }
}
