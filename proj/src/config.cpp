#include "hfd/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace hfd {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

double to_double(const std::string& v) {
  double out = 0.0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end || !std::isfinite(out)) throw ConfigError("expected a number, got '" + v + "'");
  return out;
}

long to_long(const std::string& v) {
  long out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const char* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v) {
  const std::string s = lower(v);
  if (s == "true" || s == "yes" || s == "on" || s == "1") return true;
  if (s == "false" || s == "no" || s == "off" || s == "0") return false;
  throw ConfigError("expected a boolean, got '" + v + "'");
}

std::vector<double> to_list(const std::string& v) {
  std::string s = v;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) out.push_back(to_double(tok));
  return out;
}

Vec to_vec(const std::string& v, int max_len) {
  const auto l = to_list(v);
  if (l.empty() || static_cast<int>(l.size()) > max_len)
    throw ConfigError("expected a list of up to " + std::to_string(max_len) + " numbers, got '" + v + "'");
  Vec out = Vec::Zero();
  for (std::size_t i = 0; i < l.size(); ++i) out[static_cast<Eigen::Index>(i)] = l[i];
  return out;
}

WallCondition to_wall(const std::string& v) {
  const std::string s = lower(v);
  if (s == "insulated" || s == "neumann" || s == "adiabatic") return WallCondition::insulated();
  return WallCondition::dirichlet(to_double(v));
}

CaseType to_case(const std::string& v) {
  const std::string s = lower(v);
  if (s == "dvd") return CaseType::DVD;
  if (s == "dvd-split") return CaseType::DVDSplit;
  if (s == "obstacles2d") return CaseType::Obstacles2D;
  if (s == "spheres3d") return CaseType::Spheres3D;
  if (s == "custom") return CaseType::Custom;
  throw ConfigError("unknown case type '" + v + "'");
}

Discretization to_discretization(const std::string& v) {
  const std::string s = lower(v);
  if (s == "pure-regular" || s == "regular") return Discretization::PureRegular;
  if (s == "pure-scattered" || s == "scattered") return Discretization::PureScattered;
  if (s == "hybrid") return Discretization::Hybrid;
  throw ConfigError("unknown discretization '" + v + "'");
}

SplitOrientation to_split(const std::string& v) {
  const std::string s = lower(v);
  if (s == "horizontal") return SplitOrientation::Horizontal;
  if (s == "vertical") return SplitOrientation::Vertical;
  throw ConfigError("unknown split orientation '" + v + "'");
}

int wall_face(const std::string& key) {
  static const std::map<std::string, int> faces{{"x_lo", 0}, {"x_hi", 1}, {"y_lo", 2},
                                                {"y_hi", 3}, {"z_lo", 4}, {"z_hi", 5}};
  const auto it = faces.find(key);
  return it == faces.end() ? -1 : it->second;
}

/// Collects the keys of one [obstacle] section.
struct ObstacleDraft {
  std::map<std::string, std::string> keys;
  int line = 0;
};

ObstacleConfig build_obstacle(const ObstacleDraft& d, const CaseConfig& cfg) {
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = d.keys.find(k);
    if (it == d.keys.end()) return std::nullopt;
    return it->second;
  };
  auto need = [&](const std::string& k) {
    auto v = get(k);
    if (!v) throw ConfigError("obstacle is missing '" + k + "'");
    return *v;
  };
  const std::string shape = lower(get("shape").value_or(cfg.dim == 3 ? "sphere" : "circle"));
  const Vec center = to_vec(need("center"), cfg.dim);
  WallCondition wall = to_wall(get("temperature").value_or("insulated"));
  if (shape == "circle" || shape == "sphere") return {Circle{center, to_double(need("radius"))}, wall};
  if (shape == "ellipse")
    return {Ellipse{center, to_double(need("semi_a")), to_double(need("semi_b")), to_double(get("rotation").value_or("0"))},
            wall};
  if (shape == "star") {
    return {Star{center, to_double(need("mean_radius")), to_double(need("amplitude")),
                 static_cast<int>(to_long(get("lobes").value_or("5"))), to_double(get("phase").value_or("0"))},
            wall};
  }
  throw ConfigError("unknown obstacle shape '" + shape + "'");
}

const std::vector<std::string> kObstacleKeys{"shape", "center", "radius", "semi_a", "semi_b", "rotation",
                                             "mean_radius", "amplitude", "lobes", "phase", "temperature"};

struct ApplyState {
  bool gravity_set = false;
};

void apply_key(CaseConfig& c, const std::string& section, const std::string& key, const std::string& v,
               ApplyState& st) {
  auto unknown = [&]() { throw ConfigError("unknown key '" + key + "' in section [" + section + "]"); };
  if (section == "case") {
    if (key == "type") c.type = to_case(v);
    else if (key == "name") c.name = v;
    else if (key == "discretization") c.discretization = to_discretization(v);
    else if (key == "split") c.split = to_split(v);
    else if (key == "seed") c.seed = to_u64(v);
    else unknown();
  } else if (section == "domain") {
    if (key == "dim") c.dim = static_cast<int>(to_long(v));
    else if (key == "lower") c.box.lower = to_vec(v, 3);
    else if (key == "upper") c.box.upper = to_vec(v, 3);
    else unknown();
  } else if (section == "nodes") {
    if (key == "h_r" || key == "h") c.h_r = to_double(v);
    else if (key == "h_s") c.h_s = to_double(v);
    else if (key == "h_s_ratio") { c.h_s_ratio = to_double(v); c.h_s.reset(); }
    else if (key == "delta_h") c.delta_h = to_double(v);
    else unknown();
  } else if (section == "physics") {
    if (key == "Ra" || key == "ra") c.physics.Ra = to_double(v);
    else if (key == "Pr" || key == "pr") c.physics.Pr = to_double(v);
    else if (key == "T_cold") c.T_cold = to_double(v);
    else if (key == "T_hot") c.T_hot = to_double(v);
    else if (key == "T_init") c.T_init = to_double(v);
    else if (key == "gravity") { c.physics.gravity = to_vec(v, 3); st.gravity_set = true; }
    else unknown();
  } else if (section == "time") {
    if (key == "t_end") c.t_end = to_double(v);
    else if (key == "dt") c.dt = to_double(v);
    else if (key == "dt_safety") c.dt_safety = to_double(v);
    else if (key == "dt_max") c.dt_max = to_double(v);
    else if (key == "steady_tol") c.steady_tol = to_double(v);
    else if (key == "nu_stride") c.nu_stride = to_long(v);
    else if (key == "nu_window") c.nu_window = to_long(v);
    else if (key == "snapshots") c.snapshots = to_list(v);
    else if (key == "stop_when_steady") c.stop_when_steady = to_bool(v);
    else unknown();
  } else if (section == "poisson") {
    if (key == "tol") c.poisson.tolerance = to_double(v);
    else if (key == "max_iter") c.poisson.max_iterations = static_cast<int>(to_long(v));
    else if (key == "droptol") c.poisson.ilut_droptol = to_double(v);
    else if (key == "fill") c.poisson.ilut_fill = static_cast<int>(to_long(v));
    else if (key == "restart") c.poisson.restart = static_cast<int>(to_long(v));
    else if (key == "preconditioner") {
      if (v == "lu") c.poisson.preconditioner = PoissonSolveSettings::Preconditioner::Lu;
      else if (v == "ilut") c.poisson.preconditioner = PoissonSolveSettings::Preconditioner::Ilut;
      else throw ConfigError("preconditioner must be lu or ilut, got '" + v + "'");
    }
    else unknown();
  } else if (section == "weights") {
    if (key == "condition") c.condition = to_bool(v);
    else unknown();
  } else if (section == "output") {
    if (key == "dir") c.output_dir = v;
    else unknown();
  } else if (section == "obstacles") {
    ObstacleLayout& l = c.layout;
    if (key == "count") l.count = static_cast<int>(to_long(v));
    else if (key == "cold") l.cold = static_cast<int>(to_long(v));
    else if (key == "shape") l.shape = lower(v);
    else if (key == "mean_radius") l.mean_radius = to_double(v);
    else if (key == "amplitude") l.amplitude = to_double(v);
    else if (key == "lobes") l.lobes = static_cast<int>(to_long(v));
    else if (key == "radius_min") l.radius_min = to_double(v);
    else if (key == "radius_max") l.radius_max = to_double(v);
    else if (key == "gap") l.gap = to_double(v);
    else if (key == "wall_gap") l.wall_gap = to_double(v);
    else unknown();
  } else if (section == "walls") {
    const int f = wall_face(key);
    if (f < 0) unknown();
    c.wall_overrides[static_cast<std::size_t>(f)] = to_wall(v);
  } else {
    throw ConfigError("unknown section [" + section + "]");
  }
}

void finish(CaseConfig& c, const ApplyState& st) {
  if (c.dim == 3 && !st.gravity_set) c.physics.gravity = Vec(0.0, 0.0, -1.0);
  if (c.dim == 2) {
    c.box.lower.z() = 0.0;
    c.box.upper.z() = 0.0;
  }
}

std::string location(const std::string& source, int line) { return source + ":" + std::to_string(line) + ": "; }

}  // namespace

const char* to_string(CaseType t) {
  switch (t) {
    case CaseType::DVD: return "dvd";
    case CaseType::DVDSplit: return "dvd-split";
    case CaseType::Obstacles2D: return "obstacles2d";
    case CaseType::Spheres3D: return "spheres3d";
    case CaseType::Custom: return "custom";
  }
  return "?";
}

const char* to_string(Discretization d) {
  switch (d) {
    case Discretization::PureRegular: return "pure-regular";
    case Discretization::PureScattered: return "pure-scattered";
    case Discretization::Hybrid: return "hybrid";
  }
  return "?";
}

const char* to_string(SplitOrientation s) { return s == SplitOrientation::Horizontal ? "horizontal" : "vertical"; }

CaseConfig default_config(CaseType type) {
  CaseConfig c;
  c.type = type;
  c.name = to_string(type);
  c.box = Box{Vec(0.0, 0.0, 0.0), Vec(1.0, 1.0, 0.0)};
  switch (type) {
    case CaseType::DVD:
    case CaseType::DVDSplit:
    case CaseType::Custom:
      break;
    case CaseType::Obstacles2D:
      c.h_r = 0.01;
      c.h_s_ratio = 1.0 / 3.0;
      c.T_cold = 0.0;
      c.T_hot = 1.0;
      c.t_end = 1.0;
      c.layout.count = 4;
      c.layout.shape = "star";
      break;
    case CaseType::Spheres3D:
      c.dim = 3;
      c.box = Box{Vec(0.0, 0.0, 0.0), Vec(1.0, 1.0, 1.0)};
      c.h_r = 0.025;
      c.h_s_ratio = 0.5;
      c.physics.Ra = 1e4;
      c.physics.gravity = Vec(0.0, 0.0, -1.0);
      c.T_cold = 0.0;
      c.T_hot = 1.0;
      c.t_end = 1.0;
      c.layout.count = 4;
      c.layout.shape = "sphere";
      break;
  }
  return c;
}

std::array<WallCondition, 6> CaseConfig::walls() const {
  std::array<WallCondition, 6> w;
  w.fill(WallCondition::insulated());
  if (type == CaseType::DVD || type == CaseType::DVDSplit) {
    w[static_cast<std::size_t>(face_id(0, false))] = WallCondition::dirichlet(T_cold);
    w[static_cast<std::size_t>(face_id(0, true))] = WallCondition::dirichlet(T_hot);
  }
  for (std::size_t f = 0; f < 6; ++f)
    if (wall_overrides[f]) w[f] = *wall_overrides[f];
  return w;
}

bool CaseConfig::has_obstacles() const { return !obstacles.empty() || layout.count > 0; }

void CaseConfig::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("dim must be 2 or 3");
  if (type == CaseType::Spheres3D && dim != 3) throw ConfigError("spheres3d requires a 3D domain");
  if ((type == CaseType::DVD || type == CaseType::DVDSplit || type == CaseType::Obstacles2D) && dim != 2)
    throw ConfigError(std::string(to_string(type)) + " requires a 2D domain");
  for (int a = 0; a < dim; ++a)
    if (!(box.upper[a] > box.lower[a])) throw ConfigError("domain upper corner must exceed the lower corner");
  if (!(h_r > 0.0)) throw ConfigError("h_r must be positive");
  const double hs = spacing_s();
  if (!(hs > 0.0) || hs > h_r) throw ConfigError("h_s must lie in (0, h_r]");
  if (!(delta_h >= 0.0)) throw ConfigError("delta_h must be non-negative");
  if (!(physics.Ra > 0.0)) throw ConfigError("Ra must be positive");
  if (!(physics.Pr > 0.0)) throw ConfigError("Pr must be positive");
  if (std::abs(physics.gravity.norm() - 1.0) > 1e-12) throw ConfigError("gravity must be a unit vector");
  if (!(t_end >= 0.0)) throw ConfigError("t_end must be non-negative");
  if (dt && !(*dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(dt_safety > 0.0)) throw ConfigError("dt_safety must be positive");
  if (!(dt_max > 0.0)) throw ConfigError("dt_max must be positive");
  if (!(steady_tol >= 0.0)) throw ConfigError("steady_tol must be non-negative");
  if (nu_stride <= 0 || nu_window <= 0) throw ConfigError("nu_stride and nu_window must be positive");
  if (nu_window % nu_stride != 0) throw ConfigError("nu_window must be a multiple of nu_stride");
  if (!(poisson.tolerance > 0.0 && poisson.tolerance < 1.0)) throw ConfigError("Poisson tolerance must lie in (0, 1)");
  if (poisson.max_iterations <= 0) throw ConfigError("Poisson max_iter must be positive");
  if (layout.count < 0) throw ConfigError("obstacle count must be non-negative");
  if (layout.cold > layout.count) throw ConfigError("more cold obstacles than obstacles");
  if (layout.count > 0) {
    if (dim == 3 && layout.shape != "sphere") throw ConfigError("3D obstacles must be spheres");
    if (dim == 2 && layout.shape != "star" && layout.shape != "circle")
      throw ConfigError("random 2D obstacles must be 'star' or 'circle'");
    if (layout.shape == "sphere" && !(layout.radius_min > 0.0 && layout.radius_max >= layout.radius_min))
      throw ConfigError("sphere radii must satisfy 0 < radius_min <= radius_max");
    if (layout.shape != "sphere" && !(layout.mean_radius > 0.0 && layout.amplitude >= 0.0 &&
                                      layout.amplitude < layout.mean_radius))
      throw ConfigError("star obstacles need 0 <= amplitude < mean_radius");
  }
  if (discretization == Discretization::PureRegular && has_obstacles())
    throw ConfigError("pure-regular discretization is not available with obstacles");
  if ((type == CaseType::DVD || type == CaseType::DVDSplit) && has_obstacles())
    throw ConfigError("the dvd cases have no obstacles; use the custom case");
}

namespace {

CaseConfig parse_impl(const std::string& text, const std::string& source, bool& name_set) {
  struct Entry {
    std::string section, key, value;
    int line;
  };
  std::vector<Entry> entries;
  std::vector<ObstacleDraft> drafts;
  std::istringstream in(text);
  std::string raw, section;
  int line_no = 0;
  CaseType type = CaseType::DVD;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const auto hash = line.find_first_of("#;"); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(location(source, line_no) + "malformed section header");
      section = lower(trim(std::string_view(line).substr(1, line.size() - 2)));
      if (section == "obstacle") drafts.push_back({{}, line_no});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(location(source, line_no) + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) throw ConfigError(location(source, line_no) + "empty key");
    if (value.empty()) throw ConfigError(location(source, line_no) + "empty value for '" + key + "'");
    if (section.empty()) throw ConfigError(location(source, line_no) + "key '" + key + "' outside of a section");
    if (section == "obstacle") {
      if (std::find(kObstacleKeys.begin(), kObstacleKeys.end(), key) == kObstacleKeys.end())
        throw ConfigError(location(source, line_no) + "unknown key '" + key + "' in section [obstacle]");
      if (!drafts.back().keys.emplace(key, value).second)
        throw ConfigError(location(source, line_no) + "duplicate key '" + key + "'");
      continue;
    }
    if (section == "case" && key == "type") {
      try {
        type = to_case(value);
      } catch (const ConfigError& e) {
        throw ConfigError(location(source, line_no) + e.what());
      }
    }
    entries.push_back({section, key, value, line_no});
  }

  CaseConfig c = default_config(type);
  ApplyState st;
  for (const Entry& e : entries) {
    try {
      apply_key(c, e.section, e.key, e.value, st);
    } catch (const ConfigError& err) {
      throw ConfigError(location(source, e.line) + err.what());
    }
    if (e.section == "case" && e.key == "name") name_set = true;
  }
  finish(c, st);
  // A violation is reported at the first entry after which the same violation appears.
  auto violation_line = [&](const std::string& message) {
    CaseConfig partial = default_config(type);
    ApplyState pst;
    for (const Entry& e : entries) {
      apply_key(partial, e.section, e.key, e.value, pst);
      CaseConfig probe = partial;
      finish(probe, pst);
      try {
        probe.validate();
      } catch (const ConfigError& err) {
        if (message == err.what()) return e.line;
      }
    }
    return drafts.empty() ? 0 : drafts.front().line;
  };
  for (const ObstacleDraft& d : drafts) {
    try {
      c.obstacles.push_back(build_obstacle(d, c));
    } catch (const ConfigError& err) {
      throw ConfigError(location(source, d.line) + err.what());
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& err) {
    const int line = violation_line(err.what());
    throw ConfigError((line > 0 ? location(source, line) : source + ": ") + err.what());
  }
  return c;
}

}  // namespace

CaseConfig parse_config_string(const std::string& text, const std::string& source) {
  bool name_set = false;
  return parse_impl(text, source, name_set);
}

CaseConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  bool name_set = false;
  CaseConfig c = parse_impl(buf.str(), path, name_set);
  if (!name_set) {
    // Name defaults to the file stem so output directories do not collide.
    auto slash = path.find_last_of('/');
    std::string stem = slash == std::string::npos ? path : path.substr(slash + 1);
    if (auto dot = stem.find_last_of('.'); dot != std::string::npos && dot > 0) stem.erase(dot);
    if (!stem.empty()) c.name = stem;
  }
  return c;
}

void set_parameter(CaseConfig& config, const std::string& name, const std::string& value) {
  static const std::map<std::string, std::string> bare{
      {"type", "case"},        {"discretization", "case"}, {"split", "case"},       {"seed", "case"},
      {"dim", "domain"},       {"h_r", "nodes"},           {"h_s", "nodes"},        {"delta_h", "nodes"},
      {"h_s_ratio", "nodes"},  {"Ra", "physics"},          {"Pr", "physics"},       {"T_cold", "physics"},
      {"T_hot", "physics"},    {"T_init", "physics"},      {"t_end", "time"},       {"dt", "time"},
      {"dt_safety", "time"},   {"dt_max", "time"},   {"steady_tol", "time"},     {"nu_stride", "time"},   {"nu_window", "time"},
      {"tol", "poisson"},      {"max_iter", "poisson"},    {"condition", "weights"}};
  std::string section, key;
  if (const auto dot = name.find('.'); dot != std::string::npos) {
    section = name.substr(0, dot);
    key = name.substr(dot + 1);
  } else if (name == "h") {
    const double ratio = config.spacing_s() / config.h_r;
    config.h_r = to_double(value);
    config.h_s = config.h_r * ratio;
    config.validate();
    return;
  } else {
    const auto it = bare.find(name);
    if (it == bare.end()) throw ConfigError("unknown parameter '" + name + "'");
    section = it->second;
    key = name;
  }
  if (section == "case" && key == "type") throw ConfigError("the case type cannot be swept");
  ApplyState st;
  st.gravity_set = true;
  apply_key(config, section, key, value, st);
  config.validate();
}

}  // namespace hfd
