#include "hfd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace hfd {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Closest point on an axis-aligned ellipse with semi-axes e0 >= e1 to a point (y0, y1) in the
// first quadrant. Bisection on the Lagrange multiplier, robust for all inputs.
double ellipse_root(double r0, double z0, double z1, double g) {
  const double n0 = r0 * z0;
  double s0 = z1 - 1.0;
  double s1 = g < 0.0 ? 0.0 : std::hypot(n0, z1) - 1.0;
  double s = 0.0;
  for (int i = 0; i < 1100; ++i) {
    s = 0.5 * (s0 + s1);
    if (s == s0 || s == s1) break;
    const double ratio0 = n0 / (s + r0);
    const double ratio1 = z1 / (s + 1.0);
    const double gs = ratio0 * ratio0 + ratio1 * ratio1 - 1.0;
    if (gs > 0.0) {
      s0 = s;
    } else if (gs < 0.0) {
      s1 = s;
    } else {
      break;
    }
  }
  return s;
}

double ellipse_quadrant_distance(double e0, double e1, double y0, double y1) {
  if (y1 > 0.0) {
    if (y0 > 0.0) {
      const double z0 = y0 / e0;
      const double z1 = y1 / e1;
      const double g = z0 * z0 + z1 * z1 - 1.0;
      if (g == 0.0) return 0.0;
      const double r0 = (e0 / e1) * (e0 / e1);
      const double s = ellipse_root(r0, z0, z1, g);
      const double x0 = r0 * y0 / (s + r0);
      const double x1 = y1 / (s + 1.0);
      return std::hypot(x0 - y0, x1 - y1);
    }
    return std::abs(y1 - e1);
  }
  const double numer0 = e0 * y0;
  const double denom0 = e0 * e0 - e1 * e1;
  if (numer0 < denom0) {
    const double xde0 = numer0 / denom0;
    const double x0 = e0 * xde0;
    const double x1 = e1 * std::sqrt(std::max(0.0, 1.0 - xde0 * xde0));
    return std::hypot(x0 - y0, x1);
  }
  return std::abs(y0 - e0);
}

double ellipse_signed_distance(const Ellipse& e, const Vec& x) {
  const double c = std::cos(e.rotation);
  const double s = std::sin(e.rotation);
  const double dx = x.x() - e.center.x();
  const double dy = x.y() - e.center.y();
  double u = c * dx + s * dy;
  double v = -s * dx + c * dy;
  double a = e.semi_a;
  double b = e.semi_b;
  if (a < b) {
    std::swap(a, b);
    std::swap(u, v);
  }
  const double dist = ellipse_quadrant_distance(a, b, std::abs(u), std::abs(v));
  const double level = (u / a) * (u / a) + (v / b) * (v / b);
  return level < 1.0 ? -dist : dist;
}

struct StarCurve {
  const Star& s;
  double radius(double t) const { return s.mean_radius + s.amplitude * std::cos(s.lobes * t + s.phase); }
  Vec point(double t) const {
    const double r = radius(t);
    return s.center + Vec(r * std::cos(t), r * std::sin(t), 0.0);
  }
  Vec d1(double t) const {
    const double r = radius(t);
    const double rp = -s.amplitude * s.lobes * std::sin(s.lobes * t + s.phase);
    return {rp * std::cos(t) - r * std::sin(t), rp * std::sin(t) + r * std::cos(t), 0.0};
  }
  Vec d2(double t) const {
    const double r = radius(t);
    const double k = s.lobes;
    const double rp = -s.amplitude * k * std::sin(k * t + s.phase);
    const double rpp = -s.amplitude * k * k * std::cos(k * t + s.phase);
    return {rpp * std::cos(t) - 2.0 * rp * std::sin(t) - r * std::cos(t),
            rpp * std::sin(t) + 2.0 * rp * std::cos(t) - r * std::sin(t), 0.0};
  }
};

// Safeguarded Newton on f'(t) = (C(t) - x) . C'(t) inside [lo, hi], starting from t0.
double refine_star_parameter(const StarCurve& curve, const Vec& x, double lo, double hi, double t0) {
  auto grad = [&](double t) { return (curve.point(t) - x).dot(curve.d1(t)); };
  double glo = grad(lo);
  double ghi = grad(hi);
  const bool bracketed = glo <= 0.0 && ghi >= 0.0;
  double t = t0;
  for (int it = 0; it < 60; ++it) {
    const Vec diff = curve.point(t) - x;
    const Vec c1 = curve.d1(t);
    const double g = diff.dot(c1);
    const double gp = c1.squaredNorm() + diff.dot(curve.d2(t));
    if (bracketed) {
      if (g < 0.0) {
        lo = t;
      } else {
        hi = t;
      }
    }
    double next = gp > 0.0 ? t - g / gp : 0.5 * (lo + hi);
    if (next <= lo || next >= hi) next = 0.5 * (lo + hi);
    if (std::abs(next - t) < 1e-15 * (1.0 + std::abs(t))) {
      t = next;
      break;
    }
    t = next;
  }
  return t;
}

double star_signed_distance(const Star& s, const Vec& x) {
  const StarCurve curve{s};
  const int samples = std::max(96, 24 * s.lobes);
  const double step = kTwoPi / samples;
  std::vector<double> d2(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) d2[static_cast<std::size_t>(i)] = (curve.point(i * step) - x).squaredNorm();

  // Refine the three best sampled local minima.
  std::vector<int> minima;
  for (int i = 0; i < samples; ++i) {
    const double prev = d2[static_cast<std::size_t>((i + samples - 1) % samples)];
    const double next = d2[static_cast<std::size_t>((i + 1) % samples)];
    const double cur = d2[static_cast<std::size_t>(i)];
    if (cur <= prev && cur <= next) minima.push_back(i);
  }
  std::sort(minima.begin(), minima.end(), [&](int a, int b) {
    return d2[static_cast<std::size_t>(a)] < d2[static_cast<std::size_t>(b)];
  });
  if (minima.size() > 3) minima.resize(3);

  double best = kInf;
  for (int i : minima) {
    const double t0 = i * step;
    const double t = refine_star_parameter(curve, x, t0 - step, t0 + step, t0);
    best = std::min({best, (curve.point(t) - x).squaredNorm(), d2[static_cast<std::size_t>(i)]});
  }
  const double dist = std::sqrt(best);
  const Vec rel = x - s.center;
  const double rho = std::hypot(rel.x(), rel.y());
  const double theta = std::atan2(rel.y(), rel.x());
  return rho < curve.radius(theta) ? -dist : dist;
}

// Closed-curve parametrisation of 2D obstacle surfaces: position and outward (away from the
// obstacle) normal at parameter t in [0, 2 pi).
struct CurvePoint {
  Vec position;
  Vec normal;
  double speed;
};

CurvePoint curve_point(const Shape& shape, double t) {
  if (const auto* c = std::get_if<Circle>(&shape)) {
    const Vec n(std::cos(t), std::sin(t), 0.0);
    return {c->center + c->radius * n, n, c->radius};
  }
  if (const auto* e = std::get_if<Ellipse>(&shape)) {
    const double cr = std::cos(e->rotation);
    const double sr = std::sin(e->rotation);
    const double u = e->semi_a * std::cos(t);
    const double v = e->semi_b * std::sin(t);
    const Vec p = e->center + Vec(cr * u - sr * v, sr * u + cr * v, 0.0);
    const double du = -e->semi_a * std::sin(t);
    const double dv = e->semi_b * std::cos(t);
    const Vec tangent(cr * du - sr * dv, sr * du + cr * dv, 0.0);
    const Vec n = Vec(tangent.y(), -tangent.x(), 0.0).normalized();
    return {p, n, tangent.norm()};
  }
  const auto& s = std::get<Star>(shape);
  const StarCurve curve{s};
  const Vec tangent = curve.d1(t);
  return {curve.point(t), Vec(tangent.y(), -tangent.x(), 0.0).normalized(), tangent.norm()};
}

std::string describe(const Vec& x, int dim) {
  std::ostringstream os;
  os << "(" << x.x() << ", " << x.y();
  if (dim == 3) os << ", " << x.z();
  os << ")";
  return os.str();
}

}  // namespace

Obstacle::Obstacle(Shape shape, WallCondition wall) : shape_(std::move(shape)), wall_(wall) {
  if (const auto* c = std::get_if<Circle>(&shape_)) {
    if (!(c->radius > 0.0)) throw ConfigError("obstacle radius must be positive");
  } else if (const auto* e = std::get_if<Ellipse>(&shape_)) {
    if (!(e->semi_a > 0.0) || !(e->semi_b > 0.0)) throw ConfigError("ellipse semi-axes must be positive");
  } else {
    const auto& s = std::get<Star>(shape_);
    if (!(s.mean_radius > 0.0)) throw ConfigError("star mean radius must be positive");
    if (s.amplitude < 0.0 || s.amplitude >= s.mean_radius)
      throw ConfigError("star amplitude must lie in [0, mean_radius)");
    if (s.lobes < 1) throw ConfigError("star needs at least one lobe");
  }
}

Vec Obstacle::center() const {
  return std::visit([](const auto& s) { return s.center; }, shape_);
}

double Obstacle::bounding_radius() const {
  if (const auto* c = std::get_if<Circle>(&shape_)) return c->radius;
  if (const auto* e = std::get_if<Ellipse>(&shape_)) return std::max(e->semi_a, e->semi_b);
  const auto& s = std::get<Star>(shape_);
  return s.mean_radius + s.amplitude;
}

double Obstacle::signed_distance(const Vec& x) const {
  if (const auto* c = std::get_if<Circle>(&shape_)) return (x - c->center).norm() - c->radius;
  if (const auto* e = std::get_if<Ellipse>(&shape_)) return ellipse_signed_distance(*e, x);
  return star_signed_distance(std::get<Star>(shape_), x);
}

DomainSpec::DomainSpec(int dim, Box box, std::vector<Obstacle> obstacles, std::array<WallCondition, 6> walls,
                       double min_gap)
    : dim_(dim), box_(box), obstacles_(std::move(obstacles)), walls_(walls) {
  if (dim_ != 2 && dim_ != 3) throw ConfigError("domain dimension must be 2 or 3");
  if (dim_ == 2) {
    box_.lower.z() = 0.0;
    box_.upper.z() = 0.0;
  }
  for (int a = 0; a < dim_; ++a) {
    if (!(box_.upper[a] > box_.lower[a])) throw ConfigError("bounding box must have positive extent");
  }
  for (std::size_t i = 0; i < obstacles_.size(); ++i) {
    const Obstacle& ob = obstacles_[i];
    if (dim_ == 3 && !std::holds_alternative<Circle>(ob.shape()))
      throw ConfigError("only spheres are supported as 3D obstacles");
    const Vec c = ob.center();
    if (dim_ == 2 && c.z() != 0.0) throw ConfigError("2D obstacle center must have zero z");
    if (-box_signed_distance(c) <= ob.bounding_radius())
      throw ConfigError("obstacle " + std::to_string(i) + " at " + describe(c, dim_) +
                        " is not strictly inside the bounding box");
  }
  for (std::size_t i = 0; i < obstacles_.size(); ++i) {
    for (std::size_t j = i + 1; j < obstacles_.size(); ++j) {
      const Obstacle& a = obstacles_[i];
      const Obstacle& b = obstacles_[j];
      const double center_gap = (a.center() - b.center()).norm() - a.bounding_radius() - b.bounding_radius();
      if (center_gap >= min_gap) continue;
      double gap = kInf;
      if (std::holds_alternative<Circle>(a.shape()) && std::holds_alternative<Circle>(b.shape())) {
        gap = center_gap;
      } else {
        constexpr int kSamples = 720;
        for (int k = 0; k < kSamples; ++k) {
          const double t = kTwoPi * k / kSamples;
          gap = std::min(gap, b.signed_distance(curve_point(a.shape(), t).position));
        }
      }
      if (gap < min_gap)
        throw ConfigError("obstacles " + std::to_string(i) + " and " + std::to_string(j) +
                          " overlap or violate the minimum surface gap");
    }
  }
}

double DomainSpec::box_signed_distance(const Vec& x) const {
  double outside2 = 0.0;
  double inside = -kInf;
  for (int a = 0; a < dim_; ++a) {
    const double c = 0.5 * (box_.lower[a] + box_.upper[a]);
    const double half = 0.5 * (box_.upper[a] - box_.lower[a]);
    const double q = std::abs(x[a] - c) - half;
    if (q > 0.0) outside2 += q * q;
    inside = std::max(inside, q);
  }
  return std::sqrt(outside2) + std::min(inside, 0.0);
}

double DomainSpec::signed_distance(const Vec& x) const {
  const double box_sd = box_signed_distance(x);
  if (obstacles_.empty()) return box_sd;
  double nearest = kInf;
  for (const Obstacle& ob : obstacles_) nearest = std::min(nearest, ob.signed_distance(x));
  return std::max(box_sd, -nearest);
}

double DomainSpec::obstacle_distance(const Vec& x, double cutoff) const {
  double best = kInf;
  for (const Obstacle& ob : obstacles_) {
    const double lower_bound = (x - ob.center()).norm() - ob.bounding_radius();
    if (lower_bound >= best) continue;
    if (lower_bound >= cutoff) {
      best = lower_bound;
      continue;
    }
    best = std::min(best, ob.signed_distance(x));
  }
  return best;
}

std::array<int, 3> lattice_counts(const DomainSpec& spec, double h) {
  if (!(h > 0.0)) throw ConfigError("lattice spacing must be positive");
  std::array<int, 3> counts{1, 1, 1};
  const Vec ext = spec.extent();
  for (int a = 0; a < spec.dim(); ++a) {
    if (h > ext[a]) throw ConfigError("spacing " + std::to_string(h) + " exceeds the domain extent");
    counts[static_cast<std::size_t>(a)] = std::max(1, static_cast<int>(std::lround(ext[a] / h)));
  }
  return counts;
}

std::vector<BoundarySample> discretize_boundary(const DomainSpec& spec, double wall_spacing,
                                                const std::function<double(const Vec&)>& obstacle_spacing) {
  const int dim = spec.dim();
  const auto counts = lattice_counts(spec, wall_spacing);
  const Vec ext = spec.extent();
  std::vector<BoundarySample> out;

  // Wall lattice, z-major so 2D and 3D share the loop.
  const int nz = dim == 3 ? counts[2] : 0;
  for (int k = 0; k <= nz; ++k) {
    for (int j = 0; j <= counts[1]; ++j) {
      for (int i = 0; i <= counts[0]; ++i) {
        const std::array<int, 3> idx{i, j, k};
        Vec normal = Vec::Zero();
        int faces = 0;
        int first_face = -1;
        int dirichlet_face = -1;
        for (int a = 0; a < dim; ++a) {
          const int ia = idx[static_cast<std::size_t>(a)];
          const int ma = counts[static_cast<std::size_t>(a)];
          if (ia != 0 && ia != ma) continue;
          const bool upper = ia == ma;
          const int f = face_id(a, upper);
          normal[a] = upper ? 1.0 : -1.0;
          ++faces;
          if (first_face < 0) first_face = f;
          if (dirichlet_face < 0 && spec.wall(f).is_dirichlet()) dirichlet_face = f;
        }
        if (faces == 0) continue;
        Vec p = spec.box().lower;
        for (int a = 0; a < dim; ++a) {
          const int ia = idx[static_cast<std::size_t>(a)];
          const int ma = counts[static_cast<std::size_t>(a)];
          p[a] = ia == ma ? spec.box().upper[a] : spec.box().lower[a] + ia * (ext[a] / ma);
        }
        bool covered = false;
        for (const Obstacle& ob : spec.obstacles()) covered = covered || ob.signed_distance(p) <= 0.0;
        if (covered) continue;
        const int src = dirichlet_face >= 0 ? dirichlet_face : first_face;
        BoundarySample s;
        s.position = p;
        s.normal = normal.normalized();
        s.bc = spec.wall(src);
        s.origin = {BoundaryOrigin::Type::Wall, src, faces > 1};
        out.push_back(s);
      }
    }
  }

  for (std::size_t oi = 0; oi < spec.obstacles().size(); ++oi) {
    const Obstacle& ob = spec.obstacles()[oi];
    if (ob.bounding_radius() <= 0.0) throw ConfigError("degenerate obstacle");
    const BoundaryOrigin origin{BoundaryOrigin::Type::Obstacle, static_cast<int>(oi), false};
    if (dim == 3) {
      const auto& sphere = std::get<Circle>(ob.shape());
      const double h = obstacle_spacing(sphere.center + Vec(sphere.radius, 0.0, 0.0));
      if (!(h > 0.0)) throw ConfigError("boundary spacing must be positive");
      const double area = 4.0 * std::numbers::pi * sphere.radius * sphere.radius;
      const int n = std::max(4, static_cast<int>(std::lround(area / (0.5 * std::sqrt(3.0) * h * h))));
      const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        const Vec nrm(r * std::cos(phi), r * std::sin(phi), z);
        out.push_back({sphere.center + sphere.radius * nrm, nrm.normalized(), ob.wall(), origin});
      }
      continue;
    }
    // Equal increments of the integral of ds / h(s) along the curve.
    constexpr int kTable = 4096;
    std::vector<double> cumulative(kTable + 1, 0.0);
    auto density = [&](double t) {
      const CurvePoint cp = curve_point(ob.shape(), t);
      const double h = obstacle_spacing(cp.position);
      if (!(h > 0.0)) throw ConfigError("boundary spacing must be positive");
      return cp.speed / h;
    };
    double prev = density(0.0);
    for (int i = 1; i <= kTable; ++i) {
      const double cur = density(kTwoPi * i / kTable);
      cumulative[static_cast<std::size_t>(i)] = cumulative[static_cast<std::size_t>(i - 1)] +
                                                0.5 * (prev + cur) * (kTwoPi / kTable);
      prev = cur;
    }
    const double total = cumulative.back();
    const int n = std::max(3, static_cast<int>(std::lround(total)));
    std::size_t seg = 0;
    for (int k = 0; k < n; ++k) {
      const double target = total * k / n;
      while (seg + 1 < cumulative.size() - 1 && cumulative[seg + 1] < target) ++seg;
      const double span = cumulative[seg + 1] - cumulative[seg];
      const double frac = span > 0.0 ? (target - cumulative[seg]) / span : 0.0;
      const double t = kTwoPi * (static_cast<double>(seg) + frac) / kTable;
      const CurvePoint cp = curve_point(ob.shape(), t);
      out.push_back({cp.position, cp.normal, ob.wall(), origin});
    }
  }
  return out;
}

std::vector<BoundarySample> discretize_boundary(const DomainSpec& spec, double spacing) {
  return discretize_boundary(spec, spacing, [spacing](const Vec&) { return spacing; });
}

std::vector<Obstacle> place_obstacles(int dim, const Box& box, std::vector<Shape> shapes,
                                      std::vector<WallCondition> walls, double gap, double wall_gap,
                                      std::mt19937_64& rng, int max_attempts) {
  if (walls.size() != shapes.size()) throw ConfigError("one wall condition per obstacle is required");
  std::vector<Obstacle> placed;
  int attempts = 0;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    bool ok = false;
    while (!ok) {
      if (++attempts > max_attempts)
        throw ConfigError("could not place " + std::to_string(shapes.size()) + " obstacles within " +
                          std::to_string(max_attempts) + " attempts");
      Shape shape = shapes[i];
      const double br = Obstacle(shape, walls[i]).bounding_radius();
      Vec c = Vec::Zero();
      bool fits = true;
      for (int a = 0; a < dim; ++a) {
        const double lo = box.lower[a] + br + wall_gap;
        const double hi = box.upper[a] - br - wall_gap;
        if (!(hi > lo)) {
          fits = false;
          break;
        }
        c[a] = std::uniform_real_distribution<double>(lo, hi)(rng);
      }
      if (!fits) throw ConfigError("obstacle " + std::to_string(i) + " does not fit inside the box");
      std::visit([&](auto& s) { s.center = c; }, shape);
      Obstacle candidate(shape, walls[i]);
      ok = std::all_of(placed.begin(), placed.end(), [&](const Obstacle& o) {
        return (o.center() - c).norm() - o.bounding_radius() - br >= gap;
      });
      if (ok) placed.push_back(std::move(candidate));
    }
  }
  return placed;
}

}  // namespace hfd
