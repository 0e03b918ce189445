#include "silrrt/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "silrrt/error.hpp"

namespace silrrt {

std::string_view to_string(SpaceKind kind) {
  switch (kind) {
    case SpaceKind::Point2D: return "point2d";
    case SpaceKind::RigidBody2D: return "rigid2d";
    case SpaceKind::Point3D: return "point3d";
    case SpaceKind::Snake5DoF: return "snake";
  }
  return "unknown";
}

SpaceKind space_kind_from_string(std::string_view name) {
  if (name == "point2d" || name == "2d") return SpaceKind::Point2D;
  if (name == "rigid2d" || name == "rigid") return SpaceKind::RigidBody2D;
  if (name == "point3d" || name == "3d") return SpaceKind::Point3D;
  if (name == "snake") return SpaceKind::Snake5DoF;
  throw FormatError("unknown state space '" + std::string(name) + "'");
}

StateSpace::StateSpace(SpaceKind kind, std::vector<Interval> workspace, double angular_weight)
    : kind_(kind), angular_weight_(angular_weight) {
  const std::size_t ambient = kind == SpaceKind::Point3D ? 3 : 2;
  require(workspace.size() == ambient, "workspace bounds do not match the space's ambient dimension");
  require(angular_weight > 0.0, "angular weight must be positive");
  for (const auto& iv : workspace) {
    require(iv.lo < iv.hi, "workspace interval must satisfy lo < hi");
    bounds_.push_back(iv);
    kinds_.push_back(CoordKind::Linear);
  }
  if (kind == SpaceKind::RigidBody2D || kind == SpaceKind::Snake5DoF) {
    bounds_.push_back({-kPi, kPi});
    kinds_.push_back(CoordKind::Heading);
  }
  if (kind == SpaceKind::Snake5DoF) {
    for (int j = 0; j < 2; ++j) {
      bounds_.push_back({-kSnakeJointLimit, kSnakeJointLimit});
      kinds_.push_back(CoordKind::Joint);
    }
  }
}

bool StateSpace::contains(const State& s, double tol) const {
  if (s.size() != bounds_.size()) return false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s[i])) return false;
    if (kinds_[i] == CoordKind::Heading) {
      if (s[i] < -kPi - tol || s[i] >= kPi + tol) return false;
    } else if (s[i] < bounds_[i].lo - tol || s[i] > bounds_[i].hi + tol) {
      return false;
    }
  }
  return true;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * kPi;
  double r = a - two_pi * std::floor((a + kPi) / two_pi);
  if (r >= kPi) r -= two_pi;
  if (r < -kPi) r += two_pi;
  return r;
}

double angle_diff(double a, double b) { return wrap_angle(b - a); }

namespace {

void check_dims(const StateSpace& space, const State& a, const State& b) {
  const auto d = static_cast<std::size_t>(space.dim());
  require(a.size() == d && b.size() == d, "state dimension does not match state space");
}

}  // namespace

double distance(const StateSpace& space, const State& a, const State& b) {
  check_dims(space, a, b);
  double sum = 0.0;
  for (int i = 0; i < space.dim(); ++i) {
    double d = 0.0;
    switch (space.coord_kind(i)) {
      case CoordKind::Linear: d = b[i] - a[i]; break;
      case CoordKind::Heading: d = space.angular_weight() * angle_diff(a[i], b[i]); break;
      case CoordKind::Joint: d = space.angular_weight() * (b[i] - a[i]); break;
    }
    sum += d * d;
  }
  return std::sqrt(sum);
}

State interpolate(const StateSpace& space, const State& a, const State& b, double t) {
  check_dims(space, a, b);
  require(t >= 0.0 && t <= 1.0, "interpolation parameter must lie in [0, 1]");
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  State out = a;
  for (int i = 0; i < space.dim(); ++i) {
    if (space.coord_kind(i) == CoordKind::Heading) {
      out[i] = wrap_angle(a[i] + t * angle_diff(a[i], b[i]));
    } else {
      out[i] = a[i] + t * (b[i] - a[i]);
    }
  }
  return out;
}

State enforce_bounds(const StateSpace& space, State s) {
  for (int i = 0; i < space.dim(); ++i) {
    if (space.coord_kind(i) == CoordKind::Heading) {
      s[i] = wrap_angle(s[i]);
    } else {
      s[i] = std::clamp(s[i], space.bound(i).lo, space.bound(i).hi);
    }
  }
  return s;
}

State steer(const StateSpace& space, const State& from, const State& to, double step) {
  require(step > 0.0, "steer step must be positive");
  const double d = distance(space, from, to);
  if (d <= step) return to;
  return enforce_bounds(space, interpolate(space, from, to, step / d));
}

State sample_uniform(const StateSpace& space, Rng& rng) {
  std::vector<double> c(static_cast<std::size_t>(space.dim()));
  for (int i = 0; i < space.dim(); ++i) {
    const auto& iv = space.bound(i);
    c[static_cast<std::size_t>(i)] = uniform(rng, iv.lo, iv.hi);
  }
  return State(std::move(c));
}

std::vector<double> normalize_for_model(const StateSpace& space, const State& s) {
  require(s.size() == static_cast<std::size_t>(space.dim()), "state dimension does not match state space");
  require(space.contains(s), "state outside space bounds cannot be normalized");
  std::vector<double> v(s.size());
  for (int i = 0; i < space.dim(); ++i) {
    const auto& iv = space.bound(i);
    v[static_cast<std::size_t>(i)] = 2.0 * (s[i] - iv.lo) / iv.width() - 1.0;
  }
  return v;
}

State denormalize_from_model(const StateSpace& space, std::span<const double> v) {
  require(v.size() == static_cast<std::size_t>(space.dim()), "vector dimension does not match state space");
  std::vector<double> c(v.size());
  for (int i = 0; i < space.dim(); ++i) {
    const auto& iv = space.bound(i);
    c[static_cast<std::size_t>(i)] = iv.lo + 0.5 * (v[static_cast<std::size_t>(i)] + 1.0) * iv.width();
  }
  return State(std::move(c));
}

double path_cost(const StateSpace& space, std::span<const State> path) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) total += distance(space, path[i - 1], path[i]);
  return total;
}

}  // namespace silrrt
