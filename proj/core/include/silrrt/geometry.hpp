#pragma once

#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "silrrt/rng.hpp"

namespace silrrt {

enum class SpaceKind { Point2D, RigidBody2D, Point3D, Snake5DoF };

/// Linear coordinates live in workspace units. Heading coordinates wrap on [-pi, pi).
/// Joint coordinates are bounded angles that never wrap.
enum class CoordKind { Linear, Heading, Joint };

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSnakeJointLimit = kPi / 4.0;  // +-45 degrees

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool operator==(const Interval&) const = default;
};

std::string_view to_string(SpaceKind kind);
SpaceKind space_kind_from_string(std::string_view name);

/// A configuration: one real per state-space coordinate, angles in radians.
class State {
 public:
  State() = default;
  explicit State(std::vector<double> coords) : coords_(std::move(coords)) {}
  State(std::initializer_list<double> coords) : coords_(coords) {}

  std::size_t size() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  double& operator[](std::size_t i) { return coords_[i]; }
  std::span<const double> coords() const { return coords_; }
  const std::vector<double>& vec() const { return coords_; }

  bool operator==(const State&) const = default;

 private:
  std::vector<double> coords_;
};

/// Coordinate layout and bounds for one of the four supported configuration spaces.
///   Point2D      (x, y)
///   RigidBody2D  (x, y, heading)
///   Point3D      (x, y, z)
///   Snake5DoF    (x, y, heading, joint1, joint2)
class StateSpace {
 public:
  /// `workspace` gives the translational bounds (2 intervals, or 3 for Point3D).
  StateSpace(SpaceKind kind, std::vector<Interval> workspace, double angular_weight = 1.0);

  SpaceKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(bounds_.size()); }
  int ambient_dim() const { return kind_ == SpaceKind::Point3D ? 3 : 2; }
  const std::vector<Interval>& bounds() const { return bounds_; }
  const Interval& bound(int i) const { return bounds_[static_cast<std::size_t>(i)]; }
  CoordKind coord_kind(int i) const { return kinds_[static_cast<std::size_t>(i)]; }
  double angular_weight() const { return angular_weight_; }

  bool contains(const State& s, double tol = 1e-9) const;
  bool operator==(const StateSpace&) const = default;

 private:
  SpaceKind kind_;
  std::vector<Interval> bounds_;
  std::vector<CoordKind> kinds_;
  double angular_weight_;
};

/// Wraps an angle onto [-pi, pi).
double wrap_angle(double a);

/// Signed shortest-arc difference b - a, in [-pi, pi).
double angle_diff(double a, double b);

double distance(const StateSpace& space, const State& a, const State& b);

State interpolate(const StateSpace& space, const State& a, const State& b, double t);

/// Moves from `from` toward `to` by at most `step` along the metric.
State steer(const StateSpace& space, const State& from, const State& to, double step);

/// Clamps linear and joint coordinates into bounds and wraps headings.
State enforce_bounds(const StateSpace& space, State s);

State sample_uniform(const StateSpace& space, Rng& rng);

/// Affine map of every coordinate onto [-1, 1] using the space bounds.
std::vector<double> normalize_for_model(const StateSpace& space, const State& s);
State denormalize_from_model(const StateSpace& space, std::span<const double> v);

double path_cost(const StateSpace& space, std::span<const State> path);

}  // namespace silrrt
