#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "silrrt/geometry.hpp"
#include "silrrt/rng.hpp"

namespace silrrt {

inline constexpr double kDefaultGoalRadius = 1.0;
inline constexpr double kDefaultCollisionStep = 0.1;
inline constexpr int kDefaultPointCloudSize = 1000;
inline constexpr int kScenarioMaxAttempts = 10000;

/// Axis-aligned box in the workspace's ambient dimension (2 or 3).
struct Obstacle {
  std::vector<double> center;
  std::vector<double> half_extents;

  int dim() const { return static_cast<int>(center.size()); }
  bool contains(std::span<const double> p) const;
  /// Perimeter in 2D, surface area in 3D.
  double surface_measure() const;
  bool operator==(const Obstacle&) const = default;
};

struct Workspace {
  std::vector<Interval> bounds;
  std::vector<Obstacle> obstacles;

  int dim() const { return static_cast<int>(bounds.size()); }
  double diagonal() const;
  bool operator==(const Workspace&) const = default;
};

/// Default translational bounds of generated workspaces: [-20, 20] per axis.
std::vector<Interval> default_workspace_bounds(int ambient_dim);

enum class AgentKind { PointMass, Rectangle, SnakeLinks };

struct AgentGeometry {
  AgentKind kind = AgentKind::PointMass;
  double half_w = 0.0;  // Rectangle: along heading
  double half_h = 0.0;  // Rectangle: perpendicular to heading
  double link_length = 0.0;
  std::array<double, 3> link_half_widths{0.0, 0.0, 0.0};

  static AgentGeometry point_mass() { return {}; }
  static AgentGeometry rectangle(double half_w = 1.0, double half_h = 0.5);
  static AgentGeometry snake(double link_length = 1.5, double half_width = 0.2);
  /// The agent kind every generated scenario of `space` uses by default.
  static AgentGeometry default_for(SpaceKind space);

  bool compatible_with(SpaceKind space) const;
  bool operator==(const AgentGeometry&) const = default;
};

struct Scenario {
  Workspace workspace;
  StateSpace space;
  AgentGeometry agent;
  State start;
  State goal;
  double goal_radius = kDefaultGoalRadius;
  std::uint64_t seed = 0;

  /// Validates every scenario invariant and returns the assembled value.
  static Scenario make(Workspace workspace, SpaceKind kind, AgentGeometry agent, State start, State goal,
                       double goal_radius = kDefaultGoalRadius, std::uint64_t seed = 0,
                       double angular_weight = 1.0);

  bool operator==(const Scenario&) const = default;
};

/// n x dim row-major obstacle-surface points in workspace units.
struct PointCloud {
  int dim = 2;
  std::vector<double> points;

  std::size_t size() const { return points.size() / static_cast<std::size_t>(dim); }
  std::span<const double> point(std::size_t i) const {
    return {points.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

struct WorkspaceConfig {
  int ambient_dim = 2;
  int n_obstacles = 10;
  Interval half_extent_range{1.5, 4.5};
  std::vector<Interval> bounds;  // empty: default_workspace_bounds(ambient_dim)
};

Workspace generate_workspace(Rng& rng, const WorkspaceConfig& config);
Workspace generate_workspace(Rng& rng, int ambient_dim, int n_obstacles, Interval half_extent_range);

/// Rejection-samples a collision-free start/goal pair at least
/// max(goal_radius, 0.25 * workspace diagonal) apart. Pure function of its arguments.
Scenario generate_scenario(std::uint64_t seed, const Workspace& workspace, SpaceKind space, const AgentGeometry& agent,
                           double goal_radius = kDefaultGoalRadius, double angular_weight = 1.0);

/// Points uniform on obstacle boundaries; obstacles chosen proportionally to surface measure.
/// With no obstacles, returns n copies of a sentinel point outside the bounds.
PointCloud sample_surface_point_cloud(const Workspace& workspace, int n, Rng& rng);
std::vector<double> point_cloud_sentinel(const Workspace& workspace);

/// The cloud a workspace is always presented with: sampled from a seed hashed
/// out of the workspace geometry, so identical workspaces get identical clouds.
PointCloud workspace_point_cloud(const Workspace& workspace, int n = kDefaultPointCloudSize);

struct Segment2D {
  std::array<double, 2> start;
  std::array<double, 2> end;
  double heading;
};

std::array<Segment2D, 3> snake_forward_kinematics(const State& state, const AgentGeometry& agent);

/// Planar oriented rectangle: center, heading, half extents along/perpendicular to heading.
struct OrientedRect {
  std::array<double, 2> center;
  double heading;
  double half_len;
  double half_wid;

  std::array<std::array<double, 2>, 4> corners() const;
};

bool rect_overlaps_box(const OrientedRect& rect, const Obstacle& box);

/// Footprint rectangles of a planar agent (empty for point agents).
std::vector<OrientedRect> agent_footprint(const Scenario& scenario, const State& state);

bool state_in_collision(const Scenario& scenario, const State& state);

/// Checks interpolated states every `resolution` metric units, both endpoints included.
bool edge_in_collision(const Scenario& scenario, const State& a, const State& b,
                       double resolution = kDefaultCollisionStep);

}  // namespace silrrt
