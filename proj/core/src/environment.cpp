#include "silrrt/environment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "silrrt/error.hpp"

namespace silrrt {

bool Obstacle::contains(std::span<const double> p) const {
  for (std::size_t i = 0; i < center.size(); ++i) {
    if (std::abs(p[i] - center[i]) > half_extents[i]) return false;
  }
  return true;
}

double Obstacle::surface_measure() const {
  if (dim() == 2) return 4.0 * (half_extents[0] + half_extents[1]);
  const double x = half_extents[0], y = half_extents[1], z = half_extents[2];
  return 8.0 * (x * y + y * z + x * z);
}

double Workspace::diagonal() const {
  double s = 0.0;
  for (const auto& iv : bounds) s += iv.width() * iv.width();
  return std::sqrt(s);
}

std::vector<Interval> default_workspace_bounds(int ambient_dim) {
  return std::vector<Interval>(static_cast<std::size_t>(ambient_dim), Interval{-20.0, 20.0});
}

AgentGeometry AgentGeometry::rectangle(double half_w, double half_h) {
  require(half_w > 0.0 && half_h > 0.0, "rectangle agent dimensions must be positive");
  AgentGeometry a;
  a.kind = AgentKind::Rectangle;
  a.half_w = half_w;
  a.half_h = half_h;
  return a;
}

AgentGeometry AgentGeometry::snake(double link_length, double half_width) {
  require(link_length > 0.0 && half_width > 0.0, "snake agent dimensions must be positive");
  AgentGeometry a;
  a.kind = AgentKind::SnakeLinks;
  a.link_length = link_length;
  a.link_half_widths = {half_width, half_width, half_width};
  return a;
}

AgentGeometry AgentGeometry::default_for(SpaceKind space) {
  switch (space) {
    case SpaceKind::Point2D:
    case SpaceKind::Point3D: return point_mass();
    case SpaceKind::RigidBody2D: return rectangle();
    case SpaceKind::Snake5DoF: return snake();
  }
  return point_mass();
}

bool AgentGeometry::compatible_with(SpaceKind space) const {
  switch (kind) {
    case AgentKind::PointMass: return space == SpaceKind::Point2D || space == SpaceKind::Point3D;
    case AgentKind::Rectangle: return space == SpaceKind::RigidBody2D && half_w > 0.0 && half_h > 0.0;
    case AgentKind::SnakeLinks:
      return space == SpaceKind::Snake5DoF && link_length > 0.0 &&
             std::all_of(link_half_widths.begin(), link_half_widths.end(), [](double w) { return w > 0.0; });
  }
  return false;
}

Scenario Scenario::make(Workspace workspace, SpaceKind kind, AgentGeometry agent, State start, State goal,
                        double goal_radius, std::uint64_t seed, double angular_weight) {
  require(agent.compatible_with(kind), "agent geometry is not compatible with the state space");
  require(goal_radius > 0.0, "goal radius must be positive");
  StateSpace space(kind, workspace.bounds, angular_weight);
  require(space.contains(start) && space.contains(goal), "start and goal must lie inside the state space");
  for (const auto& o : workspace.obstacles) {
    require(o.dim() == workspace.dim() && static_cast<int>(o.half_extents.size()) == workspace.dim(),
            "obstacle dimension does not match workspace");
  }
  Scenario s{std::move(workspace), std::move(space), agent, std::move(start), std::move(goal), goal_radius, seed};
  require(!state_in_collision(s, s.start), "start state is in collision");
  require(!state_in_collision(s, s.goal), "goal state is in collision");
  require(distance(s.space, s.start, s.goal) > goal_radius, "start lies inside the goal region");
  return s;
}

Workspace generate_workspace(Rng& rng, const WorkspaceConfig& config) {
  require(config.ambient_dim == 2 || config.ambient_dim == 3, "ambient dimension must be 2 or 3");
  require(config.n_obstacles >= 0, "obstacle count must be non-negative");
  require(config.half_extent_range.lo > 0.0 && config.half_extent_range.lo <= config.half_extent_range.hi,
          "half-extent range must be positive and ordered");
  Workspace ws;
  ws.bounds = config.bounds.empty() ? default_workspace_bounds(config.ambient_dim) : config.bounds;
  require(ws.dim() == config.ambient_dim, "bounds do not match ambient dimension");
  for (const auto& iv : ws.bounds) {
    if (2.0 * config.half_extent_range.hi > iv.width()) {
      throw GenerationError("obstacle size range does not fit inside the workspace bounds");
    }
  }
  for (int k = 0; k < config.n_obstacles; ++k) {
    Obstacle o;
    for (int i = 0; i < ws.dim(); ++i) {
      const double h = uniform(rng, config.half_extent_range.lo, config.half_extent_range.hi);
      const auto& iv = ws.bounds[static_cast<std::size_t>(i)];
      o.half_extents.push_back(h);
      o.center.push_back(uniform(rng, iv.lo + h, iv.hi - h));
    }
    ws.obstacles.push_back(std::move(o));
  }
  return ws;
}

Workspace generate_workspace(Rng& rng, int ambient_dim, int n_obstacles, Interval half_extent_range) {
  WorkspaceConfig cfg;
  cfg.ambient_dim = ambient_dim;
  cfg.n_obstacles = n_obstacles;
  cfg.half_extent_range = half_extent_range;
  return generate_workspace(rng, cfg);
}

Scenario generate_scenario(std::uint64_t seed, const Workspace& workspace, SpaceKind kind, const AgentGeometry& agent,
                           double goal_radius, double angular_weight) {
  require(agent.compatible_with(kind), "agent geometry is not compatible with the state space");
  require(goal_radius > 0.0, "goal radius must be positive");
  Rng rng(seed);
  Scenario s{workspace, StateSpace(kind, workspace.bounds, angular_weight), agent, {}, {}, goal_radius, seed};
  const double min_separation = std::max(goal_radius, 0.25 * workspace.diagonal());
  int attempts = 0;
  auto next_free = [&]() -> std::optional<State> {
    while (attempts < kScenarioMaxAttempts) {
      ++attempts;
      State c = sample_uniform(s.space, rng);
      if (!state_in_collision(s, c)) return c;
    }
    return std::nullopt;
  };
  auto start = next_free();
  while (start) {
    auto goal = next_free();
    if (!goal) break;
    if (distance(s.space, *start, *goal) > min_separation) {
      s.start = std::move(*start);
      s.goal = std::move(*goal);
      return s;
    }
  }
  throw GenerationError("could not place a collision-free start/goal pair within " +
                        std::to_string(kScenarioMaxAttempts) + " attempts");
}

std::vector<double> point_cloud_sentinel(const Workspace& workspace) {
  std::vector<double> p;
  for (const auto& iv : workspace.bounds) p.push_back(iv.lo - iv.width());
  return p;
}

PointCloud sample_surface_point_cloud(const Workspace& workspace, int n, Rng& rng) {
  require(n >= 1, "point cloud size must be at least 1");
  PointCloud cloud;
  cloud.dim = workspace.dim();
  cloud.points.reserve(static_cast<std::size_t>(n * cloud.dim));
  if (workspace.obstacles.empty()) {
    const auto sentinel = point_cloud_sentinel(workspace);
    for (int k = 0; k < n; ++k) cloud.points.insert(cloud.points.end(), sentinel.begin(), sentinel.end());
    return cloud;
  }
  std::vector<double> weights;
  for (const auto& o : workspace.obstacles) weights.push_back(o.surface_measure());
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const int d = cloud.dim;
  for (int k = 0; k < n; ++k) {
    const Obstacle& o = workspace.obstacles[pick(rng)];
    const auto& h = o.half_extents;
    // Each face is perpendicular to `axis`, at side +-1; its measure is the product of the other extents.
    std::vector<double> face_w;
    for (int axis = 0; axis < d; ++axis) {
      double m = 1.0;
      for (int j = 0; j < d; ++j) {
        if (j != axis) m *= 2.0 * h[static_cast<std::size_t>(j)];
      }
      face_w.push_back(m);
      face_w.push_back(m);
    }
    std::discrete_distribution<int> pick_face(face_w.begin(), face_w.end());
    const int face = pick_face(rng);
    const int axis = face / 2;
    const double side = (face % 2 == 0) ? -1.0 : 1.0;
    for (int j = 0; j < d; ++j) {
      const auto ju = static_cast<std::size_t>(j);
      if (j == axis) {
        cloud.points.push_back(o.center[ju] + side * h[ju]);
      } else {
        cloud.points.push_back(o.center[ju] + uniform(rng, -h[ju], h[ju]));
      }
    }
  }
  return cloud;
}

PointCloud workspace_point_cloud(const Workspace& workspace, int n) {
  std::uint64_t h = mix_seed(0x636c6f7564ULL + static_cast<std::uint64_t>(workspace.dim()));
  auto fold = [&h](double v) { h = mix_seed(h ^ std::bit_cast<std::uint64_t>(v)); };
  for (const auto& iv : workspace.bounds) {
    fold(iv.lo);
    fold(iv.hi);
  }
  for (const auto& o : workspace.obstacles) {
    for (double c : o.center) fold(c);
    for (double e : o.half_extents) fold(e);
  }
  Rng rng(h);
  return sample_surface_point_cloud(workspace, n, rng);
}

std::array<Segment2D, 3> snake_forward_kinematics(const State& state, const AgentGeometry& agent) {
  require(state.size() == 5, "snake forward kinematics needs a 5-DoF state");
  std::array<Segment2D, 3> links{};
  std::array<double, 2> p{state[0], state[1]};
  double heading = state[2];
  for (int i = 0; i < 3; ++i) {
    if (i > 0) heading += state[static_cast<std::size_t>(2 + i)];
    std::array<double, 2> q{p[0] + agent.link_length * std::cos(heading), p[1] + agent.link_length * std::sin(heading)};
    links[static_cast<std::size_t>(i)] = {p, q, heading};
    p = q;
  }
  return links;
}

std::array<std::array<double, 2>, 4> OrientedRect::corners() const {
  const double c = std::cos(heading), s = std::sin(heading);
  const double ux = c * half_len, uy = s * half_len;
  const double vx = -s * half_wid, vy = c * half_wid;
  return {{{center[0] + ux + vx, center[1] + uy + vy},
           {center[0] + ux - vx, center[1] + uy - vy},
           {center[0] - ux - vx, center[1] - uy - vy},
           {center[0] - ux + vx, center[1] - uy + vy}}};
}

bool rect_overlaps_box(const OrientedRect& r, const Obstacle& box) {
  const double c = std::cos(r.heading), s = std::sin(r.heading);
  const double dx = r.center[0] - box.center[0];
  const double dy = r.center[1] - box.center[1];
  const double hx = box.half_extents[0], hy = box.half_extents[1];
  // Separating axes: world x, world y, rectangle u = (c, s), rectangle v = (-s, c).
  if (std::abs(dx) > hx + r.half_len * std::abs(c) + r.half_wid * std::abs(s)) return false;
  if (std::abs(dy) > hy + r.half_len * std::abs(s) + r.half_wid * std::abs(c)) return false;
  if (std::abs(dx * c + dy * s) > r.half_len + hx * std::abs(c) + hy * std::abs(s)) return false;
  if (std::abs(-dx * s + dy * c) > r.half_wid + hx * std::abs(s) + hy * std::abs(c)) return false;
  return true;
}

std::vector<OrientedRect> agent_footprint(const Scenario& scenario, const State& state) {
  const auto& agent = scenario.agent;
  switch (agent.kind) {
    case AgentKind::PointMass: return {};
    case AgentKind::Rectangle: return {OrientedRect{{state[0], state[1]}, state[2], agent.half_w, agent.half_h}};
    case AgentKind::SnakeLinks: {
      std::vector<OrientedRect> rects;
      const auto links = snake_forward_kinematics(state, agent);
      for (std::size_t i = 0; i < links.size(); ++i) {
        const auto& l = links[i];
        rects.push_back({{0.5 * (l.start[0] + l.end[0]), 0.5 * (l.start[1] + l.end[1])},
                         l.heading,
                         0.5 * agent.link_length,
                         agent.link_half_widths[i]});
      }
      return rects;
    }
  }
  return {};
}

namespace {

bool point_in_bounds(const Workspace& ws, std::span<const double> p) {
  for (std::size_t i = 0; i < ws.bounds.size(); ++i) {
    if (p[i] < ws.bounds[i].lo || p[i] > ws.bounds[i].hi) return false;
  }
  return true;
}

}  // namespace

bool state_in_collision(const Scenario& scenario, const State& state) {
  const auto& ws = scenario.workspace;
  if (scenario.agent.kind == AgentKind::PointMass) {
    const std::span<const double> p = state.coords().first(static_cast<std::size_t>(ws.dim()));
    if (!point_in_bounds(ws, p)) return true;
    return std::any_of(ws.obstacles.begin(), ws.obstacles.end(), [&](const Obstacle& o) { return o.contains(p); });
  }
  for (const auto& rect : agent_footprint(scenario, state)) {
    for (const auto& corner : rect.corners()) {
      if (!point_in_bounds(ws, corner)) return true;
    }
    for (const auto& o : ws.obstacles) {
      if (rect_overlaps_box(rect, o)) return true;
    }
  }
  return false;
}

bool edge_in_collision(const Scenario& scenario, const State& a, const State& b, double resolution) {
  require(resolution > 0.0, "collision resolution must be positive");
  const double d = distance(scenario.space, a, b);
  const int segments = std::max(1, static_cast<int>(std::ceil(d / resolution)));
  for (int k = 0; k <= segments; ++k) {
    const double t = static_cast<double>(k) / segments;
    if (state_in_collision(scenario, interpolate(scenario.space, a, b, t))) return true;
  }
  return false;
}

}  // namespace silrrt
