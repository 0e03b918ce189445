#include <gtest/gtest.h>

#include "silrrt/bench.hpp"

using namespace silrrt;

// Each default below is part of the documented configuration; changing one should be deliberate.

TEST(Defaults, GoalRadiusIsOne) {
  EXPECT_EQ(kDefaultGoalRadius, 1.0);
  const Scenario s = Scenario::make(Workspace{default_workspace_bounds(2), {}}, SpaceKind::Point2D,
                                    AgentGeometry::point_mass(), {0, 0}, {5, 0});
  EXPECT_EQ(s.goal_radius, 1.0);
  EXPECT_EQ(GenDataConfig{}.goal_radius, 1.0);
}

TEST(Defaults, MaxSamplesTwoHundredOrFourHundredForUniform3D) {
  EXPECT_EQ(PlannerConfig{}.max_samples, 200);
  EXPECT_EQ(default_max_samples(SpaceKind::Point2D, true), 200);
  EXPECT_EQ(default_max_samples(SpaceKind::RigidBody2D, true), 200);
  EXPECT_EQ(default_max_samples(SpaceKind::Snake5DoF, true), 200);
  EXPECT_EQ(default_max_samples(SpaceKind::Point3D, true), 400);
  EXPECT_EQ(default_max_samples(SpaceKind::Point3D, false), 200);
  EXPECT_EQ(EvalConfig{}.max_samples, 0);  // resolved per planner via default_max_samples
  EXPECT_EQ(EvalConfig{}.trials, 3);
}

TEST(Defaults, PointCloudHasOneThousandPoints) {
  EXPECT_EQ(kDefaultPointCloudSize, 1000);
  Rng rng(1);
  const Workspace ws = generate_workspace(rng, 2, 5, {1.5, 4.5});
  EXPECT_EQ(workspace_point_cloud(ws).size(), 1000u);
  const TaskSet tasks = TaskSet::build({generate_scenario(1, ws, SpaceKind::Point2D, AgentGeometry::point_mass())});
  EXPECT_EQ(tasks.clouds[0].rows(), 1000);
}

TEST(Defaults, SnakeJointLimitsArePlusMinus45Degrees) {
  EXPECT_DOUBLE_EQ(kSnakeJointLimit, 45.0 * kPi / 180.0);
  const StateSpace space(SpaceKind::Snake5DoF, default_workspace_bounds(2));
  ASSERT_EQ(space.dim(), 5);
  for (int j = 3; j < 5; ++j) {
    EXPECT_EQ(space.coord_kind(j), CoordKind::Joint);
    EXPECT_EQ(space.bound(j).lo, -kPi / 4.0);
    EXPECT_EQ(space.bound(j).hi, kPi / 4.0);
  }
}

TEST(Defaults, DecoderWindowIsFive) {
  EXPECT_EQ(kDecoderWindow, 5);
  EXPECT_EQ(SamplerConfig{}.context_window, 5);
}

TEST(Defaults, WorkspaceDatasetAndWsil) {
  EXPECT_EQ(WorkspaceConfig{}.n_obstacles, 10);
  const GenDataConfig g;
  EXPECT_EQ(g.workspaces, 20);
  EXPECT_EQ(g.scenarios_per, 25);
  EXPECT_EQ(g.obstacles, 5);
  EXPECT_EQ(g.planner.max_samples, 2000);
  EXPECT_EQ(PretrainConfig{}.iterations, 2000);
  const WsilConfig w;
  EXPECT_EQ(w.K0, 8.0);
  EXPECT_EQ(w.mu_K, 2.0);
  EXPECT_EQ(w.anneal_every, 500);
  EXPECT_EQ(w.buffer_capacity, 2048u);
  EXPECT_EQ(w.iterations, 1000);
  EXPECT_EQ(w.sampler_adam.lr, 1e-4);
  EXPECT_EQ(w.estimator_adam.lr, 1e-3);
}
