#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "silrrt/environment.hpp"
#include "silrrt/error.hpp"
#include "silrrt/planner.hpp"
#include "silrrt/sampler_model.hpp"

using namespace silrrt;

namespace {

Workspace empty_ws(int dim = 2) { return Workspace{default_workspace_bounds(dim), {}}; }

Scenario empty_line_scenario() {
  return Scenario::make(empty_ws(), SpaceKind::Point2D, AgentGeometry::point_mass(), {0, 0}, {5, 0});
}

Scenario random_scenario(SpaceKind kind, std::uint64_t seed, int obstacles) {
  Rng rng(seed);
  const Workspace ws = generate_workspace(rng, kind == SpaceKind::Point3D ? 3 : 2, obstacles, {1.5, 4.5});
  return generate_scenario(seed * 7 + 1, ws, kind, AgentGeometry::default_for(kind));
}

void expect_same_result(const PlanResult& a, const PlanResult& b) {
  EXPECT_EQ(a.success, b.success);
  EXPECT_EQ(a.path, b.path);
  EXPECT_EQ(a.path_length, b.path_length);
  EXPECT_EQ(a.samples_generated, b.samples_generated);
  EXPECT_EQ(a.collision_checks, b.collision_checks);
  EXPECT_EQ(a.attempts, b.attempts);
}

}  // namespace

TEST(Tree, AddBranchAndExtract) {
  const StateSpace sp(SpaceKind::Point2D, default_workspace_bounds(2));
  Tree t(State{0, 0});
  const int a = t.add({3, 4}, 0, 5.0);
  EXPECT_EQ(t.node(a).cost, 5.0);
  const auto path = extract_path(t, a);
  ASSERT_EQ(path.size(), 2u);
  EXPECT_EQ(path.front(), (State{0, 0}));
  EXPECT_EQ(path_cost(sp, path), 5.0);
  EXPECT_FALSE(t.audit(sp).has_value());
}

TEST(Tree, ReparentRecomputesSubtreeCosts) {
  const StateSpace sp(SpaceKind::Point2D, default_workspace_bounds(2));
  Tree t(State{0, 0});
  const int a = t.add({0, 4}, 0, 4.0);
  const int b = t.add({3, 4}, a, 3.0);
  const int c = t.add({3, 6}, b, 2.0);
  t.reparent(b, 0, 5.0);
  EXPECT_EQ(t.node(b).parent, 0);
  EXPECT_DOUBLE_EQ(t.node(c).cost, 7.0);
  EXPECT_FALSE(t.audit(sp).has_value());
  EXPECT_NEAR(path_cost(sp, extract_path(t, c)), t.node(c).cost, 1e-9);
  EXPECT_EQ(t.nearest(sp, {2.9, 5.9}), c);
  EXPECT_EQ(t.near(sp, {0, 0}, 4.5).size(), 2u);
}

TEST(Tree, AuditFlagsInconsistentCost) {
  const StateSpace sp(SpaceKind::Point2D, default_workspace_bounds(2));
  Tree t(State{0, 0});
  t.add({3, 4}, 0, 4.0);
  EXPECT_TRUE(t.audit(sp).has_value());
}

TEST(Planner, DefaultConfig) {
  const PlannerConfig cfg;
  EXPECT_EQ(cfg.max_samples, 200);
  EXPECT_EQ(cfg.step_size, 2.0);
  EXPECT_EQ(cfg.gamma_rewire, 0.0);
  const StateSpace sp(SpaceKind::Point2D, default_workspace_bounds(2));
  EXPECT_NEAR(rrt_star_gamma(sp), 2.0 * std::sqrt(1.5) * std::sqrt(1600.0 / kPi), 1e-12);
  EXPECT_EQ(cfg.goal_bias, 0.05);
  EXPECT_FALSE(cfg.refine);
  EXPECT_EQ(default_max_samples(SpaceKind::Point3D, true), 400);
  EXPECT_EQ(default_max_samples(SpaceKind::Point3D, false), 200);
  EXPECT_EQ(default_max_samples(SpaceKind::Point2D, true), 200);
  PlannerConfig bad;
  bad.max_samples = 0;
  EXPECT_THROW(bad.validate(), ContractViolation);
}

TEST(Planner, EmptyWorkspaceLineExample) {
  const Scenario s = empty_line_scenario();
  PlannerConfig cfg;
  cfg.max_samples = 2000;
  cfg.refine = true;
  UniformSampler u;
  Rng rng(7);
  const PlanResult r = rrt_star(s, u, cfg, rng);
  ASSERT_TRUE(r.success);
  EXPECT_EQ(r.samples_generated, 2000);
  EXPECT_GE(r.path_length, 4.0);
  EXPECT_LE(r.path_length, 5.5);
  EXPECT_FALSE(validate_plan(s, r).has_value());
}

TEST(Planner, EnclosedGoalExhaustsBudget) {
  // Goal sits in a hollow boxed in by four walls.
  const Workspace ws{default_workspace_bounds(2),
                     {Obstacle{{10, 13}, {4, 1}}, Obstacle{{10, 7}, {4, 1}}, Obstacle{{7, 10}, {1, 4}},
                      Obstacle{{13, 10}, {1, 4}}}};
  const Scenario s = Scenario::make(ws, SpaceKind::Point2D, AgentGeometry::point_mass(), {-10, -10}, {10, 10});
  for (auto plan : {rrt_star, rrt}) {
    UniformSampler u;
    Rng rng(3);
    const PlanResult r = plan(s, u, PlannerConfig{}, rng);
    EXPECT_FALSE(r.success);
    EXPECT_EQ(r.samples_generated, 200);
    EXPECT_TRUE(r.path.empty());
  }
}

TEST(Planner, StartInsideGoalRejected) {
  EXPECT_THROW(Scenario::make(empty_ws(), SpaceKind::Point2D, AgentGeometry::point_mass(), {0, 0}, {0.5, 0}),
               ContractViolation);
}

TEST(Planner, AuditedRunsPerSpace) {
  for (SpaceKind kind : {SpaceKind::Point2D, SpaceKind::RigidBody2D, SpaceKind::Point3D, SpaceKind::Snake5DoF}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Scenario s = random_scenario(kind, 100 + seed, 5);
      PlannerConfig cfg;
      cfg.max_samples = 300;
      cfg.refine = true;
      cfg.audit = true;
      UniformSampler u;
      Rng rng(seed);
      PlanResult r;
      ASSERT_NO_THROW(r = rrt_star(s, u, cfg, rng)) << to_string(kind) << " seed " << seed;
      EXPECT_FALSE(r.trees.at(0).audit(s.space).has_value());
      if (r.success) EXPECT_FALSE(validate_plan(s, r).has_value()) << *validate_plan(s, r);
    }
  }
}

TEST(Planner, DeterministicUnderSeed) {
  const Scenario s = random_scenario(SpaceKind::RigidBody2D, 5, 6);
  UniformSampler u1, u2;
  Rng r1(11), r2(11);
  expect_same_result(rrt_star(s, u1, PlannerConfig{}, r1), rrt_star(s, u2, PlannerConfig{}, r2));
  UniformSampler f1, b1, f2, b2;
  Rng r3(12), r4(12);
  expect_same_result(bi_rrt_star(s, f1, b1, PlannerConfig{}, r3), bi_rrt_star(s, f2, b2, PlannerConfig{}, r4));
}

TEST(Planner, MoreSamplesNeverLengthenRefinedPath) {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scenario s = random_scenario(SpaceKind::Point2D, 300 + seed, 5);
    PlannerConfig small, large;
    small.refine = large.refine = true;
    small.max_samples = 200;
    large.max_samples = 2000;
    UniformSampler u1, u2;
    Rng r1(seed), r2(seed);
    const PlanResult a = rrt_star(s, u1, small, r1);
    const PlanResult b = rrt_star(s, u2, large, r2);
    if (a.success && b.success) {
      EXPECT_LE(b.path_length, a.path_length + 1e-12) << seed;
      ++compared;
    }
    // First-hit mode returns at the same insertion for both budgets.
    PlannerConfig first_small, first_large;
    first_large.max_samples = 2000;
    UniformSampler u3, u4;
    Rng r3(seed), r4(seed);
    const PlanResult c = rrt_star(s, u3, first_small, r3);
    const PlanResult d = rrt_star(s, u4, first_large, r4);
    if (c.success && d.success) EXPECT_LE(d.path_length, c.path_length);
  }
  EXPECT_GT(compared, 10);
}

TEST(Planner, BiRrtStarEmptyWorkspace) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Scenario s = generate_scenario(seed, empty_ws(), SpaceKind::Point2D, AgentGeometry::point_mass());
    UniformSampler f, b;
    Rng rng(seed);
    const PlanResult r = bi_rrt_star(s, f, b, PlannerConfig{}, rng);
    ok += r.success ? 1 : 0;
    if (r.success) EXPECT_FALSE(validate_plan(s, r).has_value());
    EXPECT_EQ(r.trees.size(), 2u);
  }
  EXPECT_GE(ok, 95);
}

TEST(Planner, BiRrtStarRandomScenariosSatisfyInvariants) {
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const Scenario s = random_scenario(seed % 2 ? SpaceKind::Point2D : SpaceKind::RigidBody2D, 1000 + seed, 5);
    UniformSampler f, b;
    Rng rng(seed);
    const PlanResult r = bi_rrt_star(s, f, b, PlannerConfig{}, rng);
    if (!r.success) continue;
    ++successes;
    const auto why = validate_plan(s, r);
    ASSERT_FALSE(why.has_value()) << seed << ": " << *why;
    EXPECT_NEAR(r.path_length, path_cost(s.space, r.path), 1e-9);
  }
  EXPECT_GT(successes, 500);
}

TEST(Planner, BiRrtStarNeverConnectsThroughWall) {
  const Workspace ws{default_workspace_bounds(2), {Obstacle{{0, 0}, {0.5, 20}}}};
  const Scenario s = Scenario::make(ws, SpaceKind::Point2D, AgentGeometry::point_mass(), {-5, 0}, {5, 0});
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    UniformSampler f, b;
    Rng rng(seed);
    PlannerConfig cfg;
    cfg.max_samples = 1000;
    const PlanResult r = bi_rrt_star(s, f, b, cfg, rng);
    EXPECT_FALSE(r.success) << seed;
  }
}

TEST(Planner, ValidatePlanCatchesTampering) {
  const Workspace ws{default_workspace_bounds(2), {Obstacle{{0, 0}, {1, 1}}}};
  const Scenario s = Scenario::make(ws, SpaceKind::Point2D, AgentGeometry::point_mass(), {-5, 0}, {5, 0});
  UniformSampler u;
  Rng rng(1);
  PlannerConfig cfg;
  cfg.max_samples = 2000;
  PlanResult r = rrt_star(s, u, cfg, rng);
  ASSERT_TRUE(r.success);
  EXPECT_FALSE(validate_plan(s, r).has_value());
  PlanResult bad = r;
  bad.path = {State{-5, 0}, State{5, 0}};
  bad.path_length = 10.0;
  EXPECT_TRUE(validate_plan(s, bad).has_value());
  bad = r;
  bad.path_length += 1.0;
  EXPECT_TRUE(validate_plan(s, bad).has_value());
}

TEST(Planner, PlainRrtProducesValidPaths) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scenario s = random_scenario(SpaceKind::Point2D, 500 + seed, 5);
    UniformSampler u;
    Rng rng(seed);
    const PlanResult r = rrt(s, u, PlannerConfig{}, rng);
    if (!r.success) continue;
    ++ok;
    EXPECT_FALSE(validate_plan(s, r).has_value());
    // Without rewiring, every cost is fixed at insertion.
    EXPECT_FALSE(r.trees[0].audit(s.space).has_value());
  }
  EXPECT_GT(ok, 30);
}

TEST(LearnedSampler, FallsBackToUniformWhenStuck) {
  SamplerConfig cfg;
  cfg.d_model = 8;
  cfg.latent_len = 4;
  cfg.n_heads = 2;
  cfg.encoder_self_layers = 1;
  cfg.decoder_self_layers = 1;
  auto model = std::make_shared<SamplerModel>(cfg, 1);
  // Collapse the distribution onto the workspace centre, which is inside an obstacle.
  for (const char* n : {"decoder.mu_head.w", "decoder.mu_head.b", "decoder.sigma_head.w"}) {
    model->params()[model->params().index_of(n)].value.setZero();
  }
  model->params()[model->params().index_of("decoder.sigma_head.b")].value.setConstant(-50.0);
  const Workspace ws{default_workspace_bounds(2), {Obstacle{{0, 0}, {2, 2}}}};
  const Scenario s = Scenario::make(ws, SpaceKind::Point2D, AgentGeometry::point_mass(), {-10, -10}, {10, 10});
  auto latents = std::make_shared<const ad::Matrix>(model->encode(normalize_cloud(workspace_point_cloud(ws), ws)));
  LearnedSampler f(model, latents), b(model, latents);
  Rng rng(2);
  PlannerConfig pc;
  pc.max_samples = 200;
  const PlanResult r = bi_rrt_star(s, f, b, pc, rng);
  EXPECT_GT(f.fallback_draws() + b.fallback_draws(), 0);
  EXPECT_LE(r.attempts, kAttemptCapFactor * pc.max_samples);
  if (r.success) EXPECT_FALSE(validate_plan(s, r).has_value());
}
