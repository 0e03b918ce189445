#include <gtest/gtest.h>

#include <cmath>

#include "gradcases.hpp"
#include "oracles.hpp"
#include "silrrt/error.hpp"
#include "silrrt/training.hpp"
#include "silrrt/wsil.hpp"

using namespace silrrt;
using ad::Matrix;

namespace {

TaskSet small_tasks(int count, std::uint64_t seed) {
  std::vector<Scenario> scenarios;
  for (int w = 0; w < 2; ++w) {
    Rng rng(seed + static_cast<std::uint64_t>(w));
    const Workspace ws = generate_workspace(rng, 2, 3, {1.5, 4.5});
    for (int i = 0; i < count / 2; ++i) {
      scenarios.push_back(generate_scenario(seed * 100 + static_cast<std::uint64_t>(w * 10 + i), ws,
                                            SpaceKind::Point2D, AgentGeometry::point_mass()));
    }
  }
  return TaskSet::build(std::move(scenarios), 64);
}

DemonstrationRecord record(int id) { return {id, {State{0, 0}, State{1, 0}}, 1.0, RecordSource::RRT}; }

std::vector<Matrix> snapshot_grads(nn::ParamStore& s) {
  std::vector<Matrix> out;
  for (auto* p : s.pointers()) out.push_back(p->grad);
  return out;
}

}  // namespace

TEST(QualityWeight, ExactValues) {
  EXPECT_NEAR(quality_weight(12.0, 10.0, 0.0), 1.0 / (1.0 + std::exp(2.0)), 1e-12);
  EXPECT_NEAR(quality_weight(12.0, 10.0, 0.0), 0.11920292202211755, 1e-12);
  EXPECT_EQ(quality_weight(13.0, 5.0, 8.0), 0.5);
  EXPECT_EQ(quality_weight(10.0, 10.0, 0.0), 0.5);
  EXPECT_GT(quality_weight(1.0, 100.0, 1.0), 1.0 - 1e-12);
  EXPECT_LT(quality_weight(100.0, 1.0, 1.0), 1e-12);
}

TEST(QualityWeight, RangeAndMonotonicity) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double cr = uniform(rng, 0, 80), ce = uniform(rng, 0, 80), K = uniform(rng, 1e-3, 10);
    const double w = quality_weight(cr, ce, K);
    ASSERT_GT(w, 0.0);
    ASSERT_LT(w, 1.0);
    ASSERT_NEAR(w, oracle::sigmoid_weight(cr, ce, K), 1e-12);
    const double dd = uniform(rng, 0.01, 1.0);
    ASSERT_LE(quality_weight(cr + dd, ce, K), w);
    ASSERT_GE(quality_weight(cr, ce + dd, K), w);
    ASSERT_GE(quality_weight(cr, ce, K + dd), w);
  }
}

TEST(QualityWeight, SaturationStaysInsideOpenInterval) {
  for (double gap : {40.0, 100.0, 800.0, 1e6}) {
    EXPECT_LT(quality_weight(0.0, gap, 0.0), 1.0) << gap;
    EXPECT_GT(quality_weight(gap, 0.0, 0.0), 0.0) << gap;
  }
  EXPECT_GE(quality_weight(0.0, 1e6, 0.0), quality_weight(0.0, 10.0, 0.0));
}

TEST(AnnealK, Schedule) {
  const WsilConfig cfg;
  EXPECT_EQ(anneal_K(8.0, 500, cfg), 4.0);
  EXPECT_EQ(anneal_K(8.0, 499, cfg), 8.0);
  EXPECT_EQ(anneal_K(8.0, 501, cfg), 8.0);
  EXPECT_EQ(anneal_K(8.0, 0, cfg), 8.0);
  EXPECT_EQ(anneal_K(1.5e-3, 1000, cfg), kMinimumK);
  double K = cfg.K0;
  for (long long s = 1; s <= 20000; ++s) {
    const double next = anneal_K(K, s, cfg);
    ASSERT_LE(next, K);
    ASSERT_GE(next, kMinimumK);
    K = next;
  }
  EXPECT_EQ(K, kMinimumK);
}

TEST(Epsilon, LinearThenConstant) {
  WsilConfig cfg;
  cfg.iterations = 1000;
  EXPECT_EQ(epsilon_at(0, cfg), 1.0);
  EXPECT_NEAR(epsilon_at(250, cfg), 0.55, 1e-12);
  EXPECT_NEAR(epsilon_at(500, cfg), 0.1, 1e-12);
  EXPECT_NEAR(epsilon_at(999, cfg), 0.1, 1e-12);
  for (int i = 1; i < 1000; ++i) ASSERT_LE(epsilon_at(i, cfg), epsilon_at(i - 1, cfg));
}

TEST(ReplayBuffer, FifoEviction) {
  ReplayBuffer b(3);
  for (int i = 0; i < 5; ++i) {
    b.push(record(i));
    ASSERT_LE(b.size(), 3u);
  }
  ASSERT_EQ(b.size(), 3u);
  EXPECT_EQ(b[0].scenario_id, 2);
  EXPECT_EQ(b[2].scenario_id, 4);
  Rng rng(2);
  const auto s = b.sample(100, rng);
  EXPECT_EQ(s.size(), 100u);
  for (const auto* r : s) EXPECT_GE(r->scenario_id, 2);
}

TEST(WsilLoss, ReducesToNllBitForBit) {
  SamplerModel m(gradcases::tiny_sampler_config(), 3);
  Rng rng(3);
  const std::vector<Matrix> clouds{gradcases::random_matrix(rng, 12, 2), gradcases::random_matrix(rng, 9, 2)};
  const auto batch = gradcases::toy_paths(rng, 6, 2);
  auto params = m.params().pointers();

  ad::zero_grads(params);
  ad::Tape t1;
  const ad::Tensor nll = nll_loss(t1, m, clouds, batch);
  t1.backward(nll);
  const auto g_nll = snapshot_grads(m.params());

  ad::zero_grads(params);
  ad::Tape t2;
  const std::vector<double> ones(batch.size(), 1.0);
  const ad::Tensor w = wsil_loss(t2, m, clouds, batch, ones, 0.0);
  t2.backward(w);
  const auto g_w = snapshot_grads(m.params());

  EXPECT_EQ(nll.item(), w.item());
  for (std::size_t i = 0; i < g_nll.size(); ++i) EXPECT_EQ(g_nll[i], g_w[i]) << params[i]->name;
}

TEST(WsilLoss, ZeroWeightsLeaveOnlyEntropy) {
  SamplerModel m(gradcases::tiny_sampler_config(), 4);
  Rng rng(4);
  const std::vector<Matrix> clouds{gradcases::random_matrix(rng, 12, 2)};
  const auto batch = gradcases::toy_paths(rng, 4, 1);
  const std::vector<double> zeros(batch.size(), 0.0);
  const double lambda = 0.5;

  ad::Tape t0(false);
  const SequenceTerms terms = sequence_terms(t0, m, clouds, batch);
  double ent = 0.0;
  for (std::size_t r = 0; r < terms.example_of_row.size(); ++r) {
    const auto b = static_cast<std::size_t>(terms.example_of_row[r]);
    ent += terms.entropy.value()(static_cast<ad::Index>(r), 0) / (4.0 * terms.steps_of_example[b]);
  }
  auto params = m.params().pointers();
  ad::zero_grads(params);
  ad::Tape t;
  const ad::Tensor loss = wsil_loss(t, m, clouds, batch, zeros, lambda);
  EXPECT_NEAR(loss.item(), -lambda * ent, 1e-12);
  t.backward(loss);
  const auto& s = m.params();
  EXPECT_EQ(s[s.index_of("decoder.mu_head.w")].grad.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(s[s.index_of("decoder.mu_head.b")].grad.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(s[s.index_of("decoder.sigma_head.b")].grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(WsilLoss, EntropyOfUnitSigma) {
  EXPECT_NEAR(oracle::gaussian_entropy({1.0, 1.0}), 2.8379, 1e-4);
  ad::Tape t;
  EXPECT_NEAR(ad::gaussian_entropy(t.constant(Matrix::Ones(1, 2))).item(), oracle::gaussian_entropy({1.0, 1.0}), 1e-14);
}

TEST(WsilLoss, RejectsBadArguments) {
  SamplerModel m(gradcases::tiny_sampler_config(), 5);
  Rng rng(5);
  const std::vector<Matrix> clouds{gradcases::random_matrix(rng, 12, 2)};
  const auto batch = gradcases::toy_paths(rng, 2, 1);
  ad::Tape t;
  const std::vector<double> one{1.0};
  EXPECT_THROW(wsil_loss(t, m, clouds, batch, one, 0.0), ContractViolation);
  const std::vector<double> two{1.0, 1.0};
  EXPECT_THROW(wsil_loss(t, m, clouds, batch, two, -1.0), ContractViolation);
}

TEST(Pretrain, GradientsDoNotAccumulateAcrossSteps) {
  const TaskSet tasks = small_tasks(2, 7);
  SamplerModel m(gradcases::tiny_sampler_config(), 6);
  const std::vector<Demonstration> demos{{0, {tasks.scenarios[0].start, tasks.scenarios[0].goal}}};
  PretrainConfig cfg;
  cfg.batch_size = 1;
  cfg.reverse_prob = 0.0;
  cfg.clip_norm = 0.0;
  cfg.adam.lr = 0.0;
  cfg.iterations = 1;
  ad::AdamState st1, st2;
  pretrain(m, tasks, demos, cfg, st1);
  const auto g1 = snapshot_grads(m.params());
  cfg.iterations = 3;
  pretrain(m, tasks, demos, cfg, st2);
  const auto g3 = snapshot_grads(m.params());
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g1[i], g3[i]);
}

TEST(RunWsil, LogContractAndInvariants) {
  const TaskSet tasks = small_tasks(6, 11);
  SamplerModel sampler(gradcases::tiny_sampler_config(), 7);
  EstimatorModel estimator(gradcases::tiny_estimator_config(), 8);
  WsilConfig cfg;
  cfg.iterations = 30;
  cfg.anneal_every = 4;
  cfg.batch_size = 4;
  cfg.buffer_capacity = 5;
  PlannerConfig pc;
  pc.max_samples = 60;
  WsilState state(cfg);
  Rng rng(9);
  std::vector<WsilLogRow> streamed;
  const auto log = run_wsil(tasks, sampler, estimator, cfg, pc, state, rng,
                            [&](const WsilLogRow& r) { streamed.push_back(r); });
  ASSERT_EQ(log.size(), 30u);
  EXPECT_EQ(streamed.size(), 30u);
  EXPECT_FALSE(log[0].learned_planner);
  EXPECT_EQ(log[0].epsilon, 1.0);
  std::size_t prev_len = 0;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& r = log[i];
    EXPECT_EQ(r.iteration, static_cast<int>(i));
    const double expected_K = std::max(kMinimumK, cfg.K0 / std::pow(cfg.mu_K, static_cast<double>(i / 4)));
    EXPECT_EQ(r.K, expected_K) << i;
    EXPECT_LE(r.buffer_len, cfg.buffer_capacity);
    if (!r.success) EXPECT_EQ(r.buffer_len, prev_len);
    if (r.success && prev_len < cfg.buffer_capacity) EXPECT_EQ(r.buffer_len, prev_len + 1);
    EXPECT_EQ(r.skipped_update, r.buffer_len == 0);
    if (!r.skipped_update) {
      EXPECT_GT(r.min_weight, 0.0);
      EXPECT_LT(r.max_weight, 1.0);
      EXPECT_TRUE(std::isfinite(r.sampler_loss));
      EXPECT_TRUE(std::isfinite(r.estimator_loss));
    }
    prev_len = r.buffer_len;
  }
  EXPECT_EQ(state.step, 30);
  for (const auto& rec : state.buffer.records()) {
    const Scenario& s = tasks.scenarios[static_cast<std::size_t>(rec.scenario_id)];
    EXPECT_NEAR(rec.c_real, path_cost(s.space, rec.path), 1e-9);
    for (std::size_t k = 1; k < rec.path.size(); ++k) EXPECT_FALSE(edge_in_collision(s, rec.path[k - 1], rec.path[k]));
    EXPECT_EQ(rec.path.front(), s.start);
    EXPECT_LE(distance(s.space, rec.path.back(), s.goal), s.goal_radius);
  }
}

TEST(RunWsil, EmptyBufferSkipsUpdate) {
  // Every query fails: the goal is walled in.
  const Workspace ws{default_workspace_bounds(2),
                     {Obstacle{{10, 13}, {4, 1}}, Obstacle{{10, 7}, {4, 1}}, Obstacle{{7, 10}, {1, 4}},
                      Obstacle{{13, 10}, {1, 4}}}};
  const TaskSet tasks = TaskSet::build(
      {Scenario::make(ws, SpaceKind::Point2D, AgentGeometry::point_mass(), {-10, -10}, {10, 10})}, 64);
  SamplerModel sampler(gradcases::tiny_sampler_config(), 1);
  EstimatorModel estimator(gradcases::tiny_estimator_config(), 2);
  const Checkpoint before = sampler.to_checkpoint();
  WsilConfig cfg;
  cfg.iterations = 3;
  PlannerConfig pc;
  pc.max_samples = 20;
  WsilState state(cfg);
  Rng rng(3);
  const auto log = run_wsil(tasks, sampler, estimator, cfg, pc, state, rng);
  for (const auto& r : log) {
    EXPECT_FALSE(r.success);
    EXPECT_TRUE(r.skipped_update);
    EXPECT_EQ(r.buffer_len, 0u);
  }
  const Checkpoint after = sampler.to_checkpoint();
  for (std::size_t i = 0; i < before.entries.size(); ++i) EXPECT_EQ(before.entries[i].data, after.entries[i].data);
}

TEST(RunWsil, DeterministicUnderSeed) {
  const TaskSet tasks = small_tasks(4, 13);
  auto run = [&] {
    SamplerModel sampler(gradcases::tiny_sampler_config(), 7);
    EstimatorModel estimator(gradcases::tiny_estimator_config(), 8);
    WsilConfig cfg;
    cfg.iterations = 12;
    cfg.batch_size = 3;
    PlannerConfig pc;
    pc.max_samples = 40;
    WsilState state(cfg);
    Rng rng(21);
    const auto log = run_wsil(tasks, sampler, estimator, cfg, pc, state, rng);
    std::vector<double> sig;
    for (const auto& r : log) {
      sig.push_back(r.sampler_loss);
      sig.push_back(r.estimator_loss);
      sig.push_back(static_cast<double>(r.buffer_len));
    }
    for (const auto& e : sampler.to_checkpoint().entries) sig.insert(sig.end(), e.data.begin(), e.data.end());
    return sig;
  };
  EXPECT_EQ(run(), run());
}
