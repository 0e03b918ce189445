#include <gtest/gtest.h>

#include <cmath>
#include <algorithm>
#include <filesystem>
#include <numeric>

#include "gradcases.hpp"
#include "oracles.hpp"
#include "silrrt/error.hpp"
#include "silrrt/optim.hpp"
#include "silrrt/sampler_model.hpp"

using namespace silrrt;
using ad::Matrix;

namespace {

SamplerConfig small_config() {
  SamplerConfig cfg;
  cfg.d_model = 16;
  cfg.latent_len = 8;
  cfg.n_heads = 2;
  cfg.encoder_self_layers = 1;
  cfg.decoder_self_layers = 2;
  return cfg;
}

Matrix random_cloud(Rng& rng, int n) { return gradcases::random_matrix(rng, n, 2, -1.0, 1.0); }

std::vector<double> rand_state(Rng& rng) { return {uniform(rng, -1, 1), uniform(rng, -1, 1)}; }

void zero_param(SamplerModel& m, const std::string& name) { m.params()[m.params().index_of(name)].value.setZero(); }

void zero_heads(SamplerModel& m) {
  for (const char* n : {"decoder.mu_head.w", "decoder.mu_head.b", "decoder.sigma_head.w", "decoder.sigma_head.b"}) {
    zero_param(m, n);
  }
}

StateSpace space2d() { return StateSpace(SpaceKind::Point2D, {{-20, 20}, {-20, 20}}); }

}  // namespace

TEST(SamplerModel, WindowKeepsOnlyNewestFiveNodes) {
  SamplerModel m(small_config(), 3);
  Rng rng(1);
  const Matrix z = m.encode(random_cloud(rng, 40));
  DecoderQuery full{rand_state(rng), {}};
  for (int i = 0; i < 9; ++i) full.nodes.push_back(rand_state(rng));
  DecoderQuery tail{full.goal, {full.nodes.end() - 5, full.nodes.end()}};
  const GaussianStep a = m.decode_next(z, full);
  const GaussianStep b = m.decode_next(z, tail);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.sigma, b.sigma);

  DecoderQuery perturbed = full;
  for (int i = 0; i < 4; ++i) perturbed.nodes[static_cast<std::size_t>(i)] = rand_state(rng);
  const GaussianStep c = m.decode_next(z, perturbed);
  EXPECT_EQ(a.mu, c.mu);
  EXPECT_EQ(a.sigma, c.sigma);

  DecoderQuery inside = full;
  inside.nodes[5] = rand_state(rng);
  EXPECT_NE(m.decode_next(z, inside).mu, a.mu);
}

TEST(SamplerModel, TeacherForcedStepsIgnoreFutureNodes) {
  SamplerModel m(small_config(), 4);
  Rng rng(2);
  const std::vector<Matrix> clouds{random_cloud(rng, 30)};
  PathExample ex{0, rand_state(rng), {}};
  for (int i = 0; i < 8; ++i) ex.path.push_back(rand_state(rng));
  auto terms_of = [&](const PathExample& e) {
    ad::Tape t(false);
    const PathExample batch[] = {e};
    const SequenceTerms s = sequence_terms(t, m, clouds, batch);
    return std::pair<Matrix, Matrix>(s.log_prob.value(), s.entropy.value());
  };
  const auto [lp, ent] = terms_of(ex);
  ASSERT_EQ(lp.rows(), 7);
  for (int k = 1; k < 8; ++k) {
    PathExample p = ex;
    p.path[static_cast<std::size_t>(k)] = rand_state(rng);
    const auto [lp2, ent2] = terms_of(p);
    // Row r predicts state r + 1 from states 0..r.
    for (int r = 0; r < 7; ++r) {
      if (r < k) EXPECT_EQ(ent(r, 0), ent2(r, 0)) << k << " " << r;
      if (r < k - 1) EXPECT_EQ(lp(r, 0), lp2(r, 0)) << k << " " << r;
    }
    EXPECT_NE(lp(k - 1, 0), lp2(k - 1, 0));
  }
}

TEST(SamplerModel, LatentsArePermutationInvariant) {
  SamplerModel m(SamplerConfig{}, 5);
  Rng rng(3);
  const Matrix cloud = random_cloud(rng, 1000);
  const Matrix z = m.encode(cloud);
  EXPECT_EQ(z.rows(), 32);
  EXPECT_EQ(z.cols(), 64);
  std::vector<ad::Index> perm(1000);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix shuffled(1000, 2);
  for (int i = 0; i < 1000; ++i) shuffled.row(i) = cloud.row(perm[static_cast<std::size_t>(i)]);
  EXPECT_LT((m.encode(shuffled) - z).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_GT((m.encode(random_cloud(rng, 1000)) - z).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(SamplerModel, ZeroHeadsGiveZeroMeanAndLnTwoSigma) {
  SamplerModel m(small_config(), 6);
  zero_heads(m);
  Rng rng(4);
  const Matrix z = m.encode(random_cloud(rng, 20));
  const GaussianStep s = m.decode_next(z, {rand_state(rng), {rand_state(rng), rand_state(rng)}});
  for (int j = 0; j < 2; ++j) {
    EXPECT_EQ(s.mu[static_cast<std::size_t>(j)], 0.0);
    EXPECT_NEAR(s.sigma[static_cast<std::size_t>(j)], 0.6932471805599453, 1e-15);
  }
}

TEST(SamplerModel, SigmaRespectsFloorAndEmptyQueryRejected) {
  SamplerModel m(small_config(), 7);
  zero_param(m, "decoder.sigma_head.w");
  m.params()[m.params().index_of("decoder.sigma_head.b")].value.setConstant(-800.0);
  Rng rng(5);
  const Matrix z = m.encode(random_cloud(rng, 20));
  const GaussianStep s = m.decode_next(z, {rand_state(rng), {rand_state(rng)}});
  for (double v : s.sigma) EXPECT_GE(v, kSigmaFloor);
  EXPECT_THROW(m.decode_next(z, {rand_state(rng), {}}), ContractViolation);
}

TEST(SamplerModel, SampleNextVanishingVariance) {
  const StateSpace sp = space2d();
  Rng rng(6);
  const State target{3.25, -7.5};
  const auto n = normalize_for_model(sp, target);
  // The floor is in normalized units; compare there.
  for (int i = 0; i < 10; ++i) {
    const auto v = normalize_for_model(sp, sample_next(sp, {n, {kSigmaFloor, kSigmaFloor}}, rng));
    EXPECT_NEAR(v[0], n[0], 1e-3);
    EXPECT_NEAR(v[1], n[1], 1e-3);
  }
}

TEST(SamplerModel, SampleNextMonteCarloMean) {
  const StateSpace sp = space2d();
  Rng rng(7);
  const GaussianStep step{{0.1, -0.2}, {0.05, 0.1}};
  const int n = 100000;
  double m0 = 0, m1 = 0;
  for (int i = 0; i < n; ++i) {
    const auto v = normalize_for_model(sp, sample_next(sp, step, rng));
    m0 += v[0] / n;
    m1 += v[1] / n;
  }
  EXPECT_LT(std::abs(m0 - 0.1), 3 * 0.05 / std::sqrt(n));
  EXPECT_LT(std::abs(m1 + 0.2), 3 * 0.1 / std::sqrt(n));
}

TEST(SamplerModel, SampleNextClampsIntoBounds) {
  const StateSpace sp = space2d();
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const State s = sample_next(sp, {{0.95, -0.95}, {1.0, 1.0}}, rng);
    ASSERT_TRUE(sp.contains(s, 0.0));
  }
  const StateSpace sn(SpaceKind::Snake5DoF, {{-20, 20}, {-20, 20}});
  for (int i = 0; i < 1000; ++i) {
    const State s = sample_next(sn, {{0, 0, 0, 0.9, -0.9}, {2, 2, 2, 2, 2}}, rng);
    ASSERT_TRUE(sn.contains(s, 0.0));
  }
}

TEST(SamplerModel, NllClosedFormSingleStep) {
  SamplerModel m(small_config(), 9);
  zero_heads(m);
  Rng rng(9);
  const std::vector<Matrix> clouds{random_cloud(rng, 25)};
  const PathExample batch[] = {{0, rand_state(rng), {rand_state(rng), {0.0, 0.0}}}};
  ad::Tape t;
  const double loss = nll_loss(t, m, clouds, batch).item();
  const double s = std::log(2.0) + 1e-4;
  EXPECT_NEAR(loss, oracle::gaussian_nll({0, 0}, {0, 0}, {s, s}), 1e-12);
  EXPECT_NEAR(loss, 2 * 0.5 * std::log(2 * kPi * s * s), 1e-12);
}

TEST(SamplerModel, NllAveragesPerStepThenBatch) {
  SamplerModel m(small_config(), 10);
  Rng rng(10);
  const std::vector<Matrix> clouds{random_cloud(rng, 25), random_cloud(rng, 25)};
  const auto batch = gradcases::toy_paths(rng, 4, 2);
  ad::Tape t(false);
  const SequenceTerms terms = sequence_terms(t, m, clouds, batch);
  std::vector<double> per_example(4, 0.0);
  for (std::size_t r = 0; r < terms.example_of_row.size(); ++r) {
    const int b = terms.example_of_row[r];
    per_example[static_cast<std::size_t>(b)] +=
        terms.log_prob.value()(static_cast<ad::Index>(r), 0) / terms.steps_of_example[static_cast<std::size_t>(b)];
  }
  double expected = 0.0;
  for (double v : per_example) expected -= v / 4.0;
  ad::Tape t2(false);
  EXPECT_NEAR(nll_loss(t2, m, clouds, batch).item(), expected, 1e-12);
}

TEST(SamplerModel, OverfitsToySet) {
  SamplerModel m(small_config(), 11);
  Rng rng(11);
  const std::vector<Matrix> clouds{random_cloud(rng, 30), random_cloud(rng, 30)};
  const auto batch = gradcases::toy_paths(rng, 10, 2);
  auto params = m.params().pointers();
  ad::AdamState st;
  std::vector<double> window_means;
  double acc = 0.0;
  for (int it = 0; it < 200; ++it) {
    ad::zero_grads(params);
    ad::Tape t;
    const ad::Tensor loss = nll_loss(t, m, clouds, batch);
    ASSERT_TRUE(std::isfinite(loss.item()));
    t.backward(loss);
    ad::clip_grad_norm(params, 1.0);
    ad::adam_step(params, st, ad::AdamConfig{1e-3 * (1.0 - 0.9 * it / 200.0)});
    acc += loss.item();
    if ((it + 1) % 20 == 0) {
      window_means.push_back(acc / 20);
      acc = 0.0;
    }
  }
  for (std::size_t i = 1; i < window_means.size(); ++i) EXPECT_LT(window_means[i], window_means[i - 1]) << i;
}

TEST(SamplerModel, ReversedPathsStayFinite) {
  SamplerModel m(small_config(), 12);
  Rng rng(12);
  const std::vector<Matrix> clouds{random_cloud(rng, 30)};
  auto batch = gradcases::toy_paths(rng, 5, 1);
  for (auto& ex : batch) std::reverse(ex.path.begin(), ex.path.end());
  ad::Tape t(false);
  EXPECT_TRUE(std::isfinite(nll_loss(t, m, clouds, batch).item()));
}

TEST(SamplerModel, ReverseAugment) {
  const StateSpace sp = space2d();
  const GoalPath gp{{9, 9}, {{0, 0}, {1, 2}, {3, 3}}};
  Rng rng(13);
  const GoalPath r = reverse_augment(gp, rng, 1.0);
  EXPECT_EQ(r.path, (std::vector<State>{{3, 3}, {1, 2}, {0, 0}}));
  EXPECT_EQ(r.goal, (State{0, 0}));
  EXPECT_EQ(reverse_augment(r, rng, 1.0).path, gp.path);
  EXPECT_NEAR(path_cost(sp, r.path), path_cost(sp, gp.path), 1e-12);
  EXPECT_EQ(reverse_augment(gp, rng, 0.0).path, gp.path);
  int flips = 0;
  for (int i = 0; i < 10000; ++i) flips += reverse_augment(gp, rng, 0.5).path != gp.path ? 1 : 0;
  EXPECT_NEAR(flips / 10000.0, 0.5, 0.03);
}

TEST(SamplerModel, CheckpointRoundTripIsBitIdentical) {
  SamplerConfig cfg = small_config();
  cfg.predict_delta = true;
  SamplerModel m(cfg, 13);
  const auto path = std::filesystem::path(::testing::TempDir()) / "sampler_roundtrip.ckpt";
  save_checkpoint(path, m.to_checkpoint());
  const SamplerModel back = SamplerModel::from_checkpoint(load_checkpoint(path));
  EXPECT_EQ(back.config(), cfg);
  Rng rng(14);
  const Matrix cloud = random_cloud(rng, 50);
  const Matrix z1 = m.encode(cloud), z2 = back.encode(cloud);
  EXPECT_EQ(z1, z2);
  const DecoderQuery q{rand_state(rng), {rand_state(rng), rand_state(rng), rand_state(rng)}};
  EXPECT_EQ(m.decode_next(z1, q).mu, back.decode_next(z2, q).mu);
  EXPECT_EQ(m.decode_next(z1, q).sigma, back.decode_next(z2, q).sigma);
}

TEST(SamplerModel, CheckpointKindAndConfigValidated) {
  SamplerModel m(small_config(), 14);
  Checkpoint c = m.to_checkpoint();
  c.model_kind = "estimator";
  EXPECT_THROW(SamplerModel::from_checkpoint(c), FormatError);
  c = m.to_checkpoint();
  c.hyperparameters["d_model"] = "sixteen";
  EXPECT_THROW(SamplerModel::from_checkpoint(c), FormatError);
  c = m.to_checkpoint();
  c.hyperparameters["d_model"] = "32";
  EXPECT_THROW(SamplerModel::from_checkpoint(c), FormatError);
  EXPECT_EQ(SamplerConfig::from_hyperparameters(small_config().to_hyperparameters()), small_config());
}
