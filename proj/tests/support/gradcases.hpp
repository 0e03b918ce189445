#pragma once

// Finite-difference cases shared by the unit tests and the acceptance run.

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "silrrt/autodiff.hpp"
#include "silrrt/estimator.hpp"
#include "silrrt/gradcheck.hpp"
#include "silrrt/rng.hpp"
#include "silrrt/sampler_model.hpp"

namespace gradcases {

using silrrt::ad::GradCheckReport;
using silrrt::ad::Index;
using silrrt::ad::Matrix;
using silrrt::ad::Parameter;
using silrrt::ad::Tape;
using silrrt::ad::Tensor;

struct Case {
  std::string name;
  GradCheckReport report;
  long long param_count = 0;
};

inline Matrix random_matrix(silrrt::Rng& rng, Index r, Index c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = silrrt::uniform(rng, lo, hi);
  return m;
}

/// Reduces any op output to a scalar through fixed random weights.
class OpHarness {
 public:
  explicit OpHarness(std::uint64_t seed) : rng_(seed) {}

  Parameter& param(const std::string& name, Index r, Index c, double lo = -1.0, double hi = 1.0) {
    params_.emplace_back(name, random_matrix(rng_, r, c, lo, hi));
    return params_.back();
  }

  Case run(const std::string& name, const std::function<Tensor(Tape&, std::vector<Tensor>&)>& op) {
    std::vector<Parameter*> ptrs;
    for (auto& p : params_) ptrs.push_back(&p);
    Matrix weights;
    auto loss = [&](Tape& tape) {
      std::vector<Tensor> leaves;
      for (auto& p : params_) leaves.push_back(tape.parameter(p));
      Tensor out = op(tape, leaves);
      if (weights.size() == 0) weights = random_matrix(rng_, out.rows(), out.cols());
      return silrrt::ad::weighted_sum(out, weights);
    };
    Case c{name, silrrt::ad::finite_diff_check(loss, ptrs), 0};
    for (auto& p : params_) c.param_count += p.size();
    return c;
  }

  silrrt::Rng& rng() { return rng_; }

 private:
  silrrt::Rng rng_;
  std::deque<Parameter> params_;
};

inline silrrt::SamplerConfig tiny_sampler_config() {
  silrrt::SamplerConfig cfg;
  cfg.d_model = 4;
  cfg.latent_len = 3;
  cfg.n_heads = 2;
  cfg.encoder_self_layers = 1;
  cfg.decoder_self_layers = 1;
  cfg.mlp_ratio = 1;
  return cfg;
}

inline silrrt::EstimatorConfig tiny_estimator_config() {
  silrrt::EstimatorConfig cfg;
  cfg.d_model = 4;
  cfg.latent_len = 3;
  cfg.n_heads = 2;
  cfg.encoder_self_layers = 1;
  cfg.mlp_ratio = 1;
  return cfg;
}

inline std::vector<silrrt::PathExample> toy_paths(silrrt::Rng& rng, int count, int cloud_count) {
  std::vector<silrrt::PathExample> out;
  for (int i = 0; i < count; ++i) {
    silrrt::PathExample ex;
    ex.cloud = i % cloud_count;
    ex.goal = {silrrt::uniform(rng, -0.9, 0.9), silrrt::uniform(rng, -0.9, 0.9)};
    const int len = 2 + i % 6;
    for (int k = 0; k < len; ++k) ex.path.push_back({silrrt::uniform(rng, -0.9, 0.9), silrrt::uniform(rng, -0.9, 0.9)});
    out.push_back(std::move(ex));
  }
  return out;
}

inline std::vector<Case> run_all(std::uint64_t seed = 1234) {
  namespace ad = silrrt::ad;
  std::vector<Case> cases;
  using Leaves = std::vector<Tensor>;
  auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> f, double lo = -1.0,
                   double hi = 1.0) {
    OpHarness h(seed + cases.size());
    h.param("x", 3, 4, lo, hi);
    cases.push_back(h.run(name, [&](Tape&, Leaves& l) { return f(l[0]); }));
  };
  auto binary = [&](const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> f, double lo = -1.0,
                    double hi = 1.0) {
    OpHarness h(seed + cases.size());
    h.param("a", 3, 4);
    h.param("b", 3, 4, lo, hi);
    cases.push_back(h.run(name, [&](Tape&, Leaves& l) { return f(l[0], l[1]); }));
  };

  binary("add", ad::add);
  binary("sub", ad::sub);
  binary("mul", ad::mul);
  binary("div", ad::div, 0.5, 2.0);
  unary("scale", [](const Tensor& x) { return ad::scale(x, -1.7); });
  unary("add_scalar", [](const Tensor& x) { return ad::square(ad::add_scalar(x, 0.3)); });
  unary("transpose", [](const Tensor& x) { return ad::transpose(x); });
  unary("relu", [](const Tensor& x) { return ad::relu(x); });
  unary("softplus", ad::softplus, -3.0, 3.0);
  unary("exp", ad::exp);
  unary("log", ad::log, 0.2, 3.0);
  unary("square", ad::square);
  unary("sum", [](const Tensor& x) { return ad::square(ad::sum(x)); });
  unary("mean", [](const Tensor& x) { return ad::square(ad::mean(x)); });
  unary("row_sum", [](const Tensor& x) { return ad::square(ad::row_sum(x)); });
  unary("slice_rows", [](const Tensor& x) { return ad::slice_rows(x, 1, 2); });
  unary("slice_cols", [](const Tensor& x) { return ad::slice_cols(x, 1, 2); });
  unary("gather_rows", [](const Tensor& x) {
    const Index rows[] = {2, 0, 2, 1};
    return ad::square(ad::gather_rows(x, rows));
  });
  unary("softmax", ad::softmax, -2.0, 2.0);
  unary("masked_softmax", [](const Tensor& x) {
    ad::Mask m(3, 4);
    m << true, false, true, true, false, true, false, false, true, true, true, true;
    return ad::masked_softmax(x, m);
  });
  {
    OpHarness h(seed + 100);
    h.param("a", 3, 4);
    h.param("row", 1, 4);
    cases.push_back(h.run("add_row", [](Tape&, Leaves& l) { return ad::add_row(l[0], l[1]); }));
  }
  {
    OpHarness h(seed + 101);
    h.param("a", 3, 4);
    h.param("b", 4, 2);
    cases.push_back(h.run("matmul", [](Tape&, Leaves& l) { return ad::matmul(l[0], l[1]); }));
  }
  {
    OpHarness h(seed + 102);
    h.param("a", 2, 3);
    h.param("b", 1, 3);
    h.param("c", 2, 2);
    cases.push_back(h.run("concat", [](Tape&, Leaves& l) {
      const Tensor rows[] = {l[0], l[1]};
      const Tensor stacked = ad::concat_rows(rows);
      const Tensor cols[] = {ad::slice_rows(stacked, 0, 2), l[2]};
      return ad::concat_cols(cols);
    }));
  }
  {
    OpHarness h(seed + 103);
    h.param("x", 3, 4);
    h.param("w", 4, 5);
    h.param("b", 1, 5);
    cases.push_back(h.run("linear", [](Tape&, Leaves& l) { return ad::linear(l[0], l[1], l[2]); }));
  }
  {
    OpHarness h(seed + 104);
    h.param("x", 3, 5, -2.0, 2.0);
    h.param("gain", 1, 5, 0.5, 1.5);
    h.param("bias", 1, 5);
    cases.push_back(h.run("layer_norm", [](Tape&, Leaves& l) { return ad::layer_norm(l[0], l[1], l[2]); }));
  }
  {
    OpHarness h(seed + 105);
    h.param("q", 3, 4);
    h.param("k", 5, 4);
    h.param("v", 5, 2);
    cases.push_back(h.run("attention", [](Tape&, Leaves& l) { return ad::attention(l[0], l[1], l[2]); }));
  }
  {
    OpHarness h(seed + 106);
    h.param("q", 3, 4);
    h.param("k", 5, 4);
    h.param("v", 5, 4);
    cases.push_back(
        h.run("multi_head_attention", [](Tape&, Leaves& l) { return ad::multi_head_attention(l[0], l[1], l[2], 2); }));
  }
  {
    OpHarness h(seed + 107);
    h.param("q", 6, 4);
    h.param("k", 6, 4);
    h.param("v", 6, 4);
    cases.push_back(h.run("grouped_causal_attention",
                          [](Tape&, Leaves& l) { return ad::grouped_causal_attention(l[0], l[1], l[2], 2, 3); }));
  }
  {
    OpHarness h(seed + 108);
    h.param("x", 2, 4);
    h.param("w1", 4, 6);
    h.param("b1", 1, 6);
    h.param("w2", 6, 3);
    h.param("b2", 1, 3);
    h.param("gain", 1, 4, 0.5, 1.5);
    h.param("bias", 1, 4);
    h.param("ctx", 3, 4);
    cases.push_back(h.run("attention_layernorm_mlp", [](Tape&, Leaves& l) {
      const Tensor n = ad::layer_norm(l[0], l[5], l[6]);
      const Tensor a = ad::add(n, ad::attention(n, l[7], l[7]));
      return ad::linear(ad::relu(ad::linear(a, l[1], l[2])), l[3], l[4]);
    }));
  }
  {
    OpHarness h(seed + 109);
    h.param("mu", 3, 2);
    h.param("raw_sigma", 3, 2);
    const Matrix target = random_matrix(h.rng(), 3, 2);
    cases.push_back(h.run("gaussian_nll", [target](Tape&, Leaves& l) {
      return ad::scale(ad::gaussian_log_prob(l[0], ad::add_scalar(ad::softplus(l[1]), 1e-4), target), -1.0);
    }));
  }
  {
    OpHarness h(seed + 110);
    h.param("raw_sigma", 3, 2);
    cases.push_back(h.run("gaussian_entropy", [](Tape&, Leaves& l) {
      return ad::gaussian_entropy(ad::add_scalar(ad::softplus(l[0]), 1e-4));
    }));
  }
  {
    OpHarness h(seed + 111);
    h.param("c_est", 4, 1, 0.0, 5.0);
    const std::vector<double> c_real{1.0, 2.5, -0.5, 3.0};
    cases.push_back(
        h.run("estimator_loss", [c_real](Tape&, Leaves& l) { return silrrt::estimator_loss(l[0], c_real); }));
  }

  silrrt::Rng rng(seed + 200);
  const std::vector<Matrix> clouds{random_matrix(rng, 6, 2, -0.9, 0.9), random_matrix(rng, 5, 2, -0.9, 0.9)};
  {
    silrrt::SamplerModel model(tiny_sampler_config(), seed + 201);
    const auto batch = toy_paths(rng, 3, 2);
    const auto ptrs = model.params().pointers();
    auto loss = [&](Tape& t) { return silrrt::nll_loss(t, model, clouds, batch); };
    cases.push_back({"sampler_forward", ad::finite_diff_check(loss, ptrs), model.params().element_count()});
  }
  {
    silrrt::EstimatorModel model(tiny_estimator_config(), seed + 202);
    std::vector<silrrt::EstimatorExample> batch;
    for (int i = 0; i < 3; ++i) {
      batch.push_back({i % 2,
                       {{silrrt::uniform(rng, -0.9, 0.9), silrrt::uniform(rng, -0.9, 0.9)},
                        {silrrt::uniform(rng, -0.9, 0.9), silrrt::uniform(rng, -0.9, 0.9)}},
                       silrrt::uniform(rng, 2.0, 20.0)});
    }
    const auto ptrs = model.params().pointers();
    auto loss = [&](Tape& t) { return silrrt::estimator_batch_loss(t, model, clouds, batch); };
    cases.push_back({"estimator_forward", ad::finite_diff_check(loss, ptrs), model.params().element_count()});
  }
  return cases;
}

}  // namespace gradcases
