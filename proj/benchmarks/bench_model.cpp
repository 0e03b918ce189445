#include <benchmark/benchmark.h>

#include "silrrt/autodiff.hpp"
#include "silrrt/estimator.hpp"
#include "silrrt/sampler_model.hpp"

using namespace silrrt;
using ad::Matrix;

namespace {

Matrix cloud(int n) {
  Rng rng(5);
  Matrix m(n, 2);
  for (ad::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -1, 1);
  return m;
}

void BM_EncodeCloud(benchmark::State& state) {
  const SamplerModel m(SamplerConfig{}, 1);
  const Matrix c = cloud(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(m.encode(c));
}
BENCHMARK(BM_EncodeCloud)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_DecodeNext(benchmark::State& state) {
  const SamplerModel m(SamplerConfig{}, 1);
  const Matrix z = m.encode(cloud(1000));
  DecoderQuery q{{0.5, 0.5}, {}};
  for (int i = 0; i < 5; ++i) q.nodes.push_back({-0.5 + 0.1 * i, -0.4});
  for (auto _ : state) benchmark::DoNotOptimize(m.decode_next(z, q));
}
BENCHMARK(BM_DecodeNext)->Unit(benchmark::kMicrosecond);

void BM_EstimateLength(benchmark::State& state) {
  const EstimatorModel m(EstimatorConfig{}, 2);
  const Matrix c = cloud(1000);
  const LengthQuery q{{-0.5, -0.5}, {0.5, 0.5}};
  for (auto _ : state) benchmark::DoNotOptimize(m.estimate_length(c, q));
}
BENCHMARK(BM_EstimateLength)->Unit(benchmark::kMillisecond);

void BM_MatmulBackward(benchmark::State& state) {
  const auto n = static_cast<ad::Index>(state.range(0));
  ad::Parameter a("a", Matrix::Random(n, n)), b("b", Matrix::Random(n, n));
  for (auto _ : state) {
    ad::Tape t;
    const ad::Tensor y = ad::sum(ad::matmul(t.parameter(a), t.parameter(b)));
    t.backward(y);
    benchmark::DoNotOptimize(a.grad.data());
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(16)->Arg(64);

}  // namespace
