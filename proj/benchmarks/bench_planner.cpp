#include <benchmark/benchmark.h>

#include "silrrt/environment.hpp"
#include "silrrt/planner.hpp"

using namespace silrrt;

namespace {

Scenario scene(SpaceKind kind, int obstacles) {
  Rng rng(3);
  const Workspace ws = generate_workspace(rng, kind == SpaceKind::Point3D ? 3 : 2, obstacles, {1.5, 4.5});
  return generate_scenario(11, ws, kind, AgentGeometry::default_for(kind));
}

void BM_EdgeCollision(benchmark::State& state) {
  const auto kind = static_cast<SpaceKind>(state.range(0));
  const Scenario s = scene(kind, 10);
  Rng rng(1);
  std::vector<std::pair<State, State>> edges;
  for (int i = 0; i < 256; ++i) {
    State a = sample_uniform(s.space, rng);
    edges.emplace_back(a, steer(s.space, a, sample_uniform(s.space, rng), 2.0));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    const auto& [a, b] = edges[i++ % edges.size()];
    benchmark::DoNotOptimize(edge_in_collision(s, a, b));
  }
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_EdgeCollision)->DenseRange(0, 3);

void BM_TreeNearest(benchmark::State& state) {
  const StateSpace space(SpaceKind::Point2D, default_workspace_bounds(2));
  Rng rng(2);
  Tree t(sample_uniform(space, rng));
  for (int i = 1; i < state.range(0); ++i) t.add(sample_uniform(space, rng), 0, 1.0);
  const State q = sample_uniform(space, rng);
  for (auto _ : state) benchmark::DoNotOptimize(t.nearest(space, q));
}
BENCHMARK(BM_TreeNearest)->Arg(200)->Arg(2000);

void BM_RrtStar(benchmark::State& state) {
  const Scenario s = scene(SpaceKind::Point2D, 5);
  PlannerConfig cfg;
  cfg.max_samples = static_cast<int>(state.range(0));
  cfg.refine = true;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    UniformSampler u;
    Rng rng(seed++);
    benchmark::DoNotOptimize(rrt_star(s, u, cfg, rng));
  }
}
BENCHMARK(BM_RrtStar)->Arg(200)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_BiRrtStar(benchmark::State& state) {
  const Scenario s = scene(SpaceKind::Point2D, 5);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    UniformSampler f, b;
    Rng rng(seed++);
    benchmark::DoNotOptimize(bi_rrt_star(s, f, b, PlannerConfig{}, rng));
  }
}
BENCHMARK(BM_BiRrtStar)->Unit(benchmark::kMicrosecond);

}  // namespace
BENCHMARK_MAIN();
