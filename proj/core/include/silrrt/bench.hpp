#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "silrrt/environment.hpp"
#include "silrrt/io.hpp"
#include "silrrt/planner.hpp"
#include "silrrt/sampler_model.hpp"
#include "silrrt/training.hpp"

namespace silrrt {

/// Worker count from SILRRT_THREADS, else the hardware concurrency (at least 1).
int default_thread_count();

/// Runs fn(0..n-1) on up to `threads` workers; the first exception is rethrown after all workers stop.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

struct GenDataConfig {
  SpaceKind space = SpaceKind::Point2D;
  int workspaces = 20;
  int scenarios_per = 25;
  /// Extra workspaces whose scenarios form the test split (no paths collected).
  int test_workspaces = 0;
  int obstacles = 5;
  Interval half_extent_range{1.5, 4.5};
  double goal_radius = kDefaultGoalRadius;
  double angular_weight = 1.0;
  std::uint64_t seed = 1;
  /// Demonstrations use the whole budget and keep the best path found.
  PlannerConfig planner = [] {
    PlannerConfig p;
    p.max_samples = 2000;
    p.refine = true;
    return p;
  }();
};

struct DatasetScenario {
  int id = 0;
  int workspace = 0;
  std::string split;  // "train" or "test"
  Scenario scenario;
};

struct DatasetEntry {
  int scenario = 0;
  std::vector<State> path;
  double c_real = 0.0;
  int samples_generated = 0;
};

struct Dataset {
  GenDataConfig config;
  std::vector<DatasetScenario> scenarios;
  std::vector<DatasetEntry> entries;  // successful training collections only
  int attempted = 0;

  double collection_success_rate() const {
    return attempted == 0 ? 0.0 : static_cast<double>(entries.size()) / attempted;
  }
  std::vector<int> split_ids(const std::string& split) const;
};

/// Pure function of the config: workspaces, scenarios and uniform RRT* paths.
Dataset generate_dataset(const GenDataConfig& config, int threads = 1);

/// Writes manifest.json, entries.json and scenarios/NNNNN.json under `dir`.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset read_dataset(const std::filesystem::path& dir);

Json to_json(const GenDataConfig& c);
GenDataConfig gen_data_config_from_json(const Json& j);

/// All dataset scenarios as a task set, indexed by scenario id, and the training demonstrations.
TaskSet dataset_tasks(const Dataset& dataset);
std::vector<Demonstration> dataset_demonstrations(const Dataset& dataset);

enum class PlannerKind { UniformRrtStar, UniformRrt, UniformBiRrtStar, LearnedBiRrtStar };

struct PlannerSpec {
  std::string name;
  PlannerKind kind = PlannerKind::UniformRrtStar;
  std::shared_ptr<const SamplerModel> model;  // learned planners only
};

struct EvalConfig {
  int trials = 3;
  std::uint64_t seed = 1;
  /// 0 selects the default per planner and space (200, or 400 for uniform RRT* in 3D).
  int max_samples = 0;
  PlannerConfig planner;
  int threads = 1;
  std::string preset = "desk";
};

struct EvalRow {
  std::string planner;
  int scenario = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  int max_samples = 0;
  PlanResult result;
};

/// Seed of one (scenario, trial) query; every planner sees the same stream.
std::uint64_t query_seed(std::uint64_t master, int scenario, int trial);

PlanResult plan_once(const PlannerSpec& spec, const Scenario& scenario, const ad::Matrix* cloud,
                     const PlannerConfig& config, Rng& rng);

/// Runs every planner on every listed scenario `trials` times. Row order is planner, scenario, trial.
std::vector<EvalRow> evaluate(const TaskSet& tasks, const std::vector<int>& scenario_ids,
                              const std::vector<PlannerSpec>& planners, const EvalConfig& config);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Sample standard deviation (n - 1); zero for fewer than two values.
MeanStd mean_std(const std::vector<double>& v);

struct EvalSummary {
  std::string planner;
  std::string env;
  int queries = 0;
  int successes = 0;
  int trials = 0;
  double success_rate = 0.0;  // percent
  MeanStd samples;
  MeanStd path_length;
  MeanStd time;
  std::string population = "success-conditioned";
  std::string preset;
};

std::vector<EvalSummary> summarize(const std::vector<EvalRow>& rows, const std::string& env, int trials,
                                   const std::string& preset);

std::string eval_rows_csv(const std::vector<EvalRow>& rows);
std::string eval_summary_csv(const std::vector<EvalSummary>& summary);

/// SVG of a scenario, its point cloud, an optional result's trees (one <line class="edge"> per non-root node)
/// and path (one <polyline class="path">). Point3D renders xy, xz and yz projections side by side.
std::string render_svg(const Scenario& scenario, const PlanResult* result, bool draw_cloud = true);

}  // namespace silrrt
