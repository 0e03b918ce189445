#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "silrrt/autodiff.hpp"
#include "silrrt/environment.hpp"
#include "silrrt/optim.hpp"
#include "silrrt/sampler_model.hpp"

namespace silrrt {

/// Scenarios with their normalized clouds; scenarios that share a workspace share a cloud.
struct TaskSet {
  std::vector<Scenario> scenarios;
  std::vector<int> cloud_of;      // per scenario
  std::vector<ad::Matrix> clouds;  // normalized, n x ambient_dim

  /// Groups scenarios by identical workspace and samples each workspace's cloud once.
  static TaskSet build(std::vector<Scenario> scenarios, int cloud_points = kDefaultPointCloudSize);
  const ad::Matrix& cloud_for(std::size_t scenario) const {
    return clouds[static_cast<std::size_t>(cloud_of[scenario])];
  }
};

/// A solved query: the scenario it came from and the path found, start to goal region.
struct Demonstration {
  int scenario = 0;
  std::vector<State> path;
};

struct PretrainConfig {
  int iterations = 2000;
  int batch_size = 16;
  ad::AdamConfig adam;
  double clip_norm = 1.0;
  double reverse_prob = 0.5;
  std::uint64_t seed = 0;
};

struct PretrainLogRow {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

/// Goal-conditioned training example for a demonstration, before augmentation.
GoalPath goal_path(const TaskSet& tasks, const Demonstration& demo);

/// Negative log-likelihood pretraining: minibatches drawn uniformly with
/// replacement, reversed with probability reverse_prob, one Adam step each.
std::vector<PretrainLogRow> pretrain(SamplerModel& model, const TaskSet& tasks, std::span<const Demonstration> demos,
                                     const PretrainConfig& config, ad::AdamState& optimizer);

}  // namespace silrrt
