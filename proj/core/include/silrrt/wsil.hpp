#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "silrrt/estimator.hpp"
#include "silrrt/optim.hpp"
#include "silrrt/planner.hpp"
#include "silrrt/sampler_model.hpp"
#include "silrrt/training.hpp"

namespace silrrt {

inline constexpr double kMinimumK = 1e-3;

enum class RecordSource { RRT, SilRrtStar };

std::string_view to_string(RecordSource source);
RecordSource record_source_from_string(std::string_view name);

struct DemonstrationRecord {
  int scenario_id = 0;
  std::vector<State> path;
  double c_real = 0.0;
  RecordSource source = RecordSource::RRT;
};

/// Fixed-capacity FIFO: pushing into a full buffer evicts the oldest record.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 2048);

  void push(DemonstrationRecord record);
  std::size_t size() const { return records_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return records_.empty(); }
  const DemonstrationRecord& operator[](std::size_t i) const { return records_[i]; }
  /// Uniform with replacement.
  std::vector<const DemonstrationRecord*> sample(std::size_t n, Rng& rng) const;
  const std::deque<DemonstrationRecord>& records() const { return records_; }

 private:
  std::size_t capacity_;
  std::deque<DemonstrationRecord> records_;
};

struct WsilConfig {
  int iterations = 1000;
  double K0 = 8.0;
  double mu_K = 2.0;
  int anneal_every = 500;
  double lambda_entropy = 1e-3;
  int batch_size = 16;
  std::size_t buffer_capacity = 2048;
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  /// Fraction of the run over which epsilon decays linearly.
  double epsilon_decay_fraction = 0.5;
  /// Fine-tuning steps are ten times smaller than pretraining's.
  ad::AdamConfig sampler_adam{.lr = 1e-4};
  ad::AdamConfig estimator_adam;
  /// Plain theta <- theta - lr * grad instead of Adam, for both networks.
  bool use_sgd = false;
  double sgd_lr = 1e-3;
  double clip_norm = 1.0;
  double reverse_prob = 0.5;

  void validate() const;
};

/// 1 / (1 + exp(C_real - C_est - K)), evaluated without overflow and kept strictly inside (0, 1).
double quality_weight(double c_real, double c_est, double K);

/// K / mu_K when `step` is a positive multiple of anneal_every, else K; never below kMinimumK.
double anneal_K(double K, long long step, const WsilConfig& config);

double epsilon_at(int iteration, const WsilConfig& config);

struct WsilLogRow {
  int iteration = 0;
  double epsilon = 0.0;
  double K = 0.0;
  std::size_t buffer_len = 0;
  bool success = false;
  bool learned_planner = false;
  bool skipped_update = false;
  double mean_weight = 0.0;
  double min_weight = 0.0;
  double max_weight = 0.0;
  double sampler_loss = 0.0;
  double estimator_loss = 0.0;
};

struct WsilState {
  ad::AdamState sampler_opt;
  ad::AdamState estimator_opt;
  ReplayBuffer buffer;
  double K = 8.0;
  long long step = 0;  // completed iterations across resumed runs

  explicit WsilState(const WsilConfig& config) : buffer(config.buffer_capacity), K(config.K0) {}
};

/// Weighted self-imitation fine-tuning. Each iteration samples a scenario,
/// plans with learned BiRRT* when rand() > epsilon and plain uniform RRT
/// otherwise, stores successes, then takes one gradient step on each network
/// from a minibatch of the buffer. `on_row` sees every log row as it is made.
std::vector<WsilLogRow> run_wsil(const TaskSet& tasks, SamplerModel& sampler, EstimatorModel& estimator,
                                 const WsilConfig& config, const PlannerConfig& planner, WsilState& state, Rng& rng,
                                 const std::function<void(const WsilLogRow&)>& on_row = {});

}  // namespace silrrt
