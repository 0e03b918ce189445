#include "silrrt/wsil.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "silrrt/error.hpp"

namespace silrrt {

std::string_view to_string(RecordSource source) { return source == RecordSource::RRT ? "RRT" : "SIL-RRT*"; }

RecordSource record_source_from_string(std::string_view name) {
  if (name == "RRT") return RecordSource::RRT;
  if (name == "SIL-RRT*") return RecordSource::SilRrtStar;
  throw FormatError("unknown record source '" + std::string(name) + "'");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity >= 1, "replay buffer capacity must be at least 1");
}

void ReplayBuffer::push(DemonstrationRecord record) {
  if (records_.size() == capacity_) records_.pop_front();
  records_.push_back(std::move(record));
}

std::vector<const DemonstrationRecord*> ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  require(!records_.empty(), "cannot sample from an empty buffer");
  std::uniform_int_distribution<std::size_t> pick(0, records_.size() - 1);
  std::vector<const DemonstrationRecord*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&records_[pick(rng)]);
  return out;
}

void WsilConfig::validate() const {
  require(iterations >= 0, "iterations must be non-negative");
  require(K0 > 0.0, "K0 must be positive");
  require(mu_K > 1.0, "mu_K must exceed 1");
  require(anneal_every >= 1, "anneal_every must be at least 1");
  require(lambda_entropy >= 0.0, "lambda must be non-negative");
  require(batch_size >= 1 && buffer_capacity >= 1, "batch size and buffer capacity must be positive");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0 && epsilon_end >= 0.0 && epsilon_end <= 1.0,
          "epsilon endpoints must be probabilities");
  require(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0, "epsilon decay fraction must be in (0, 1]");
}

double quality_weight(double c_real, double c_est, double K) {
  const double x = c_real - c_est - K;
  double w;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    w = e / (1.0 + e);
  } else {
    w = 1.0 / (1.0 + std::exp(x));
  }
  // The sigmoid saturates to exactly 0 or 1 in doubles for |x| > ~37; keep the open interval.
  return std::clamp(w, std::numeric_limits<double>::denorm_min(), std::nextafter(1.0, 0.0));
}

double anneal_K(double K, long long step, const WsilConfig& config) {
  require(K > 0.0, "K must be positive");
  if (step > 0 && step % config.anneal_every == 0) return std::max(K / config.mu_K, kMinimumK);
  return K;
}

double epsilon_at(int iteration, const WsilConfig& config) {
  const double horizon = config.epsilon_decay_fraction * static_cast<double>(config.iterations);
  const double t = horizon > 0.0 ? std::min(1.0, static_cast<double>(iteration) / horizon) : 1.0;
  return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * t;
}

std::vector<WsilLogRow> run_wsil(const TaskSet& tasks, SamplerModel& sampler, EstimatorModel& estimator,
                                 const WsilConfig& config, const PlannerConfig& planner, WsilState& state, Rng& rng,
                                 const std::function<void(const WsilLogRow&)>& on_row) {
  config.validate();
  require(!tasks.scenarios.empty(), "WSIL needs at least one scenario");
  require(sampler.config().state_dim == tasks.scenarios.front().space.dim(),
          "sampler checkpoint does not match the scenarios' state space");
  require(estimator.config().state_dim == tasks.scenarios.front().space.dim(),
          "estimator does not match the scenarios' state space");
  std::uniform_int_distribution<std::size_t> pick_scenario(0, tasks.scenarios.size() - 1);
  auto sampler_params = sampler.params().pointers();
  auto estimator_params = estimator.params().pointers();
  const std::shared_ptr<const SamplerModel> model_view(std::shared_ptr<void>(), &sampler);

  std::vector<WsilLogRow> log;
  for (int it = 0; it < config.iterations; ++it) {
    WsilLogRow row;
    row.iteration = it;
    row.epsilon = epsilon_at(it, config);
    row.K = state.K;

    const std::size_t si = pick_scenario(rng);
    const Scenario& scn = tasks.scenarios[si];
    row.learned_planner = uniform01(rng) > row.epsilon;
    Rng plan_rng(rng());
    PlanResult plan;
    if (row.learned_planner) {
      auto latents = std::make_shared<const ad::Matrix>(sampler.encode(tasks.cloud_for(si)));
      LearnedSampler fwd(model_view, latents), bwd(model_view, latents);
      plan = bi_rrt_star(scn, fwd, bwd, planner, plan_rng);
    } else {
      UniformSampler uniform(planner.goal_bias);
      plan = rrt(scn, uniform, planner, plan_rng);
    }
    row.success = plan.success;
    if (plan.success) {
      state.buffer.push(DemonstrationRecord{static_cast<int>(si), plan.path, plan.path_length,
                                            row.learned_planner ? RecordSource::SilRrtStar : RecordSource::RRT});
    }
    row.buffer_len = state.buffer.size();

    if (state.buffer.empty()) {
      row.skipped_update = true;
    } else {
      const auto records = state.buffer.sample(static_cast<std::size_t>(config.batch_size), rng);
      std::vector<EstimatorExample> est_batch;
      std::vector<PathExample> batch;
      for (const DemonstrationRecord* r : records) {
        const Scenario& rs = tasks.scenarios[static_cast<std::size_t>(r->scenario_id)];
        const int cloud = tasks.cloud_of[static_cast<std::size_t>(r->scenario_id)];
        est_batch.push_back({cloud, {normalize_for_model(rs.space, rs.start), normalize_for_model(rs.space, rs.goal)},
                             r->c_real});
        GoalPath gp = reverse_augment(GoalPath{rs.goal, r->path}, rng, config.reverse_prob);
        batch.push_back(make_example(rs.space, cloud, gp));
      }
      const std::vector<double> c_est = estimate_batch(estimator, tasks.clouds, est_batch);
      std::vector<double> weights;
      for (std::size_t b = 0; b < records.size(); ++b) weights.push_back(quality_weight(records[b]->c_real, c_est[b], state.K));
      row.mean_weight = 0.0;
      for (double w : weights) row.mean_weight += w;
      row.mean_weight /= static_cast<double>(weights.size());
      row.min_weight = *std::min_element(weights.begin(), weights.end());
      row.max_weight = *std::max_element(weights.begin(), weights.end());

      {
        ad::zero_grads(sampler_params);
        ad::Tape tape;
        ad::Tensor loss = wsil_loss(tape, sampler, tasks.clouds, batch, weights, config.lambda_entropy);
        tape.backward(loss);
        ad::clip_grad_norm(sampler_params, config.clip_norm);
        if (config.use_sgd) {
          ad::sgd_step(sampler_params, config.sgd_lr);
        } else {
          ad::adam_step(sampler_params, state.sampler_opt, config.sampler_adam);
        }
        row.sampler_loss = loss.item();
      }
      {
        ad::zero_grads(estimator_params);
        ad::Tape tape;
        ad::Tensor loss = estimator_batch_loss(tape, estimator, tasks.clouds, est_batch);
        tape.backward(loss);
        ad::clip_grad_norm(estimator_params, config.clip_norm);
        if (config.use_sgd) {
          ad::sgd_step(estimator_params, config.sgd_lr);
        } else {
          ad::adam_step(estimator_params, state.estimator_opt, config.estimator_adam);
        }
        row.estimator_loss = loss.item();
      }
    }
    state.K = anneal_K(state.K, ++state.step, config);
    if (on_row) on_row(row);
    log.push_back(row);
  }
  return log;
}

}  // namespace silrrt
