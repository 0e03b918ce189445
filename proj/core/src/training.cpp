#include "silrrt/training.hpp"

#include <map>

#include "silrrt/error.hpp"

namespace silrrt {

TaskSet TaskSet::build(std::vector<Scenario> scenarios, int cloud_points) {
  TaskSet t;
  std::vector<const Workspace*> seen;
  for (const auto& s : scenarios) {
    int idx = -1;
    for (std::size_t k = 0; k < seen.size(); ++k) {
      if (*seen[k] == s.workspace) {
        idx = static_cast<int>(k);
        break;
      }
    }
    if (idx < 0) {
      idx = static_cast<int>(seen.size());
      seen.push_back(&s.workspace);
      t.clouds.push_back(normalize_cloud(workspace_point_cloud(s.workspace, cloud_points), s.workspace));
    }
    t.cloud_of.push_back(idx);
  }
  t.scenarios = std::move(scenarios);
  return t;
}

GoalPath goal_path(const TaskSet& tasks, const Demonstration& demo) {
  require(demo.scenario >= 0 && static_cast<std::size_t>(demo.scenario) < tasks.scenarios.size(),
          "demonstration refers to an unknown scenario");
  return GoalPath{tasks.scenarios[static_cast<std::size_t>(demo.scenario)].goal, demo.path};
}

std::vector<PretrainLogRow> pretrain(SamplerModel& model, const TaskSet& tasks, std::span<const Demonstration> demos,
                                     const PretrainConfig& config, ad::AdamState& optimizer) {
  require(config.iterations >= 0 && config.batch_size >= 1, "invalid pretraining schedule");
  std::vector<PretrainLogRow> log;
  if (config.iterations == 0) return log;
  require(!demos.empty(), "pretraining needs at least one demonstration");
  Rng rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, demos.size() - 1);
  auto params = model.params().pointers();
  for (int it = 0; it < config.iterations; ++it) {
    std::vector<PathExample> batch;
    for (int b = 0; b < config.batch_size; ++b) {
      const Demonstration& d = demos[pick(rng)];
      const Scenario& scn = tasks.scenarios[static_cast<std::size_t>(d.scenario)];
      GoalPath gp = reverse_augment(goal_path(tasks, d), rng, config.reverse_prob);
      batch.push_back(make_example(scn.space, tasks.cloud_of[static_cast<std::size_t>(d.scenario)], gp));
    }
    ad::zero_grads(params);
    ad::Tape tape;
    ad::Tensor loss = nll_loss(tape, model, tasks.clouds, batch);
    tape.backward(loss);
    const double norm = ad::clip_grad_norm(params, config.clip_norm);
    ad::adam_step(params, optimizer, config.adam);
    log.push_back({it, loss.item(), norm});
  }
  return log;
}

}  // namespace silrrt
