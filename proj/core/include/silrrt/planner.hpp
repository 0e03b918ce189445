#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "silrrt/environment.hpp"
#include "silrrt/geometry.hpp"
#include "silrrt/rng.hpp"
#include "silrrt/sampler_model.hpp"

namespace silrrt {

inline constexpr int kDefaultMaxSamples = 200;
inline constexpr int kDefaultMaxSamplesUniform3D = 400;
inline constexpr double kDefaultStepSize = 2.0;
inline constexpr double kDefaultGoalBias = 0.05;
inline constexpr int kAttemptCapFactor = 50;
inline constexpr int kLearnedFallbackAfter = 20;

struct TreeNode {
  State state;
  int parent = -1;
  double edge_cost = 0.0;  // distance to parent
  double cost = 0.0;       // cost-to-come
  std::vector<int> children;
};

/// Search tree rooted at node 0. Costs are kept exact: a reparented subtree is
/// recomputed as parent.cost + edge_cost all the way down.
class Tree {
 public:
  explicit Tree(State root);

  std::size_t size() const { return nodes_.size(); }
  const TreeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  int add(State state, int parent, double edge_cost);
  void reparent(int node, int new_parent, double edge_cost);

  int nearest(const StateSpace& space, const State& s) const;
  std::vector<int> near(const StateSpace& space, const State& s, double radius) const;

  /// Root-to-node states.
  std::vector<State> branch(int node) const;

  /// Describes the first violated invariant (root, cost consistency, child links, acyclicity), if any.
  std::optional<std::string> audit(const StateSpace& space, double tol = 1e-9) const;

 private:
  std::vector<TreeNode> nodes_;
};

std::vector<State> extract_path(const Tree& tree, int goal_node);

/// What a sampler may look at when proposing the next state for one tree.
struct SampleContext {
  const Scenario& scenario;
  const Tree& tree;
  /// The state this tree is growing toward: the goal, or the other tree's root.
  const State& target;
  /// Most recently inserted node of this tree (0 before any insertion).
  int newest = 0;
};

class SamplerPort {
 public:
  virtual ~SamplerPort() = default;
  virtual State next_sample(const SampleContext& ctx, Rng& rng) = 0;
  /// Outcome of the last proposal: inserted into the tree or rejected.
  virtual void report(bool /*inserted*/) {}
  virtual std::string name() const = 0;
};

class UniformSampler final : public SamplerPort {
 public:
  explicit UniformSampler(double goal_bias = kDefaultGoalBias);
  State next_sample(const SampleContext& ctx, Rng& rng) override;
  std::string name() const override { return "uniform"; }

 private:
  double goal_bias_;
};

enum class ConditioningMode {
  BranchPrefix,    // root-to-newest-node path
  InsertionOrder,  // the tree's nodes in insertion order
};

/// Draws from the sampler model's Gaussian. After `kLearnedFallbackAfter`
/// consecutive rejections one uniform state is drawn instead.
class LearnedSampler final : public SamplerPort {
 public:
  /// `latents` is Z_p for the scenario's point cloud, shareable between trees.
  LearnedSampler(std::shared_ptr<const SamplerModel> model, std::shared_ptr<const ad::Matrix> latents,
                 ConditioningMode mode = ConditioningMode::BranchPrefix);

  State next_sample(const SampleContext& ctx, Rng& rng) override;
  void report(bool inserted) override;
  std::string name() const override { return "learned"; }

  int fallback_draws() const { return fallback_draws_; }

 private:
  std::shared_ptr<const SamplerModel> model_;
  std::shared_ptr<const ad::Matrix> latents_;
  ConditioningMode mode_;
  int consecutive_failures_ = 0;
  int fallback_draws_ = 0;
};

struct PlannerConfig {
  int max_samples = kDefaultMaxSamples;
  double step_size = kDefaultStepSize;
  /// Rewiring constant; the near radius is min(step_size, gamma_rewire * (log n / n)^(1/d)).
  /// 0 selects rrt_star_gamma() for the scenario's space.
  double gamma_rewire = 0.0;
  double goal_bias = kDefaultGoalBias;
  double collision_step = kDefaultCollisionStep;
  /// Keep sampling to the budget and return the best solution instead of stopping at the first.
  bool refine = false;
  /// Check tree invariants after every insertion and rewire; throws on violation.
  bool audit = false;

  void validate() const;
};

/// 2 (1 + 1/d)^(1/d) (vol / unit-ball vol)^(1/d) over the space's bounding box, with angular
/// extents scaled by the angular weight. Smaller constants lose asymptotic optimality.
double rrt_star_gamma(const StateSpace& space);

/// Max samples for a planner/space pair: 400 for uniform RRT* in 3D, 200 otherwise.
int default_max_samples(SpaceKind space, bool uniform_rrt_star);

struct PlanResult {
  bool success = false;
  std::vector<State> path;
  double path_length = 0.0;
  int samples_generated = 0;
  long long collision_checks = 0;
  int attempts = 0;
  double wall_time = 0.0;
  /// Search trees at termination (one, or two for the bidirectional planner).
  std::vector<Tree> trees;
};

PlanResult rrt_star(const Scenario& scenario, SamplerPort& sampler, const PlannerConfig& config, Rng& rng);

/// Plain RRT: nearest-node parent, no rewiring.
PlanResult rrt(const Scenario& scenario, SamplerPort& sampler, const PlannerConfig& config, Rng& rng);

PlanResult bi_rrt_star(const Scenario& scenario, SamplerPort& sampler_fwd, SamplerPort& sampler_bwd,
                       const PlannerConfig& config, Rng& rng);

/// Why a result violates its contract (start, goal region, collision-free edges, length), if it does.
std::optional<std::string> validate_plan(const Scenario& scenario, const PlanResult& result,
                                         double collision_step = kDefaultCollisionStep);

}  // namespace silrrt
