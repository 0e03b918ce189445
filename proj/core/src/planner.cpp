#include "silrrt/planner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "silrrt/error.hpp"

namespace silrrt {

Tree::Tree(State root) { nodes_.push_back(TreeNode{std::move(root), -1, 0.0, 0.0, {}}); }

int Tree::add(State state, int parent, double edge_cost) {
  require(parent >= 0 && static_cast<std::size_t>(parent) < nodes_.size(), "parent index out of range");
  const int id = static_cast<int>(nodes_.size());
  const double cost = nodes_[static_cast<std::size_t>(parent)].cost + edge_cost;
  nodes_.push_back(TreeNode{std::move(state), parent, edge_cost, cost, {}});
  nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
  return id;
}

void Tree::reparent(int node, int new_parent, double edge_cost) {
  require(node > 0 && static_cast<std::size_t>(node) < nodes_.size(), "cannot reparent the root");
  auto& n = nodes_[static_cast<std::size_t>(node)];
  auto& old_children = nodes_[static_cast<std::size_t>(n.parent)].children;
  old_children.erase(std::find(old_children.begin(), old_children.end(), node));
  n.parent = new_parent;
  n.edge_cost = edge_cost;
  nodes_[static_cast<std::size_t>(new_parent)].children.push_back(node);
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    auto& cur = nodes_[static_cast<std::size_t>(i)];
    cur.cost = nodes_[static_cast<std::size_t>(cur.parent)].cost + cur.edge_cost;
    stack.insert(stack.end(), cur.children.begin(), cur.children.end());
  }
}

int Tree::nearest(const StateSpace& space, const State& s) const {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const double d = distance(space, nodes_[i].state, s);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<int> Tree::near(const StateSpace& space, const State& s, double radius) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (distance(space, nodes_[i].state, s) <= radius) out.push_back(static_cast<int>(i));
  }
  return out;
}

std::vector<State> Tree::branch(int node) const {
  std::vector<State> out;
  for (int i = node; i >= 0; i = nodes_[static_cast<std::size_t>(i)].parent) {
    out.push_back(nodes_[static_cast<std::size_t>(i)].state);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::optional<std::string> Tree::audit(const StateSpace& space, double tol) const {
  if (nodes_.empty()) return "tree has no root";
  if (nodes_[0].parent != -1 || nodes_[0].cost != 0.0) return "root must have no parent and zero cost";
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.parent < 0 || static_cast<std::size_t>(n.parent) >= nodes_.size()) {
      return "node " + std::to_string(i) + " has an invalid parent";
    }
    const auto& p = nodes_[static_cast<std::size_t>(n.parent)];
    if (std::count(p.children.begin(), p.children.end(), static_cast<int>(i)) != 1) {
      return "node " + std::to_string(i) + " is not listed once among its parent's children";
    }
    const double expected = p.cost + distance(space, p.state, n.state);
    if (std::abs(n.cost - expected) > tol * std::max(1.0, expected)) {
      return "node " + std::to_string(i) + " cost is inconsistent with its parent";
    }
  }
  // Every node must reach the root within size() hops.
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    int cur = static_cast<int>(i);
    std::size_t hops = 0;
    while (cur != 0 && hops <= nodes_.size()) {
      cur = nodes_[static_cast<std::size_t>(cur)].parent;
      ++hops;
    }
    if (cur != 0) return "parent graph has a cycle through node " + std::to_string(i);
  }
  return std::nullopt;
}

std::vector<State> extract_path(const Tree& tree, int goal_node) {
  require(goal_node >= 0 && static_cast<std::size_t>(goal_node) < tree.size(), "goal node not in tree");
  return tree.branch(goal_node);
}

UniformSampler::UniformSampler(double goal_bias) : goal_bias_(goal_bias) {
  require(goal_bias >= 0.0 && goal_bias <= 1.0, "goal bias must be a probability");
}

State UniformSampler::next_sample(const SampleContext& ctx, Rng& rng) {
  if (goal_bias_ > 0.0 && uniform01(rng) < goal_bias_) return ctx.target;
  return sample_uniform(ctx.scenario.space, rng);
}

LearnedSampler::LearnedSampler(std::shared_ptr<const SamplerModel> model, std::shared_ptr<const ad::Matrix> latents,
                               ConditioningMode mode)
    : model_(std::move(model)), latents_(std::move(latents)), mode_(mode) {
  require(model_ != nullptr && latents_ != nullptr, "learned sampler needs a model and latents");
}

State LearnedSampler::next_sample(const SampleContext& ctx, Rng& rng) {
  const StateSpace& space = ctx.scenario.space;
  if (consecutive_failures_ >= kLearnedFallbackAfter) {
    consecutive_failures_ = 0;
    ++fallback_draws_;
    return sample_uniform(space, rng);
  }
  require(model_->config().state_dim == space.dim(), "sampler model state_dim does not match the scenario");
  DecoderQuery q;
  q.goal = normalize_for_model(space, ctx.target);
  const int window = model_->config().context_window;
  if (mode_ == ConditioningMode::BranchPrefix) {
    std::vector<int> chain;
    for (int i = ctx.newest; i >= 0 && static_cast<int>(chain.size()) < window; i = ctx.tree.node(i).parent) {
      chain.push_back(i);
    }
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
      q.nodes.push_back(normalize_for_model(space, ctx.tree.node(*it).state));
    }
  } else {
    const int n = static_cast<int>(ctx.tree.size());
    for (int i = std::max(0, n - window); i < n; ++i) q.nodes.push_back(normalize_for_model(space, ctx.tree.node(i).state));
  }
  return sample_next(space, model_->decode_next(*latents_, q), rng);
}

void LearnedSampler::report(bool inserted) { consecutive_failures_ = inserted ? 0 : consecutive_failures_ + 1; }

void PlannerConfig::validate() const {
  require(max_samples >= 1, "max_samples must be at least 1");
  require(step_size > 0.0 && collision_step > 0.0, "planner lengths must be positive");
  require(gamma_rewire >= 0.0, "gamma_rewire must be non-negative");
  require(goal_bias >= 0.0 && goal_bias <= 1.0, "goal bias must be a probability");
}

double rrt_star_gamma(const StateSpace& space) {
  const double d = space.dim();
  double volume = 1.0;
  for (int i = 0; i < space.dim(); ++i) {
    const double w = space.bound(i).width();
    volume *= space.coord_kind(i) == CoordKind::Linear ? w : w * space.angular_weight();
  }
  const double unit_ball = std::pow(kPi, d / 2.0) / std::tgamma(d / 2.0 + 1.0);
  return 2.0 * std::pow(1.0 + 1.0 / d, 1.0 / d) * std::pow(volume / unit_ball, 1.0 / d);
}

int default_max_samples(SpaceKind space, bool uniform_rrt_star) {
  return space == SpaceKind::Point3D && uniform_rrt_star ? kDefaultMaxSamplesUniform3D : kDefaultMaxSamples;
}

namespace {

using Clock = std::chrono::steady_clock;

class Search {
 public:
  Search(const Scenario& scenario, const PlannerConfig& config)
      : scn_(scenario),
        cfg_(config),
        gamma_(config.gamma_rewire > 0.0 ? config.gamma_rewire : rrt_star_gamma(scenario.space)) {
    config.validate();
    require(scenario.space.contains(scenario.start) && scenario.space.contains(scenario.goal),
            "scenario start/goal out of bounds");
  }

  long long checks() const { return checks_; }

  bool edge_free(const State& a, const State& b) {
    ++checks_;
    return !edge_in_collision(scn_, a, b, cfg_.collision_step);
  }

  /// Steers toward `x_rand` from its nearest node and inserts the result; -1 when rejected.
  int extend(Tree& tree, const State& x_rand, bool rewire) {
    const StateSpace& space = scn_.space;
    const int nearest = tree.nearest(space, x_rand);
    const State& x_near = tree.node(nearest).state;
    State x_new = steer(space, x_near, x_rand, cfg_.step_size);
    const double d_near = distance(space, x_near, x_new);
    if (d_near <= 0.0) return -1;
    ++checks_;
    if (state_in_collision(scn_, x_new)) return -1;
    if (!edge_free(x_near, x_new)) return -1;
    if (!rewire) return tree.add(std::move(x_new), nearest, d_near);

    const double n = static_cast<double>(tree.size() + 1);
    const double radius =
        std::min(cfg_.step_size, gamma_ * std::pow(std::log(n) / n, 1.0 / static_cast<double>(space.dim())));
    std::vector<int> near = tree.near(space, x_new, radius);
    int parent = nearest;
    double parent_edge = d_near;
    double best = tree.node(nearest).cost + d_near;
    for (int i : near) {
      if (i == nearest) continue;
      const double e = distance(space, tree.node(i).state, x_new);
      const double c = tree.node(i).cost + e;
      if (c < best && edge_free(tree.node(i).state, x_new)) {
        best = c;
        parent = i;
        parent_edge = e;
      }
    }
    std::vector<double> before;
    if (cfg_.audit) {
      for (const auto& node : tree.nodes()) before.push_back(node.cost);
    }
    const int id = tree.add(std::move(x_new), parent, parent_edge);
    const State& s_new = tree.node(id).state;
    for (int i : near) {
      if (i == parent) continue;
      const double e = distance(space, s_new, tree.node(i).state);
      if (tree.node(id).cost + e < tree.node(i).cost && edge_free(s_new, tree.node(i).state)) {
        tree.reparent(i, id, e);
      }
    }
    if (cfg_.audit) audit(tree, before);
    return id;
  }

  void audit(const Tree& tree, const std::vector<double>& before) const {
    if (auto err = tree.audit(scn_.space)) throw std::logic_error("tree invariant violated: " + *err);
    for (std::size_t i = 0; i < before.size(); ++i) {
      if (tree.node(static_cast<int>(i)).cost > before[i]) {
        throw std::logic_error("rewiring increased the cost of node " + std::to_string(i));
      }
    }
  }

 private:
  const Scenario& scn_;
  const PlannerConfig& cfg_;
  double gamma_;
  long long checks_ = 0;
};

bool in_goal_region(const Scenario& scn, const State& s) { return distance(scn.space, s, scn.goal) <= scn.goal_radius; }

PlanResult single_tree(const Scenario& scn, SamplerPort& sampler, const PlannerConfig& cfg, Rng& rng, bool rewire) {
  const auto t0 = Clock::now();
  Search search(scn, cfg);
  PlanResult result;
  Tree tree(scn.start);
  const long long cap = static_cast<long long>(kAttemptCapFactor) * cfg.max_samples;
  int newest = 0;
  bool reached = false;
  while (result.samples_generated < cfg.max_samples && result.attempts < cap) {
    ++result.attempts;
    SampleContext ctx{scn, tree, scn.goal, newest};
    const State x_rand = sampler.next_sample(ctx, rng);
    const int id = search.extend(tree, x_rand, rewire);
    sampler.report(id >= 0);
    if (id < 0) continue;
    ++result.samples_generated;
    newest = id;
    if (in_goal_region(scn, tree.node(id).state)) {
      reached = true;
      if (!cfg.refine) break;
    }
  }
  if (reached) {
    int best = cfg.refine ? -1 : newest;
    for (std::size_t i = 0; cfg.refine && i < tree.size(); ++i) {
      const int id = static_cast<int>(i);
      if (in_goal_region(scn, tree.node(id).state) && (best < 0 || tree.node(id).cost < tree.node(best).cost)) best = id;
    }
    result.success = true;
    result.path = extract_path(tree, best);
    result.path_length = path_cost(scn.space, result.path);
  }
  result.collision_checks = search.checks();
  result.trees.push_back(std::move(tree));
  result.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return result;
}

}  // namespace

PlanResult rrt_star(const Scenario& scenario, SamplerPort& sampler, const PlannerConfig& config, Rng& rng) {
  return single_tree(scenario, sampler, config, rng, true);
}

PlanResult rrt(const Scenario& scenario, SamplerPort& sampler, const PlannerConfig& config, Rng& rng) {
  return single_tree(scenario, sampler, config, rng, false);
}

PlanResult bi_rrt_star(const Scenario& scn, SamplerPort& sampler_fwd, SamplerPort& sampler_bwd,
                       const PlannerConfig& cfg, Rng& rng) {
  const auto t0 = Clock::now();
  Search search(scn, cfg);
  PlanResult result;
  Tree trees[2] = {Tree(scn.start), Tree(scn.goal)};
  SamplerPort* samplers[2] = {&sampler_fwd, &sampler_bwd};
  int newest[2] = {0, 0};
  // Connections as (forward node, backward node); costs are re-read at the end since rewiring lowers them.
  std::vector<std::pair<int, int>> links;
  const long long cap = static_cast<long long>(kAttemptCapFactor) * cfg.max_samples;
  int turn = 0;
  while (result.samples_generated < cfg.max_samples && result.attempts < cap) {
    ++result.attempts;
    const int a = turn;
    const int b = 1 - turn;
    turn = b;
    Tree& tree = trees[a];
    const State& target = trees[b].node(0).state;
    SampleContext ctx{scn, tree, target, newest[a]};
    const State x_rand = samplers[a]->next_sample(ctx, rng);
    const int id = search.extend(tree, x_rand, true);
    samplers[a]->report(id >= 0);
    if (id < 0) continue;
    ++result.samples_generated;
    newest[a] = id;
    const State& x_new = tree.node(id).state;
    const int other = trees[b].nearest(scn.space, x_new);
    const State& x_other = trees[b].node(other).state;
    if (distance(scn.space, x_new, x_other) <= cfg.step_size && search.edge_free(x_new, x_other)) {
      links.emplace_back(a == 0 ? id : other, a == 0 ? other : id);
      if (!cfg.refine) break;
    }
  }
  if (!links.empty()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [f, g] : links) {
      const double c = trees[0].node(f).cost + trees[1].node(g).cost +
                       distance(scn.space, trees[0].node(f).state, trees[1].node(g).state);
      if (c < best) {
        best = c;
        result.path = trees[0].branch(f);
        std::vector<State> back = trees[1].branch(g);
        result.path.insert(result.path.end(), back.rbegin(), back.rend());
      }
    }
    result.success = true;
    result.path_length = path_cost(scn.space, result.path);
  }
  result.collision_checks = search.checks();
  result.trees.push_back(std::move(trees[0]));
  result.trees.push_back(std::move(trees[1]));
  result.wall_time = std::chrono::duration<double>(Clock::now() - t0).count();
  return result;
}

std::optional<std::string> validate_plan(const Scenario& scn, const PlanResult& result, double collision_step) {
  if (!result.success) {
    if (!result.path.empty()) return "failed result carries a path";
    return std::nullopt;
  }
  if (result.path.size() < 2) return "path needs at least two states";
  if (!(result.path.front() == scn.start)) return "path does not begin at the start state";
  if (!in_goal_region(scn, result.path.back())) return "path does not end inside the goal region";
  for (std::size_t i = 0; i + 1 < result.path.size(); ++i) {
    if (edge_in_collision(scn, result.path[i], result.path[i + 1], collision_step)) {
      return "path edge " + std::to_string(i) + " is in collision";
    }
  }
  const double len = path_cost(scn.space, result.path);
  if (std::abs(len - result.path_length) > 1e-9 * std::max(1.0, len)) return "path_length disagrees with the path";
  return std::nullopt;
}

}  // namespace silrrt
