#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "silrrt/autodiff.hpp"
#include "silrrt/checkpoint.hpp"
#include "silrrt/environment.hpp"
#include "silrrt/geometry.hpp"
#include "silrrt/nn.hpp"

namespace silrrt {

inline constexpr int kDecoderWindow = 5;
inline constexpr double kSigmaFloor = 1e-4;

struct SamplerConfig {
  int d_model = 64;
  int latent_len = 32;
  int n_heads = 4;
  int encoder_self_layers = 2;
  int decoder_self_layers = 2;
  int context_window = kDecoderWindow;
  int state_dim = 2;
  int point_dim = 2;
  int mlp_ratio = 2;
  /// Predict the next state as an offset from the newest node instead of absolutely.
  bool predict_delta = false;

  void validate() const;
  std::map<std::string, std::string> to_hyperparameters() const;
  static SamplerConfig from_hyperparameters(const std::map<std::string, std::string>& h);
  bool operator==(const SamplerConfig&) const = default;
};

/// Diagonal Gaussian over the next state, in normalized coordinates.
struct GaussianStep {
  std::vector<double> mu;
  std::vector<double> sigma;
};

/// Goal token and the node sequence x_1..x_t (normalized). Only the last
/// `context_window` nodes reach the network.
struct DecoderQuery {
  std::vector<double> goal;
  std::vector<std::vector<double>> nodes;
};

struct GaussianBatch {
  ad::Tensor mu;
  ad::Tensor sigma;
};

class SamplerModel {
 public:
  static constexpr const char* kModelKind = "sampler";
  static constexpr const char* kArchitectureVersion = "1";

  explicit SamplerModel(SamplerConfig config, std::uint64_t seed = 0);

  const SamplerConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  /// Z_p: latent_len x d_model. `cloud` is n x point_dim in normalized coordinates.
  ad::Tensor encode_state_space(ad::Tape& tape, const ad::Matrix& cloud) const;
  /// One Gaussian per query; every query is decoded against the same latents.
  GaussianBatch decode(ad::Tape& tape, const ad::Tensor& latents, std::span<const DecoderQuery> queries) const;

  ad::Matrix encode(const ad::Matrix& cloud) const;
  GaussianStep decode_next(const ad::Matrix& latents, const DecoderQuery& query) const;

  Checkpoint to_checkpoint() const;
  static SamplerModel from_checkpoint(const Checkpoint& ckpt);

 private:
  SamplerConfig config_;
  nn::ParamStore params_;
  nn::SetEncoder encoder_;
  nn::Linear goal_embed_;
  nn::Linear node_embed_;
  int goal_type_ = -1;
  int positions_ = -1;
  nn::AttentionBlock cross_block_;
  std::vector<nn::AttentionBlock> self_blocks_;
  nn::LayerNorm out_norm_;
  nn::Linear mu_head_;
  nn::Linear sigma_head_;
};

/// Cloud points mapped to [-1, 1] per axis by the workspace bounds (n x dim).
ad::Matrix normalize_cloud(const PointCloud& cloud, const Workspace& workspace);

/// Draws z ~ N(mu, diag(sigma^2)) in normalized coordinates and maps it back into the space.
State sample_next(const StateSpace& space, const GaussianStep& step, Rng& rng);

/// A demonstration as the model sees it: the cloud it belongs to, its goal, and its states.
struct PathExample {
  int cloud = 0;
  std::vector<double> goal;
  std::vector<std::vector<double>> path;
};

struct GoalPath {
  State goal;
  std::vector<State> path;
};

/// With probability `prob`, reverses the path and makes its original first state the goal.
GoalPath reverse_augment(const GoalPath& gp, Rng& rng, double prob = 0.5);

PathExample make_example(const StateSpace& space, int cloud, const GoalPath& gp);

/// Per-step terms for a batch under teacher forcing. Rows are ordered by example, step.
struct SequenceTerms {
  ad::Tensor log_prob;  // rows x 1
  ad::Tensor entropy;   // rows x 1
  std::vector<int> example_of_row;
  std::vector<int> steps_of_example;
};

SequenceTerms sequence_terms(ad::Tape& tape, const SamplerModel& model, std::span<const ad::Matrix> clouds,
                             std::span<const PathExample> batch);

/// -(1/B) sum_b mean_i log pi(x_i | p, g, x_<i).
ad::Tensor nll_loss(ad::Tape& tape, const SamplerModel& model, std::span<const ad::Matrix> clouds,
                    std::span<const PathExample> batch);

/// -(1/B) sum_b w_b mean_i log pi(x_i | ...) - lambda (1/B) sum_b mean_i H(pi(. | ...)).
ad::Tensor wsil_loss(ad::Tape& tape, const SamplerModel& model, std::span<const ad::Matrix> clouds,
                     std::span<const PathExample> batch, std::span<const double> weights, double lambda);

}  // namespace silrrt
