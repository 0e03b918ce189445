#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "silrrt/autodiff.hpp"
#include "silrrt/checkpoint.hpp"
#include "silrrt/nn.hpp"

namespace silrrt {

struct EstimatorConfig {
  int d_model = 64;
  int latent_len = 32;
  int n_heads = 4;
  int encoder_self_layers = 2;
  int state_dim = 2;
  int point_dim = 2;
  int mlp_ratio = 2;
  /// Output is length_scale * softplus(raw), so an untrained head starts near a plausible length.
  double length_scale = 10.0;

  void validate() const;
  std::map<std::string, std::string> to_hyperparameters() const;
  static EstimatorConfig from_hyperparameters(const std::map<std::string, std::string>& h);
  bool operator==(const EstimatorConfig&) const = default;
};

/// Start/goal pair of one estimate, in normalized coordinates.
struct LengthQuery {
  std::vector<double> start;
  std::vector<double> goal;
};

/// Predicts the length of the path the current sampler would find.
/// A learned readout token cross-attends to [Z_p; start token; goal token], then an MLP emits the length.
class EstimatorModel {
 public:
  static constexpr const char* kModelKind = "estimator";
  static constexpr const char* kArchitectureVersion = "1";

  explicit EstimatorModel(EstimatorConfig config, std::uint64_t seed = 0);

  const EstimatorConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  ad::Tensor encode_state_space(ad::Tape& tape, const ad::Matrix& cloud) const;
  /// n x 1 lengths in workspace units, one per query.
  ad::Tensor estimate(ad::Tape& tape, const ad::Tensor& latents, std::span<const LengthQuery> queries) const;

  double estimate_length(const ad::Matrix& cloud, const LengthQuery& query) const;

  Checkpoint to_checkpoint() const;
  static EstimatorModel from_checkpoint(const Checkpoint& ckpt);

 private:
  EstimatorConfig config_;
  nn::ParamStore params_;
  nn::SetEncoder encoder_;
  nn::Linear start_embed_;
  nn::Linear goal_embed_;
  int readout_ = -1;
  nn::AttentionBlock readout_block_;
  nn::LayerNorm head_norm_;
  nn::Mlp head_;
};

/// 0.5 (C_real - C_est)^2
double estimator_loss(double c_real, double c_est);

/// Batch mean of 0.5 (C_real - C_est)^2; `c_est` is n x 1.
ad::Tensor estimator_loss(const ad::Tensor& c_est, std::span<const double> c_real);

struct EstimatorExample {
  int cloud = 0;
  LengthQuery query;
  double c_real = 0.0;
};

/// Mean estimator loss over a batch drawn from several clouds; each cloud is encoded once.
ad::Tensor estimator_batch_loss(ad::Tape& tape, const EstimatorModel& model, std::span<const ad::Matrix> clouds,
                                std::span<const EstimatorExample> batch);

/// Current estimates for a batch, without recording gradients.
std::vector<double> estimate_batch(const EstimatorModel& model, std::span<const ad::Matrix> clouds,
                                   std::span<const EstimatorExample> batch);

}  // namespace silrrt
