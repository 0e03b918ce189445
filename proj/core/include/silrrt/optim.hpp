#pragma once

#include <span>
#include <string>
#include <vector>

#include "silrrt/autodiff.hpp"
#include "silrrt/checkpoint.hpp"

namespace silrrt::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates, one pair per parameter in registration order.
struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  long long step = 0;
};

/// Bias-corrected Adam update of `params` from their accumulated gradients.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& config);

/// theta <- theta - lr * grad
void sgd_step(std::span<Parameter* const> params, double lr);

/// Rescales gradients so their global L2 norm is at most `max_norm`; returns the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

void zero_grads(std::span<Parameter* const> params);

}  // namespace silrrt::ad

namespace silrrt {

/// Adam moments as checkpoint entries named "<prefix>m.<param>" and "<prefix>v.<param>",
/// so training resumes exactly where it stopped.
std::vector<CheckpointEntry> optimizer_entries(const ad::AdamState& state, std::span<ad::Parameter* const> params,
                                               const std::string& prefix = "optim.");
/// Restores moments saved by optimizer_entries; returns false (state untouched) when they are absent.
bool load_optimizer_entries(const Checkpoint& ckpt, ad::AdamState& state, std::span<ad::Parameter* const> params,
                            const std::string& prefix = "optim.");

}  // namespace silrrt
