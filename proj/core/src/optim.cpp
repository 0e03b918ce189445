#include "silrrt/optim.hpp"

#include <cmath>

#include "silrrt/error.hpp"

namespace silrrt::ad {

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  require(state.m.size() == params.size(), "adam_step: optimizer state does not match parameter list");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(config.beta1, t);
  const double bc2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    require(m.rows() == p.value.rows() && m.cols() == p.value.cols(), "adam_step: moment shape mismatch");
    m = config.beta1 * m + (1.0 - config.beta1) * p.grad;
    v = config.beta2 * v + (1.0 - config.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= config.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config.eps);
  }
}

void sgd_step(std::span<Parameter* const> params, double lr) {
  for (Parameter* p : params) p->value -= lr * p->grad;
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (Parameter* p : params) p->grad *= s;
  }
  return norm;
}

void zero_grads(std::span<Parameter* const> params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace silrrt::ad

namespace silrrt {

std::vector<CheckpointEntry> optimizer_entries(const ad::AdamState& state, std::span<ad::Parameter* const> params,
                                               const std::string& prefix) {
  std::vector<CheckpointEntry> out;
  if (state.m.empty()) return out;
  require(state.m.size() == params.size(), "optimizer state does not match parameter list");
  out.push_back({prefix + "step", {1, 1}, Dtype::F64, {static_cast<double>(state.step)}});
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = state.m[i];
    const auto& v = state.v[i];
    out.push_back({prefix + "m." + params[i]->name, {m.rows(), m.cols()}, Dtype::F64, {m.data(), m.data() + m.size()}});
    out.push_back({prefix + "v." + params[i]->name, {v.rows(), v.cols()}, Dtype::F64, {v.data(), v.data() + v.size()}});
  }
  return out;
}

bool load_optimizer_entries(const Checkpoint& ckpt, ad::AdamState& state, std::span<ad::Parameter* const> params,
                            const std::string& prefix) {
  const CheckpointEntry* step = ckpt.find(prefix + "step");
  if (step == nullptr) return false;
  ad::AdamState loaded;
  loaded.step = static_cast<long long>(step->data.at(0));
  for (const ad::Parameter* p : params) {
    const CheckpointEntry* m = ckpt.find(prefix + "m." + p->name);
    const CheckpointEntry* v = ckpt.find(prefix + "v." + p->name);
    if (m == nullptr || v == nullptr || m->data.size() != static_cast<std::size_t>(p->value.size()) ||
        v->data.size() != m->data.size()) {
      throw FormatError("checkpoint optimizer state does not match parameter '" + p->name + "'");
    }
    loaded.m.push_back(Eigen::Map<const ad::Matrix>(m->data.data(), p->value.rows(), p->value.cols()));
    loaded.v.push_back(Eigen::Map<const ad::Matrix>(v->data.data(), p->value.rows(), p->value.cols()));
  }
  state = std::move(loaded);
  return true;
}

}  // namespace silrrt
