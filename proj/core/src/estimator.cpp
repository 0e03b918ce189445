#include "silrrt/estimator.hpp"

#include <cstdio>
#include <map>

#include "silrrt/error.hpp"

namespace silrrt {

using ad::Index;
using ad::Matrix;
using ad::Tape;
using ad::Tensor;

void EstimatorConfig::validate() const {
  require(d_model > 0 && latent_len > 0 && n_heads > 0, "estimator dimensions must be positive");
  require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
  require(encoder_self_layers >= 0, "layer count must be non-negative");
  require(state_dim >= 1 && point_dim >= 1 && mlp_ratio >= 1, "state, point and mlp widths must be positive");
  require(length_scale > 0.0, "length_scale must be positive");
}

std::map<std::string, std::string> EstimatorConfig::to_hyperparameters() const {
  char scale[32];
  std::snprintf(scale, sizeof scale, "%.17g", length_scale);
  return {{"architecture_version", EstimatorModel::kArchitectureVersion},
          {"d_model", std::to_string(d_model)},
          {"latent_len", std::to_string(latent_len)},
          {"n_heads", std::to_string(n_heads)},
          {"encoder_self_layers", std::to_string(encoder_self_layers)},
          {"state_dim", std::to_string(state_dim)},
          {"point_dim", std::to_string(point_dim)},
          {"mlp_ratio", std::to_string(mlp_ratio)},
          {"length_scale", scale}};
}

EstimatorConfig EstimatorConfig::from_hyperparameters(const std::map<std::string, std::string>& h) {
  auto v = h.find("architecture_version");
  if (v == h.end() || v->second != EstimatorModel::kArchitectureVersion) {
    throw FormatError("unsupported estimator architecture version");
  }
  EstimatorConfig c;
  c.d_model = hyperparameter_int(h, "d_model");
  c.latent_len = hyperparameter_int(h, "latent_len");
  c.n_heads = hyperparameter_int(h, "n_heads");
  c.encoder_self_layers = hyperparameter_int(h, "encoder_self_layers");
  c.state_dim = hyperparameter_int(h, "state_dim");
  c.point_dim = hyperparameter_int(h, "point_dim");
  c.mlp_ratio = hyperparameter_int(h, "mlp_ratio");
  c.length_scale = hyperparameter_double(h, "length_scale");
  c.validate();
  return c;
}

EstimatorModel::EstimatorModel(EstimatorConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const Index d = config_.d_model;
  const Index hidden = static_cast<Index>(config_.mlp_ratio) * d;
  nn::EncoderConfig ec{config_.point_dim, config_.d_model, config_.latent_len,
                       config_.n_heads, config_.encoder_self_layers, config_.mlp_ratio};
  encoder_ = nn::SetEncoder::make(params_, rng, "encoder", ec);
  start_embed_ = nn::Linear::make(params_, rng, "readout.start_embed", config_.state_dim, d);
  goal_embed_ = nn::Linear::make(params_, rng, "readout.goal_embed", config_.state_dim, d);
  std::normal_distribution<double> n(0.0, 0.5);
  Matrix token(1, d);
  for (Index i = 0; i < token.size(); ++i) token.data()[i] = n(rng);
  readout_ = params_.add("readout.token", std::move(token));
  readout_block_ = nn::AttentionBlock::make(params_, rng, "readout.cross", d, config_.n_heads, hidden);
  head_norm_ = nn::LayerNorm::make(params_, "head.ln", d);
  head_ = nn::Mlp::make(params_, rng, "head.mlp", d, hidden, 1);
}

Tensor EstimatorModel::encode_state_space(Tape& tape, const Matrix& cloud) const {
  require(cloud.cols() == config_.point_dim, "point cloud width does not match the estimator's point_dim");
  require(cloud.rows() >= 1, "point cloud must hold at least one point");
  return encoder_(tape, params_, cloud);
}

Tensor EstimatorModel::estimate(Tape& tape, const Tensor& latents, std::span<const LengthQuery> queries) const {
  require(!queries.empty(), "estimate needs at least one query");
  const auto sd = static_cast<Index>(config_.state_dim);
  const auto n = static_cast<Index>(queries.size());
  Matrix starts(n, sd), goals(n, sd);
  for (Index q = 0; q < n; ++q) {
    const auto& query = queries[static_cast<std::size_t>(q)];
    require(static_cast<Index>(query.start.size()) == sd && static_cast<Index>(query.goal.size()) == sd,
            "length query dimension does not match state_dim");
    for (Index j = 0; j < sd; ++j) {
      starts(q, j) = query.start[static_cast<std::size_t>(j)];
      goals(q, j) = query.goal[static_cast<std::size_t>(j)];
    }
  }
  Tensor s_tok = start_embed_(tape, params_, tape.constant(std::move(starts)));
  Tensor g_tok = goal_embed_(tape, params_, tape.constant(std::move(goals)));
  Tensor token = tape.parameter(params_[readout_]);
  std::vector<Tensor> rows;
  rows.reserve(queries.size());
  for (Index q = 0; q < n; ++q) {
    const Tensor parts[] = {latents, ad::slice_rows(s_tok, q, 1), ad::slice_rows(g_tok, q, 1)};
    rows.push_back(readout_block_.cross(tape, params_, token, ad::concat_rows(parts)));
  }
  Tensor h = rows.size() == 1 ? rows[0] : ad::concat_rows(rows);
  Tensor raw = head_(tape, params_, head_norm_(tape, params_, h));
  return ad::scale(ad::softplus(raw), config_.length_scale);
}

double EstimatorModel::estimate_length(const Matrix& cloud, const LengthQuery& query) const {
  Tape tape(false);
  return estimate(tape, encode_state_space(tape, cloud), std::span<const LengthQuery>(&query, 1)).item();
}

Checkpoint EstimatorModel::to_checkpoint() const {
  Checkpoint c;
  c.model_kind = kModelKind;
  c.hyperparameters = config_.to_hyperparameters();
  c.entries = params_.to_entries();
  return c;
}

EstimatorModel EstimatorModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != kModelKind) throw FormatError("checkpoint holds a '" + ckpt.model_kind + "' model");
  EstimatorModel m(EstimatorConfig::from_hyperparameters(ckpt.hyperparameters));
  m.params_.load_entries(ckpt.entries);
  return m;
}

double estimator_loss(double c_real, double c_est) {
  const double e = c_real - c_est;
  return 0.5 * e * e;
}

Tensor estimator_loss(const Tensor& c_est, std::span<const double> c_real) {
  require(c_est.cols() == 1 && c_est.rows() == static_cast<Index>(c_real.size()),
          "estimator loss needs one target per estimate");
  Matrix target(c_est.rows(), 1);
  for (Index i = 0; i < target.rows(); ++i) target(i, 0) = c_real[static_cast<std::size_t>(i)];
  Tensor err = ad::sub(c_est, c_est.tape().constant(std::move(target)));
  return ad::scale(ad::mean(ad::square(err)), 0.5);
}

namespace {

template <class PerCloud>
void for_each_cloud(std::span<const Matrix> clouds, std::span<const EstimatorExample> batch, PerCloud&& fn) {
  std::map<int, std::vector<std::size_t>> by_cloud;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require(batch[b].cloud >= 0 && static_cast<std::size_t>(batch[b].cloud) < clouds.size(),
            "example refers to an unknown point cloud");
    by_cloud[batch[b].cloud].push_back(b);
  }
  for (const auto& [cloud, members] : by_cloud) {
    std::vector<LengthQuery> queries;
    for (std::size_t b : members) queries.push_back(batch[b].query);
    fn(clouds[static_cast<std::size_t>(cloud)], members, queries);
  }
}

}  // namespace

Tensor estimator_batch_loss(Tape& tape, const EstimatorModel& model, std::span<const Matrix> clouds,
                            std::span<const EstimatorExample> batch) {
  require(!batch.empty(), "empty estimator batch");
  std::vector<Tensor> parts;
  std::vector<double> targets;
  for_each_cloud(clouds, batch, [&](const Matrix& cloud, const std::vector<std::size_t>& members,
                                    const std::vector<LengthQuery>& queries) {
    parts.push_back(model.estimate(tape, model.encode_state_space(tape, cloud), queries));
    for (std::size_t b : members) targets.push_back(batch[b].c_real);
  });
  Tensor est = parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
  return estimator_loss(est, targets);
}

std::vector<double> estimate_batch(const EstimatorModel& model, std::span<const Matrix> clouds,
                                   std::span<const EstimatorExample> batch) {
  std::vector<double> out(batch.size(), 0.0);
  for_each_cloud(clouds, batch, [&](const Matrix& cloud, const std::vector<std::size_t>& members,
                                    const std::vector<LengthQuery>& queries) {
    Tape tape(false);
    Tensor est = model.estimate(tape, model.encode_state_space(tape, cloud), queries);
    for (std::size_t i = 0; i < members.size(); ++i) out[members[i]] = est.value()(static_cast<Index>(i), 0);
  });
  return out;
}

}  // namespace silrrt
