#include "silrrt/sampler_model.hpp"

#include <algorithm>
#include <cmath>

#include "silrrt/error.hpp"

namespace silrrt {

using ad::Index;
using ad::Matrix;
using ad::Tape;
using ad::Tensor;

void SamplerConfig::validate() const {
  require(d_model > 0 && latent_len > 0 && n_heads > 0, "sampler dimensions must be positive");
  require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
  require(encoder_self_layers >= 0 && decoder_self_layers >= 0, "layer counts must be non-negative");
  require(context_window >= 1, "context window must hold at least one node");
  require(state_dim >= 1 && point_dim >= 1 && mlp_ratio >= 1, "state, point and mlp widths must be positive");
}

std::map<std::string, std::string> SamplerConfig::to_hyperparameters() const {
  return {{"architecture_version", SamplerModel::kArchitectureVersion},
          {"d_model", std::to_string(d_model)},
          {"latent_len", std::to_string(latent_len)},
          {"n_heads", std::to_string(n_heads)},
          {"encoder_self_layers", std::to_string(encoder_self_layers)},
          {"decoder_self_layers", std::to_string(decoder_self_layers)},
          {"context_window", std::to_string(context_window)},
          {"state_dim", std::to_string(state_dim)},
          {"point_dim", std::to_string(point_dim)},
          {"mlp_ratio", std::to_string(mlp_ratio)},
          {"predict_delta", predict_delta ? "1" : "0"}};
}

SamplerConfig SamplerConfig::from_hyperparameters(const std::map<std::string, std::string>& h) {
  auto v = h.find("architecture_version");
  if (v == h.end() || v->second != SamplerModel::kArchitectureVersion) {
    throw FormatError("unsupported sampler architecture version");
  }
  SamplerConfig c;
  c.d_model = hyperparameter_int(h, "d_model");
  c.latent_len = hyperparameter_int(h, "latent_len");
  c.n_heads = hyperparameter_int(h, "n_heads");
  c.encoder_self_layers = hyperparameter_int(h, "encoder_self_layers");
  c.decoder_self_layers = hyperparameter_int(h, "decoder_self_layers");
  c.context_window = hyperparameter_int(h, "context_window");
  c.state_dim = hyperparameter_int(h, "state_dim");
  c.point_dim = hyperparameter_int(h, "point_dim");
  c.mlp_ratio = hyperparameter_int(h, "mlp_ratio");
  c.predict_delta = hyperparameter_int(h, "predict_delta") != 0;
  c.validate();
  return c;
}

SamplerModel::SamplerModel(SamplerConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const Index d = config_.d_model;
  const Index hidden = static_cast<Index>(config_.mlp_ratio) * d;
  nn::EncoderConfig ec{config_.point_dim, config_.d_model, config_.latent_len,
                       config_.n_heads, config_.encoder_self_layers, config_.mlp_ratio};
  encoder_ = nn::SetEncoder::make(params_, rng, "encoder", ec);
  goal_embed_ = nn::Linear::make(params_, rng, "decoder.goal_embed", config_.state_dim, d);
  node_embed_ = nn::Linear::make(params_, rng, "decoder.node_embed", config_.state_dim, d);
  std::normal_distribution<double> n(0.0, 0.1);
  Matrix type(1, d), pos(config_.context_window, d);
  for (Index i = 0; i < type.size(); ++i) type.data()[i] = n(rng);
  for (Index i = 0; i < pos.size(); ++i) pos.data()[i] = n(rng);
  goal_type_ = params_.add("decoder.goal_type", std::move(type));
  positions_ = params_.add("decoder.positions", std::move(pos));
  cross_block_ = nn::AttentionBlock::make(params_, rng, "decoder.cross", d, config_.n_heads, hidden);
  for (int i = 0; i < config_.decoder_self_layers; ++i) {
    self_blocks_.push_back(
        nn::AttentionBlock::make(params_, rng, "decoder.self" + std::to_string(i), d, config_.n_heads, hidden));
  }
  out_norm_ = nn::LayerNorm::make(params_, "decoder.ln_out", d);
  mu_head_ = nn::Linear::make(params_, rng, "decoder.mu_head", d, config_.state_dim);
  sigma_head_ = nn::Linear::make(params_, rng, "decoder.sigma_head", d, config_.state_dim);
}

Tensor SamplerModel::encode_state_space(Tape& tape, const Matrix& cloud) const {
  require(cloud.cols() == config_.point_dim, "point cloud width does not match the sampler's point_dim");
  require(cloud.rows() >= 1, "point cloud must hold at least one point");
  return encoder_(tape, params_, cloud);
}

GaussianBatch SamplerModel::decode(Tape& tape, const Tensor& latents, std::span<const DecoderQuery> queries) const {
  require(!queries.empty(), "decode needs at least one query");
  const int window = config_.context_window;
  const int group = window + 1;
  const auto sd = static_cast<Index>(config_.state_dim);
  const auto n_queries = static_cast<Index>(queries.size());

  std::vector<int> kept(queries.size());
  Index n_nodes = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    require(!queries[q].nodes.empty(), "decoder query needs a non-empty node sequence");
    require(static_cast<Index>(queries[q].goal.size()) == sd, "goal dimension does not match state_dim");
    kept[q] = std::min<int>(window, static_cast<int>(queries[q].nodes.size()));
    n_nodes += kept[q];
  }
  Matrix goal_x(n_queries, sd), node_x(n_nodes, sd), newest(n_queries, sd);
  std::vector<Index> token_index, pos_index, last_rows;
  token_index.reserve(static_cast<std::size_t>(n_queries * group));
  pos_index.reserve(token_index.capacity());
  const Index zero_token = n_queries + n_nodes;
  Index node_row = 0;
  for (std::size_t q = 0; q < queries.size(); ++q) {
    const auto& query = queries[q];
    const auto qi = static_cast<Index>(q);
    for (Index j = 0; j < sd; ++j) goal_x(qi, j) = query.goal[static_cast<std::size_t>(j)];
    token_index.push_back(qi);
    pos_index.push_back(window);
    const std::size_t first = query.nodes.size() - static_cast<std::size_t>(kept[q]);
    for (int k = 0; k < kept[q]; ++k) {
      const auto& node = query.nodes[first + static_cast<std::size_t>(k)];
      require(static_cast<Index>(node.size()) == sd, "node dimension does not match state_dim");
      for (Index j = 0; j < sd; ++j) node_x(node_row, j) = node[static_cast<std::size_t>(j)];
      token_index.push_back(n_queries + node_row);
      pos_index.push_back(kept[q] - 1 - k);  // 0 marks the newest node
      ++node_row;
    }
    for (int k = kept[q]; k < window; ++k) {
      token_index.push_back(zero_token);
      pos_index.push_back(window);
    }
    newest.row(qi) = node_x.row(node_row - 1);
    last_rows.push_back(qi * group + kept[q]);
  }

  const Index d = config_.d_model;
  Tensor zero_row = tape.constant(Matrix::Zero(1, d));
  Tensor goal_tokens = ad::add_row(goal_embed_(tape, params_, tape.constant(std::move(goal_x))),
                                   tape.parameter(params_[goal_type_]));
  Tensor node_tokens = node_embed_(tape, params_, tape.constant(std::move(node_x)));
  const Tensor pool_parts[] = {goal_tokens, node_tokens, zero_row};
  Tensor tokens = ad::gather_rows(ad::concat_rows(pool_parts), token_index);
  const Tensor pos_parts[] = {tape.parameter(params_[positions_]), zero_row};
  tokens = ad::add(tokens, ad::gather_rows(ad::concat_rows(pos_parts), pos_index));

  Tensor x = cross_block_.cross(tape, params_, tokens, latents);
  for (const auto& blk : self_blocks_) x = blk.causal_grouped(tape, params_, x, group);
  Tensor last = ad::gather_rows(out_norm_(tape, params_, x), last_rows);
  Tensor mu = mu_head_(tape, params_, last);
  if (config_.predict_delta) mu = ad::add(mu, tape.constant(std::move(newest)));
  Tensor sigma = ad::add_scalar(ad::softplus(sigma_head_(tape, params_, last)), kSigmaFloor);
  return {mu, sigma};
}

Matrix SamplerModel::encode(const Matrix& cloud) const {
  Tape tape(false);
  return encode_state_space(tape, cloud).value();
}

GaussianStep SamplerModel::decode_next(const Matrix& latents, const DecoderQuery& query) const {
  Tape tape(false);
  GaussianBatch out = decode(tape, tape.constant(latents), std::span<const DecoderQuery>(&query, 1));
  const Matrix& mu = out.mu.value();
  const Matrix& sigma = out.sigma.value();
  GaussianStep step;
  step.mu.assign(mu.data(), mu.data() + mu.size());
  step.sigma.assign(sigma.data(), sigma.data() + sigma.size());
  return step;
}

Checkpoint SamplerModel::to_checkpoint() const {
  Checkpoint c;
  c.model_kind = kModelKind;
  c.hyperparameters = config_.to_hyperparameters();
  c.entries = params_.to_entries();
  return c;
}

SamplerModel SamplerModel::from_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.model_kind != kModelKind) throw FormatError("checkpoint holds a '" + ckpt.model_kind + "' model");
  SamplerModel m(SamplerConfig::from_hyperparameters(ckpt.hyperparameters));
  m.params_.load_entries(ckpt.entries);
  return m;
}

Matrix normalize_cloud(const PointCloud& cloud, const Workspace& workspace) {
  require(cloud.dim == workspace.dim(), "point cloud dimension does not match workspace");
  Matrix m(static_cast<Index>(cloud.size()), cloud.dim);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.point(i);
    for (int j = 0; j < cloud.dim; ++j) {
      const auto& iv = workspace.bounds[static_cast<std::size_t>(j)];
      m(static_cast<Index>(i), j) = 2.0 * (p[static_cast<std::size_t>(j)] - iv.lo) / iv.width() - 1.0;
    }
  }
  return m;
}

State sample_next(const StateSpace& space, const GaussianStep& step, Rng& rng) {
  require(step.mu.size() == static_cast<std::size_t>(space.dim()) && step.sigma.size() == step.mu.size(),
          "Gaussian step dimension does not match state space");
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> z(step.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = step.mu[i] + step.sigma[i] * n(rng);
  return enforce_bounds(space, denormalize_from_model(space, z));
}

GoalPath reverse_augment(const GoalPath& gp, Rng& rng, double prob) {
  require(!gp.path.empty(), "cannot reverse an empty path");
  if (uniform01(rng) >= prob) return gp;
  GoalPath out;
  out.goal = gp.path.front();
  out.path.assign(gp.path.rbegin(), gp.path.rend());
  return out;
}

PathExample make_example(const StateSpace& space, int cloud, const GoalPath& gp) {
  require(gp.path.size() >= 2, "training paths need at least two states");
  PathExample ex;
  ex.cloud = cloud;
  ex.goal = normalize_for_model(space, gp.goal);
  for (const auto& s : gp.path) ex.path.push_back(normalize_for_model(space, s));
  return ex;
}

SequenceTerms sequence_terms(Tape& tape, const SamplerModel& model, std::span<const Matrix> clouds,
                             std::span<const PathExample> batch) {
  require(!batch.empty(), "empty training batch");
  std::map<int, std::vector<int>> by_cloud;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    require(batch[b].cloud >= 0 && static_cast<std::size_t>(batch[b].cloud) < clouds.size(),
            "example refers to an unknown point cloud");
    require(batch[b].path.size() >= 2, "training paths need at least two states");
    by_cloud[batch[b].cloud].push_back(static_cast<int>(b));
  }
  SequenceTerms terms;
  terms.steps_of_example.resize(batch.size());
  std::vector<Tensor> lp_parts, ent_parts;
  const auto sd = static_cast<Index>(model.config().state_dim);
  for (const auto& [cloud, members] : by_cloud) {
    Tensor z = model.encode_state_space(tape, clouds[static_cast<std::size_t>(cloud)]);
    std::vector<DecoderQuery> queries;
    std::vector<const std::vector<double>*> targets;
    for (int b : members) {
      const PathExample& ex = batch[static_cast<std::size_t>(b)];
      const int steps = static_cast<int>(ex.path.size()) - 1;
      terms.steps_of_example[static_cast<std::size_t>(b)] = steps;
      for (int i = 1; i <= steps; ++i) {
        const std::size_t first = static_cast<std::size_t>(std::max(0, i - model.config().context_window));
        DecoderQuery q;
        q.goal = ex.goal;
        q.nodes.assign(ex.path.begin() + static_cast<std::ptrdiff_t>(first), ex.path.begin() + i);
        queries.push_back(std::move(q));
        targets.push_back(&ex.path[static_cast<std::size_t>(i)]);
        terms.example_of_row.push_back(b);
      }
    }
    GaussianBatch g = model.decode(tape, z, queries);
    Matrix target(static_cast<Index>(targets.size()), sd);
    for (std::size_t r = 0; r < targets.size(); ++r) {
      for (Index j = 0; j < sd; ++j) target(static_cast<Index>(r), j) = (*targets[r])[static_cast<std::size_t>(j)];
    }
    lp_parts.push_back(ad::gaussian_log_prob(g.mu, g.sigma, target));
    ent_parts.push_back(ad::gaussian_entropy(g.sigma));
  }
  terms.log_prob = lp_parts.size() == 1 ? lp_parts[0] : ad::concat_rows(lp_parts);
  terms.entropy = ent_parts.size() == 1 ? ent_parts[0] : ad::concat_rows(ent_parts);
  return terms;
}

namespace {

Matrix row_coefficients(const SequenceTerms& terms, std::span<const double> weights, std::size_t batch_size) {
  Matrix c(static_cast<Index>(terms.example_of_row.size()), 1);
  const double b = static_cast<double>(batch_size);
  for (std::size_t r = 0; r < terms.example_of_row.size(); ++r) {
    const auto ex = static_cast<std::size_t>(terms.example_of_row[r]);
    const double w = weights.empty() ? 1.0 : weights[ex];
    c(static_cast<Index>(r), 0) = w / (b * static_cast<double>(terms.steps_of_example[ex]));
  }
  return c;
}

}  // namespace

Tensor nll_loss(Tape& tape, const SamplerModel& model, std::span<const Matrix> clouds,
                std::span<const PathExample> batch) {
  SequenceTerms terms = sequence_terms(tape, model, clouds, batch);
  return ad::scale(ad::weighted_sum(terms.log_prob, row_coefficients(terms, {}, batch.size())), -1.0);
}

Tensor wsil_loss(Tape& tape, const SamplerModel& model, std::span<const Matrix> clouds,
                 std::span<const PathExample> batch, std::span<const double> weights, double lambda) {
  require(weights.size() == batch.size(), "one weight per batch example is required");
  require(lambda >= 0.0, "entropy coefficient must be non-negative");
  SequenceTerms terms = sequence_terms(tape, model, clouds, batch);
  Tensor loss = ad::scale(ad::weighted_sum(terms.log_prob, row_coefficients(terms, weights, batch.size())), -1.0);
  if (lambda == 0.0) return loss;
  Tensor entropy = ad::weighted_sum(terms.entropy, row_coefficients(terms, {}, batch.size()));
  return ad::sub(loss, ad::scale(entropy, lambda));
}

}  // namespace silrrt
