#include "silrrt/nn.hpp"

#include <cmath>

#include "silrrt/error.hpp"

namespace silrrt::nn {

int ParamStore::add(std::string name, Matrix init) {
  require(!index_.contains(name), "duplicate parameter name '" + name + "'");
  const int idx = static_cast<int>(params_.size());
  index_.emplace(name, idx);
  params_.emplace_back(std::move(name), std::move(init));
  return idx;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), "unknown parameter '" + name + "'");
  return it->second;
}

Index ParamStore::element_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<Parameter*> ParamStore::pointers() {
  std::vector<Parameter*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

std::vector<CheckpointEntry> ParamStore::to_entries(const std::string& prefix) const {
  std::vector<CheckpointEntry> out;
  for (const auto& p : params_) {
    CheckpointEntry e;
    e.name = prefix + p.name;
    e.shape = {p.value.rows(), p.value.cols()};
    e.dtype = Dtype::F64;
    e.data.assign(p.value.data(), p.value.data() + p.value.size());
    out.push_back(std::move(e));
  }
  return out;
}

void ParamStore::load_entries(const std::vector<CheckpointEntry>& entries, const std::string& prefix) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  for (auto& p : params_) {
    auto it = by_name.find(prefix + p.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks parameter '" + prefix + p.name + "'");
    const CheckpointEntry& e = *it->second;
    if (e.shape.size() != 2 || e.shape[0] != p.value.rows() || e.shape[1] != p.value.cols()) {
      throw FormatError("checkpoint parameter '" + e.name + "' has an incompatible shape");
    }
    std::copy(e.data.begin(), e.data.end(), p.value.data());
    p.zero_grad();
  }
}

Matrix glorot(Rng& rng, Index in, Index out) {
  const double a = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-a, a);
  Matrix m(in, out);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Linear Linear::make(ParamStore& s, Rng& rng, const std::string& name, Index in, Index out, bool bias) {
  Linear l;
  l.w = s.add(name + ".w", glorot(rng, in, out));
  if (bias) l.b = s.add(name + ".b", Matrix::Zero(1, out));
  return l;
}

Tensor Linear::operator()(Tape& t, const ParamStore& s, const Tensor& x) const {
  if (b < 0) return ad::matmul(x, t.parameter(s[w]));
  return ad::linear(x, t.parameter(s[w]), t.parameter(s[b]));
}

LayerNorm LayerNorm::make(ParamStore& s, const std::string& name, Index width) {
  LayerNorm n;
  n.gain = s.add(name + ".gain", Matrix::Ones(1, width));
  n.bias = s.add(name + ".bias", Matrix::Zero(1, width));
  return n;
}

Tensor LayerNorm::operator()(Tape& t, const ParamStore& s, const Tensor& x) const {
  return ad::layer_norm(x, t.parameter(s[gain]), t.parameter(s[bias]));
}

Mlp Mlp::make(ParamStore& s, Rng& rng, const std::string& name, Index width, Index hidden, Index out_width) {
  return {Linear::make(s, rng, name + ".fc1", width, hidden), Linear::make(s, rng, name + ".fc2", hidden, out_width)};
}

Tensor Mlp::operator()(Tape& t, const ParamStore& s, const Tensor& x) const {
  return out(t, s, ad::relu(in(t, s, x)));
}

AttentionBlock AttentionBlock::make(ParamStore& s, Rng& rng, const std::string& name, Index width, int heads,
                                    Index hidden) {
  require(width % heads == 0, "attention width must be divisible by the head count");
  AttentionBlock b;
  b.ln_query = LayerNorm::make(s, name + ".ln_q", width);
  b.ln_context = LayerNorm::make(s, name + ".ln_kv", width);
  b.wq = Linear::make(s, rng, name + ".q", width, width);
  b.wk = Linear::make(s, rng, name + ".k", width, width, false);
  b.wv = Linear::make(s, rng, name + ".v", width, width);
  b.wo = Linear::make(s, rng, name + ".o", width, width);
  b.ln_mlp = LayerNorm::make(s, name + ".ln_mlp", width);
  b.mlp = Mlp::make(s, rng, name + ".mlp", width, hidden, width);
  b.heads = heads;
  return b;
}

Tensor AttentionBlock::finish(Tape& t, const ParamStore& s, const Tensor& x, const Tensor& attended) const {
  Tensor h = ad::add(x, wo(t, s, attended));
  return ad::add(h, mlp(t, s, ln_mlp(t, s, h)));
}

Tensor AttentionBlock::cross(Tape& t, const ParamStore& s, const Tensor& x, const Tensor& ctx) const {
  Tensor qn = ln_query(t, s, x);
  Tensor cn = ln_context(t, s, ctx);
  return finish(t, s, x, ad::multi_head_attention(wq(t, s, qn), wk(t, s, cn), wv(t, s, cn), heads));
}

Tensor AttentionBlock::self(Tape& t, const ParamStore& s, const Tensor& x) const {
  Tensor xn = ln_query(t, s, x);
  return finish(t, s, x, ad::multi_head_attention(wq(t, s, xn), wk(t, s, xn), wv(t, s, xn), heads));
}

Tensor AttentionBlock::causal_grouped(Tape& t, const ParamStore& s, const Tensor& x, int group_size) const {
  Tensor xn = ln_query(t, s, x);
  return finish(t, s, x, ad::grouped_causal_attention(wq(t, s, xn), wk(t, s, xn), wv(t, s, xn), heads, group_size));
}

SetEncoder SetEncoder::make(ParamStore& s, Rng& rng, const std::string& name, const EncoderConfig& cfg) {
  require(cfg.d_model % cfg.heads == 0, "d_model must be divisible by the head count");
  const Index hidden = static_cast<Index>(cfg.mlp_ratio) * cfg.d_model;
  SetEncoder e;
  Matrix lat(cfg.latent_len, cfg.d_model);
  std::normal_distribution<double> n(0.0, 0.5);
  for (Index i = 0; i < lat.size(); ++i) lat.data()[i] = n(rng);
  e.latents = s.add(name + ".latents", std::move(lat));
  e.point_embed = Mlp::make(s, rng, name + ".point_embed", cfg.point_dim, cfg.d_model, cfg.d_model);
  e.cross_block = AttentionBlock::make(s, rng, name + ".cross", cfg.d_model, cfg.heads, hidden);
  for (int i = 0; i < cfg.self_layers; ++i) {
    e.self_blocks.push_back(
        AttentionBlock::make(s, rng, name + ".self" + std::to_string(i), cfg.d_model, cfg.heads, hidden));
  }
  e.out_norm = LayerNorm::make(s, name + ".ln_out", cfg.d_model);
  return e;
}

Tensor SetEncoder::operator()(Tape& t, const ParamStore& s, const Matrix& points) const {
  Tensor p = point_embed(t, s, t.constant(points));
  Tensor z = cross_block.cross(t, s, t.parameter(s[latents]), p);
  for (const auto& blk : self_blocks) z = blk.self(t, s, z);
  return out_norm(t, s, z);
}

}  // namespace silrrt::nn
