#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "silrrt/autodiff.hpp"
#include "silrrt/checkpoint.hpp"
#include "silrrt/rng.hpp"

namespace silrrt::nn {

using ad::Index;
using ad::Matrix;
using ad::Parameter;
using ad::Tape;
using ad::Tensor;

/// Owns named parameters at stable addresses, handed out by index.
class ParamStore {
 public:
  int add(std::string name, Matrix init);
  const Parameter& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  Parameter& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  int index_of(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  Index element_count() const;

  std::vector<Parameter*> pointers();
  std::vector<CheckpointEntry> to_entries(const std::string& prefix = "") const;
  /// Copies values from checkpoint entries; every parameter must be present with a matching shape.
  void load_entries(const std::vector<CheckpointEntry>& entries, const std::string& prefix = "");

 private:
  std::deque<Parameter> params_;
  std::map<std::string, int> index_;
};

Matrix glorot(Rng& rng, Index in, Index out);

struct Linear {
  int w = -1;
  int b = -1;  // -1: no bias
  static Linear make(ParamStore& s, Rng& rng, const std::string& name, Index in, Index out, bool bias = true);
  Tensor operator()(Tape& t, const ParamStore& s, const Tensor& x) const;
};

struct LayerNorm {
  int gain = -1;
  int bias = -1;
  static LayerNorm make(ParamStore& s, const std::string& name, Index width);
  Tensor operator()(Tape& t, const ParamStore& s, const Tensor& x) const;
};

/// Linear -> ReLU -> Linear.
struct Mlp {
  Linear in;
  Linear out;
  static Mlp make(ParamStore& s, Rng& rng, const std::string& name, Index width, Index hidden, Index out_width);
  Tensor operator()(Tape& t, const ParamStore& s, const Tensor& x) const;
};

/// Pre-norm transformer block: x += Attn(LN(x), LN(ctx)); x += MLP(LN(x)).
/// The key projection has no bias: softmax is invariant to it.
struct AttentionBlock {
  LayerNorm ln_query;
  LayerNorm ln_context;
  Linear wq, wk, wv, wo;
  LayerNorm ln_mlp;
  Mlp mlp;
  int heads = 1;

  static AttentionBlock make(ParamStore& s, Rng& rng, const std::string& name, Index width, int heads, Index hidden);
  /// Queries from x, keys/values from ctx.
  Tensor cross(Tape& t, const ParamStore& s, const Tensor& x, const Tensor& ctx) const;
  /// Unmasked self-attention over all rows of x.
  Tensor self(Tape& t, const ParamStore& s, const Tensor& x) const;
  /// Causal self-attention within consecutive row groups of `group_size`.
  Tensor causal_grouped(Tape& t, const ParamStore& s, const Tensor& x, int group_size) const;

 private:
  Tensor finish(Tape& t, const ParamStore& s, const Tensor& x, const Tensor& attended) const;
};

struct EncoderConfig {
  int point_dim = 2;
  int d_model = 64;
  int latent_len = 32;
  int heads = 4;
  int self_layers = 2;
  int mlp_ratio = 2;
};

/// Learned latent queries cross-attend to embedded points, then self-attention
/// refines the latents. Output shape is latent_len x d_model for any point count.
/// Points carry no positional encoding, so the output is invariant to row order.
struct SetEncoder {
  int latents = -1;
  Mlp point_embed;
  AttentionBlock cross_block;
  std::vector<AttentionBlock> self_blocks;
  LayerNorm out_norm;

  static SetEncoder make(ParamStore& s, Rng& rng, const std::string& name, const EncoderConfig& cfg);
  Tensor operator()(Tape& t, const ParamStore& s, const Matrix& points) const;
};

}  // namespace silrrt::nn
