#pragma once

// Minimal reverse-mode automatic differentiation over row-major 2-D tensors.
//
// A Tape records every operation in creation order, so parents always precede
// children and backward() is a single reverse sweep. Tensor is a cheap handle
// (tape pointer + node index); its value lives on the tape. Parameters are
// owned outside any tape and bound as leaves, so one set of weights can be
// used by many short-lived tapes. A tape is confined to one thread; tapes that
// only read the same parameters may run concurrently.
//
// Shapes are always explicit (rows x cols). The only broadcast is bias-add of
// a 1 x n row across rows.

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace silrrt::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Trainable weights. `grad` is mutable so a model held const can still have
/// gradients accumulated by a recording tape; training is single-threaded.
struct Parameter {
  std::string name;
  Matrix value;
  mutable Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() const { grad.setZero(value.rows(), value.cols()); }
  Index size() const { return value.size(); }
};

class Tape;

class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double item() const;
  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

 private:
  friend class Tape;
  Tensor(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  /// With `record_gradients` false no backward closures are kept (inference).
  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  /// Binds an externally owned parameter. Binding the same parameter twice returns the same leaf.
  Tensor parameter(const Parameter& p);

  /// Reverse sweep from a 1 x 1 loss; leaf parameter gradients are added into Parameter::grad.
  void backward(const Tensor& loss);

  const Matrix& value(int id) const;
  /// Gradient of the last backward() w.r.t. a node (zero matrix if it received none).
  Matrix grad(const Tensor& t) const;
  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Op-implementer interface.
  bool needs_grad(const Tensor& t) const { return nodes_[static_cast<std::size_t>(t.id())].needs_grad; }
  Tensor record(const char* op, Matrix value, std::initializer_list<Tensor> parents, BackwardFn fn);
  Tensor record(const char* op, Matrix value, std::span<const Tensor> parents, BackwardFn fn);
  void accumulate(const Tensor& t, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    const Parameter* param = nullptr;
    BackwardFn backward;
    Matrix grad;
    bool has_grad = false;
    bool needs_grad = false;
  };

  bool recording_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
};

// Elementwise and structural ops.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
/// a (n x m) + row (1 x m) broadcast over rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, Index start, Index count);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor gather_rows(const Tensor& a, std::span<const Index> rows);

Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// Row sums as an n x 1 column.
Tensor row_sum(const Tensor& a);
/// Sum of w_ij * a_ij with constant weights, as 1 x 1.
Tensor weighted_sum(const Tensor& a, const Matrix& weights);

/// x W + b with W (in x out) and b (1 x out).
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
/// Per-row normalization followed by gain/bias rows (1 x n each).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

/// Row-wise softmax restricted to entries where mask is true. Rows with no
/// unmasked entry become all zeros and are reported through `empty_rows`.
Tensor masked_softmax(const Tensor& logits, const Mask& mask, std::vector<Index>* empty_rows = nullptr);
Tensor softmax(const Tensor& logits);

/// softmax(Q K^T / sqrt(d_k)) V, composed from the primitive ops above.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask = nullptr);

/// Fused multi-head attention: columns are split evenly across heads, each head
/// runs scaled dot-product attention, head outputs are concatenated.
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const Mask* mask = nullptr);

/// Self-attention over independent consecutive row groups of `group_size`, each
/// with a causal mask (row i of a group sees rows 0..i of the same group).
Tensor grouped_causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, int group_size);

/// Diagonal Gaussian log-density of each target row, as an n x 1 column.
Tensor gaussian_log_prob(const Tensor& mu, const Tensor& sigma, const Matrix& target);
/// Closed-form diagonal Gaussian entropy sum_j 0.5 log(2 pi e sigma_j^2), per row.
Tensor gaussian_entropy(const Tensor& sigma);

}  // namespace silrrt::ad
