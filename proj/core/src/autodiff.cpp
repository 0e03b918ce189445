#include "silrrt/autodiff.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "silrrt/error.hpp"

namespace silrrt::ad {

const Matrix& Tensor::value() const {
  require(tape_ != nullptr, "tensor is not attached to a tape");
  return tape_->value(id_);
}

double Tensor::item() const {
  const Matrix& v = value();
  require(v.rows() == 1 && v.cols() == 1, "item() needs a 1 x 1 tensor");
  return v(0, 0);
}

Tensor Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NumericError("non-finite constant bound to tape");
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size() - 1));
}

Tensor Tape::parameter(const Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Tensor(this, it->second);
  if (!p.value.allFinite()) throw NumericError("parameter '" + p.name + "' holds non-finite values");
  Node n;
  n.external = &p.value;
  n.param = &p;
  n.needs_grad = recording_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size() - 1);
  bound_.emplace(&p, id);
  return Tensor(this, id);
}

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

Matrix Tape::grad(const Tensor& t) const {
  const Node& n = nodes_[static_cast<std::size_t>(t.id())];
  if (n.has_grad) return n.grad;
  const Matrix& v = value(t.id());
  return Matrix::Zero(v.rows(), v.cols());
}

void Tape::clear() {
  nodes_.clear();
  bound_.clear();
}

Tensor Tape::record(const char* op, Matrix value, std::initializer_list<Tensor> parents, BackwardFn fn) {
  return record(op, std::move(value), std::span<const Tensor>(parents.begin(), parents.size()), std::move(fn));
}

Tensor Tape::record(const char* op, Matrix value, std::span<const Tensor> parents, BackwardFn fn) {
  if (!value.allFinite()) throw NumericError(std::string("non-finite value produced by ") + op);
  Node n;
  n.value = std::move(value);
  for (const auto& p : parents) {
    require(&p.tape() == this, std::string(op) + ": operand belongs to a different tape");
    if (recording_ && needs_grad(p)) n.needs_grad = true;
  }
  if (n.needs_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Tensor(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::accumulate(const Tensor& t, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(t.id())];
  if (!n.needs_grad) return;
  if (n.has_grad) {
    n.grad += g;
  } else {
    n.grad = g;
    n.has_grad = true;
  }
}

void Tape::backward(const Tensor& loss) {
  require(recording_, "backward() on a tape that does not record gradients");
  require(&loss.tape() == this, "loss belongs to a different tape");
  const Matrix& lv = loss.value();
  require(lv.rows() == 1 && lv.cols() == 1, "backward() needs a scalar (1 x 1) loss");
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  Node& root = nodes_[static_cast<std::size_t>(loss.id())];
  if (!root.needs_grad) return;
  root.grad = Matrix::Ones(1, 1);
  root.has_grad = true;
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, n.grad);
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

namespace {

void same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), std::string(op) + ": shape mismatch");
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "add");
  return a.tape().record("add", a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "sub");
  return a.tape().record("sub", a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "mul");
  return a.tape().record("mul", a.value().cwiseProduct(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(b.value()));
    t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "div");
  return a.tape().record("div", a.value().cwiseQuotient(b.value()), {a, b}, [a, b](Tape& t, const Matrix& g) {
    const Matrix& bv = b.value();
    t.accumulate(a, g.cwiseQuotient(bv));
    t.accumulate(b, -(g.cwiseProduct(a.value()).cwiseQuotient(bv.cwiseProduct(bv))));
  });
}

Tensor scale(const Tensor& a, double s) {
  return a.tape().record("scale", a.value() * s, {a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return a.tape().record("add_scalar", (a.value().array() + s).matrix(), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: row must be 1 x cols(a)");
  Matrix v = a.value().rowwise() + row.value().row(0);
  return a.tape().record("add_row", std::move(v), {a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(row, g.colwise().sum());
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  Matrix v = a.value() * b.value();
  return a.tape().record("matmul", std::move(v), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.needs_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Tensor transpose(const Tensor& a) {
  Matrix v = a.value().transpose();
  return a.tape().record("transpose", std::move(v), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_rows: no operands");
  const Index cols = parts[0].cols();
  Index rows = 0;
  for (const auto& p : parts) {
    require(p.cols() == cols, "concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    v.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return parts[0].tape().record("concat_rows", std::move(v), parts, [ps](Tape& t, const Matrix& g) {
    Index r0 = 0;
    for (const auto& p : ps) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleRows(r0, p.rows()));
      r0 += p.rows();
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  require(!parts.empty(), "concat_cols: no operands");
  const Index rows = parts[0].rows();
  Index cols = 0;
  for (const auto& p : parts) {
    require(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Index c = 0;
  for (const auto& p : parts) {
    v.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Tensor> ps(parts.begin(), parts.end());
  return parts[0].tape().record("concat_cols", std::move(v), parts, [ps](Tape& t, const Matrix& g) {
    Index c0 = 0;
    for (const auto& p : ps) {
      if (t.needs_grad(p)) t.accumulate(p, g.middleCols(c0, p.cols()));
      c0 += p.cols();
    }
  });
}

Tensor slice_rows(const Tensor& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows: range out of bounds");
  Matrix v = a.value().middleRows(start, count);
  return a.tape().record("slice_rows", std::move(v), {a}, [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    t.accumulate(a, full);
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: range out of bounds");
  Matrix v = a.value().middleCols(start, count);
  return a.tape().record("slice_cols", std::move(v), {a}, [a, start, count](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Tensor gather_rows(const Tensor& a, std::span<const Index> rows) {
  Matrix v(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i] >= 0 && rows[i] < a.rows(), "gather_rows: index out of bounds");
    v.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return a.tape().record("gather_rows", std::move(v), {a}, [a, idx](Tape& t, const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) full.row(idx[i]) += g.row(static_cast<Index>(i));
    t.accumulate(a, full);
  });
}

Tensor relu(const Tensor& a) {
  Matrix v = a.value().cwiseMax(0.0);
  return a.tape().record("relu", std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, (a.value().array() > 0.0).select(g, 0.0));
  });
}

Tensor softplus(const Tensor& a) {
  Matrix v = a.value().unaryExpr([](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
  return a.tape().record("softplus", std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(a.value().unaryExpr([](double x) { return sigmoid(x); })));
  });
}

Tensor exp(const Tensor& a) {
  Matrix v = a.value().array().exp().matrix();
  Tape& tape = a.tape();
  const int self = static_cast<int>(tape.size());
  return tape.record("exp", std::move(v), {a}, [a, self](Tape& t, const Matrix& g) {
    t.accumulate(a, g.cwiseProduct(t.value(self)));
  });
}

Tensor log(const Tensor& a) {
  require((a.value().array() > 0.0).all(), "log: operand must be positive");
  Matrix v = a.value().array().log().matrix();
  return a.tape().record("log", std::move(v), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.cwiseQuotient(a.value())); });
}

Tensor square(const Tensor& a) {
  Matrix v = a.value().cwiseProduct(a.value());
  return a.tape().record("square", std::move(v), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, 2.0 * g.cwiseProduct(a.value())); });
}

Tensor sum(const Tensor& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape().record("sum", std::move(v), {a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const double n = static_cast<double>(a.value().size());
  require(n > 0, "mean: empty tensor");
  Matrix v(1, 1);
  v(0, 0) = a.value().sum() / n;
  return a.tape().record("mean", std::move(v), {a}, [a, n](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0) / n));
  });
}

Tensor row_sum(const Tensor& a) {
  Matrix v = a.value().rowwise().sum();
  return a.tape().record("row_sum", std::move(v), {a},
                         [a](Tape& t, const Matrix& g) { t.accumulate(a, g.col(0).replicate(1, a.cols())); });
}

Tensor weighted_sum(const Tensor& a, const Matrix& weights) {
  require(weights.rows() == a.rows() && weights.cols() == a.cols(), "weighted_sum: weight shape mismatch");
  Matrix v(1, 1);
  v(0, 0) = a.value().cwiseProduct(weights).sum();
  return a.tape().record("weighted_sum", std::move(v), {a},
                         [a, weights](Tape& t, const Matrix& g) { t.accumulate(a, weights * g(0, 0)); });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require(x.cols() == w.rows(), "linear: input width does not match weight rows");
  require(b.rows() == 1 && b.cols() == w.cols(), "linear: bias must be 1 x out");
  Matrix v = x.value() * w.value();
  v.rowwise() += b.value().row(0);
  return x.tape().record("linear", std::move(v), {x, w, b}, [x, w, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(x)) t.accumulate(x, g * w.value().transpose());
    if (t.needs_grad(w)) t.accumulate(w, x.value().transpose() * g);
    if (t.needs_grad(b)) t.accumulate(b, g.colwise().sum());
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  const Index n = x.cols();
  require(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n,
          "layer_norm: gain/bias must be 1 x cols(x)");
  const Matrix& xv = x.value();
  Matrix xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix v = xhat.array().rowwise() * gain.value().row(0).array();
  v.rowwise() += bias.value().row(0);
  return x.tape().record(
      "layer_norm", std::move(v), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), n](Tape& t, const Matrix& g) {
        if (t.needs_grad(gain)) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (t.needs_grad(bias)) t.accumulate(bias, g.colwise().sum());
        if (!t.needs_grad(x)) return;
        Matrix dxhat = g.array().rowwise() * gain.value().row(0).array();
        Matrix dx(g.rows(), n);
        const double nn = static_cast<double>(n);
        for (Index r = 0; r < g.rows(); ++r) {
          const double s1 = dxhat.row(r).sum();
          const double s2 = dxhat.row(r).dot(xhat.row(r));
          dx.row(r) = (inv_std(r) / nn) * (nn * dxhat.row(r).array() - s1 - xhat.row(r).array() * s2);
        }
        t.accumulate(x, dx);
      });
}

namespace {

// Row-wise masked softmax in place; returns indices of rows with no unmasked entry.
std::vector<Index> softmax_rows(Matrix& s, const Mask* mask) {
  std::vector<Index> empty;
  for (Index r = 0; r < s.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < s.cols(); ++c) {
      if (mask == nullptr || (*mask)(r, c)) mx = std::max(mx, s(r, c));
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      s.row(r).setZero();
      empty.push_back(r);
      continue;
    }
    double total = 0.0;
    for (Index c = 0; c < s.cols(); ++c) {
      if (mask == nullptr || (*mask)(r, c)) {
        s(r, c) = std::exp(s(r, c) - mx);
        total += s(r, c);
      } else {
        s(r, c) = 0.0;
      }
    }
    s.row(r) /= total;
  }
  return empty;
}

// dS = P o (dP - rowsum(dP o P))
Matrix softmax_backward(const Matrix& p, const Matrix& dp) {
  Eigen::VectorXd dots = dp.cwiseProduct(p).rowwise().sum();
  return p.cwiseProduct((dp.colwise() - dots));
}

}  // namespace

Tensor masked_softmax(const Tensor& logits, const Mask& mask, std::vector<Index>* empty_rows) {
  require(mask.rows() == logits.rows() && mask.cols() == logits.cols(), "masked_softmax: mask shape mismatch");
  Matrix p = logits.value();
  auto empty = softmax_rows(p, &mask);
  if (empty_rows != nullptr) *empty_rows = std::move(empty);
  Tape& tape = logits.tape();
  const int self = static_cast<int>(tape.size());
  return tape.record("masked_softmax", std::move(p), {logits}, [logits, self](Tape& t, const Matrix& g) {
    t.accumulate(logits, softmax_backward(t.value(self), g));
  });
}

Tensor softmax(const Tensor& logits) {
  Matrix p = logits.value();
  softmax_rows(p, nullptr);
  Tape& tape = logits.tape();
  const int self = static_cast<int>(tape.size());
  return tape.record("softmax", std::move(p), {logits}, [logits, self](Tape& t, const Matrix& g) {
    t.accumulate(logits, softmax_backward(t.value(self), g));
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, const Mask* mask) {
  require(q.cols() == k.cols(), "attention: query and key widths differ");
  require(k.rows() == v.rows(), "attention: key and value counts differ");
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Tensor scores = scale(matmul(q, transpose(k)), inv_sqrt_dk);
  Tensor weights = mask != nullptr ? masked_softmax(scores, *mask) : softmax(scores);
  return matmul(weights, v);
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, const Mask* mask) {
  require(heads >= 1, "multi_head_attention: heads must be positive");
  require(q.cols() == k.cols(), "multi_head_attention: query and key widths differ");
  require(k.rows() == v.rows(), "multi_head_attention: key and value counts differ");
  require(q.cols() % heads == 0 && v.cols() % heads == 0, "multi_head_attention: width not divisible by heads");
  if (mask != nullptr) {
    require(mask->rows() == q.rows() && mask->cols() == k.rows(), "multi_head_attention: mask shape mismatch");
  }
  const Index dk = q.cols() / heads;
  const Index dv = v.cols() / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dk));
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  Matrix out(Q.rows(), V.cols());
  std::vector<Matrix> probs(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Matrix s = (Q.middleCols(h * dk, dk) * K.middleCols(h * dk, dk).transpose()) * sc;
    softmax_rows(s, mask);
    out.middleCols(h * dv, dv) = s * V.middleCols(h * dv, dv);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  return q.tape().record(
      "multi_head_attention", std::move(out), {q, k, v},
      [q, k, v, heads, dk, dv, sc, probs = std::move(probs)](Tape& t, const Matrix& g) {
        const Matrix& Q = q.value();
        const Matrix& K = k.value();
        const Matrix& V = v.value();
        Matrix dQ(Q.rows(), Q.cols()), dK(K.rows(), K.cols()), dV(V.rows(), V.cols());
        for (int h = 0; h < heads; ++h) {
          const Matrix& p = probs[static_cast<std::size_t>(h)];
          const auto gh = g.middleCols(h * dv, dv);
          dV.middleCols(h * dv, dv) = p.transpose() * gh;
          Matrix ds = softmax_backward(p, gh * V.middleCols(h * dv, dv).transpose()) * sc;
          dQ.middleCols(h * dk, dk) = ds * K.middleCols(h * dk, dk);
          dK.middleCols(h * dk, dk) = ds.transpose() * Q.middleCols(h * dk, dk);
        }
        t.accumulate(q, dQ);
        t.accumulate(k, dK);
        t.accumulate(v, dV);
      });
}

Tensor grouped_causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, int group_size) {
  require(heads >= 1 && group_size >= 1, "grouped_causal_attention: heads and group size must be positive");
  require(q.cols() == k.cols(), "grouped_causal_attention: query and key widths differ");
  require(q.rows() == k.rows() && k.rows() == v.rows(), "grouped_causal_attention: row counts differ");
  require(q.rows() % group_size == 0, "grouped_causal_attention: rows not divisible by group size");
  require(q.cols() % heads == 0 && v.cols() % heads == 0, "grouped_causal_attention: width not divisible by heads");
  const Index dk = q.cols() / heads;
  const Index dv = v.cols() / heads;
  const Index gs = group_size;
  const Index groups = q.rows() / gs;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dk));
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  const Matrix& V = v.value();
  Matrix out(Q.rows(), V.cols());
  // probs[h] row (g * gs + i) holds the attention weights of query i in group g.
  std::vector<Matrix> probs(static_cast<std::size_t>(heads), Matrix::Zero(Q.rows(), gs));
  for (int h = 0; h < heads; ++h) {
    Matrix& p = probs[static_cast<std::size_t>(h)];
    for (Index grp = 0; grp < groups; ++grp) {
      const Index r0 = grp * gs;
      for (Index i = 0; i < gs; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j <= i; ++j) {
          const double s = Q.row(r0 + i).segment(h * dk, dk).dot(K.row(r0 + j).segment(h * dk, dk)) * sc;
          p(r0 + i, j) = s;
          mx = std::max(mx, s);
        }
        double total = 0.0;
        for (Index j = 0; j <= i; ++j) {
          p(r0 + i, j) = std::exp(p(r0 + i, j) - mx);
          total += p(r0 + i, j);
        }
        auto orow = out.row(r0 + i).segment(h * dv, dv);
        orow.setZero();
        for (Index j = 0; j <= i; ++j) {
          p(r0 + i, j) /= total;
          orow += p(r0 + i, j) * V.row(r0 + j).segment(h * dv, dv);
        }
      }
    }
  }
  return q.tape().record(
      "grouped_causal_attention", std::move(out), {q, k, v},
      [q, k, v, heads, dk, dv, gs, groups, sc, probs = std::move(probs)](Tape& t, const Matrix& g) {
        const Matrix& Q = q.value();
        const Matrix& K = k.value();
        const Matrix& V = v.value();
        Matrix dQ = Matrix::Zero(Q.rows(), Q.cols());
        Matrix dK = Matrix::Zero(K.rows(), K.cols());
        Matrix dV = Matrix::Zero(V.rows(), V.cols());
        std::vector<double> dp(static_cast<std::size_t>(gs));
        for (int h = 0; h < heads; ++h) {
          const Matrix& p = probs[static_cast<std::size_t>(h)];
          for (Index grp = 0; grp < groups; ++grp) {
            const Index r0 = grp * gs;
            for (Index i = 0; i < gs; ++i) {
              const auto gi = g.row(r0 + i).segment(h * dv, dv);
              double dot = 0.0;
              for (Index j = 0; j <= i; ++j) {
                const double pij = p(r0 + i, j);
                dV.row(r0 + j).segment(h * dv, dv) += pij * gi;
                dp[static_cast<std::size_t>(j)] = gi.dot(V.row(r0 + j).segment(h * dv, dv));
                dot += pij * dp[static_cast<std::size_t>(j)];
              }
              for (Index j = 0; j <= i; ++j) {
                const double ds = p(r0 + i, j) * (dp[static_cast<std::size_t>(j)] - dot) * sc;
                dQ.row(r0 + i).segment(h * dk, dk) += ds * K.row(r0 + j).segment(h * dk, dk);
                dK.row(r0 + j).segment(h * dk, dk) += ds * Q.row(r0 + i).segment(h * dk, dk);
              }
            }
          }
        }
        t.accumulate(q, dQ);
        t.accumulate(k, dK);
        t.accumulate(v, dV);
      });
}

Tensor gaussian_log_prob(const Tensor& mu, const Tensor& sigma, const Matrix& target) {
  same_shape(mu, sigma, "gaussian_log_prob");
  require(target.rows() == mu.rows() && target.cols() == mu.cols(), "gaussian_log_prob: target shape mismatch");
  Tape& tape = mu.tape();
  const double d = static_cast<double>(mu.cols());
  Tensor z = div(sub(tape.constant(target), mu), sigma);
  Tensor per_row = row_sum(add(scale(square(z), 0.5), log(sigma)));
  return add_scalar(scale(per_row, -1.0), -0.5 * d * std::log(2.0 * std::numbers::pi));
}

Tensor gaussian_entropy(const Tensor& sigma) {
  const double d = static_cast<double>(sigma.cols());
  return add_scalar(row_sum(log(sigma)), 0.5 * d * std::log(2.0 * std::numbers::pi * std::numbers::e));
}

}  // namespace silrrt::ad
