#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "diffstr/common.hpp"
#include "diffstr/rng.hpp"

namespace diffstr {

/// Named trainable arrays plus their gradients and optimizer slots.
/// The trainer is the single writer; forward passes only read values.
enum class ParamKind { Weight, Bias, Gain, Embedding };

template <class S>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Mat<S> value;
    Mat<S> grad;
    Mat<S> adam_m;
    Mat<S> adam_v;
    bool decay = true;
    ParamKind kind = ParamKind::Weight;
  };

  int add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
          bool decay, ParamKind kind = ParamKind::Weight) {
    Entry e;
    e.name = name;
    e.value = Mat<S>::Zero(rows, cols);
    e.grad = Mat<S>::Zero(rows, cols);
    e.adam_m = Mat<S>::Zero(rows, cols);
    e.adam_v = Mat<S>::Zero(rows, cols);
    e.decay = decay;
    e.kind = kind;
    entries_.push_back(std::move(e));
    return static_cast<int>(entries_.size()) - 1;
  }

  Entry& entry(int id) { return entries_[static_cast<std::size_t>(id)]; }
  const Entry& entry(int id) const { return entries_[static_cast<std::size_t>(id)]; }
  Mat<S>& value(int id) { return entry(id).value; }
  const Mat<S>& value(int id) const { return entry(id).value; }
  int size() const { return static_cast<int>(entries_.size()); }

  void zero_grads() {
    for (auto& e : entries_) e.grad.setZero();
  }

  double grad_sq_norm() const {
    double s = 0.0;
    for (const auto& e : entries_)
      s += e.grad.template cast<double>().squaredNorm();
    return s;
  }

  std::int64_t parameter_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
  }

 private:
  std::vector<Entry> entries_;
};

template <class S>
class Tape;

/// Lightweight handle to a tape node. Valid for the tape's lifetime.
template <class S>
struct Var {
  Tape<S>* tape = nullptr;
  int idx = -1;

  const Mat<S>& val() const { return tape->val(idx); }
  const Mat<S>& grad() const { return tape->grad(idx); }
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
  S scalar() const { return val()(0, 0); }
};

/// Define-by-run reverse-mode tape over dense Eigen matrices. Ops execute
/// immediately and push a backward closure; backward() replays them in
/// reverse order. One tape per training step / forward pass.
template <class S>
class Tape {
 public:
  using M = Mat<S>;
  /// Backward closure: (tape, index of the node it backs).
  using BackFn = std::function<void(Tape&, int)>;

  Var<S> input(M value, bool needs_grad = false) {
    return make(std::move(value), needs_grad, nullptr);
  }

  /// Leaf view of a parameter; its gradient is collected back into the
  /// store by accumulate_param_grads after backward().
  Var<S> param(ParamStore<S>& store, int pid) {
    Var<S> v = input(store.value(pid), true);
    param_links_.push_back({pid, v.idx});
    return v;
  }

  M& val(int idx) { return nodes_[static_cast<std::size_t>(idx)].val; }

  /// Gradient buffer, allocated to zeros on first touch.
  M& grad(int idx) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.grad.size() == 0) n.grad = M::Zero(n.val.rows(), n.val.cols());
    return n.grad;
  }

  /// True if the node has received any gradient so far.
  bool has_grad(int idx) const {
    return nodes_[static_cast<std::size_t>(idx)].grad.size() != 0;
  }

  bool needs_grad(int idx) const {
    return nodes_[static_cast<std::size_t>(idx)].needs_grad;
  }

  Var<S> make(M value, bool needs_grad, BackFn back) {
    nodes_.push_back(
        Node{std::move(value), M(), needs_grad ? std::move(back) : nullptr,
             needs_grad});
    return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Seeds d(loss)/d(loss) = 1 and replays the tape in reverse.
  void backward(Var<S> loss) {
    if (loss.val().size() != 1)
      throw ShapeMismatch("backward() expects a scalar loss node");
    grad(loss.idx).setConstant(S(1));
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && n.grad.size() != 0) n.back(*this, i);
    }
  }

  void accumulate_param_grads(ParamStore<S>& store) {
    for (const auto& [pid, idx] : param_links_) {
      Node& n = nodes_[static_cast<std::size_t>(idx)];
      if (n.grad.size() != 0) store.entry(pid).grad += n.grad;
    }
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    M val;
    M grad;
    BackFn back;
    bool needs_grad;
  };
  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> param_links_;
};

// ---------------------------------------------------------------------------
// Ops. Expression-style free functions; the graph lives on a.tape.
// ---------------------------------------------------------------------------

namespace ops_detail {

template <class S>
bool either_needs_grad(Var<S> a, Var<S> b) {
  return a.tape->needs_grad(a.idx) || b.tape->needs_grad(b.idx);
}

}  // namespace ops_detail

template <class S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape;
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: inner dims " + std::to_string(a.cols()) +
                        " vs " + std::to_string(b.rows()));
  Mat<S> out = a.val() * b.val();
  const int ai = a.idx, bi = b.idx;
  return t.make(std::move(out), ops_detail::either_needs_grad(a, b),
                [ai, bi](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  if (tp.needs_grad(ai))
                    tp.grad(ai).noalias() += g * tp.val(bi).transpose();
                  if (tp.needs_grad(bi))
                    tp.grad(bi).noalias() += tp.val(ai).transpose() * g;
                });
}

template <class S>
Var<S> operator+(Var<S> a, Var<S> b) {
  Tape<S>& t = *a.tape;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch("add: shape mismatch");
  Mat<S> out = a.val() + b.val();
  const int ai = a.idx, bi = b.idx;
  return t.make(std::move(out), ops_detail::either_needs_grad(a, b),
                [ai, bi](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  if (tp.needs_grad(ai)) tp.grad(ai) += g;
                  if (tp.needs_grad(bi)) tp.grad(bi) += g;
                });
}

template <class S>
Var<S> scale(Var<S> a, double s) {
  Tape<S>& t = *a.tape;
  Mat<S> out = a.val() * static_cast<S>(s);
  const int ai = a.idx;
  return t.make(std::move(out), t.needs_grad(a.idx),
                [ai, s](Tape<S>& tp, int self) {
                  if (tp.needs_grad(ai))
                    tp.grad(ai) += tp.grad(self) * static_cast<S>(s);
                });
}

/// Broadcasts a 1 x d bias row over every row of a.
template <class S>
Var<S> add_rowvec(Var<S> a, Var<S> v) {
  Tape<S>& t = *a.tape;
  if (v.rows() != 1 || v.cols() != a.cols())
    throw ShapeMismatch("add_rowvec: bias must be 1 x cols(a)");
  Mat<S> out = a.val().rowwise() + v.val().row(0);
  const int ai = a.idx, vi = v.idx;
  return t.make(std::move(out), ops_detail::either_needs_grad(a, v),
                [ai, vi](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  if (tp.needs_grad(ai)) tp.grad(ai) += g;
                  if (tp.needs_grad(vi))
                    tp.grad(vi).row(0) += g.colwise().sum();
                });
}

/// x is (B*rows_per) x d, extra is B x d: adds extra.row(b) to every row of
/// sample b's block. Used to inject per-sample time embeddings.
template <class S>
Var<S> add_per_sample_row(Var<S> x, Var<S> extra, int rows_per) {
  Tape<S>& t = *x.tape;
  const Eigen::Index B = extra.rows();
  if (x.rows() != B * rows_per || x.cols() != extra.cols())
    throw ShapeMismatch("add_per_sample_row: incompatible shapes");
  Mat<S> out = x.val();
  for (Eigen::Index b = 0; b < B; ++b)
    out.middleRows(b * rows_per, rows_per).rowwise() += extra.val().row(b);
  const int xi = x.idx, ei = extra.idx;
  return t.make(std::move(out), ops_detail::either_needs_grad(x, extra),
                [xi, ei, rows_per, B](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  if (tp.needs_grad(xi)) tp.grad(xi) += g;
                  if (tp.needs_grad(ei)) {
                    Mat<S>& ge = tp.grad(ei);
                    for (Eigen::Index b = 0; b < B; ++b)
                      ge.row(b) +=
                          g.middleRows(b * rows_per, rows_per).colwise().sum();
                  }
                });
}

enum class Activation { Gelu, Silu };

inline Activation activation_from_string(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "silu") return Activation::Silu;
  throw ConfigError("unknown activation: " + s);
}

template <class S>
Var<S> activation(Var<S> a, Activation kind) {
  Tape<S>& t = *a.tape;
  Mat<S> out;
  if (kind == Activation::Gelu) {
    out = a.val().unaryExpr([](S x) {
      return static_cast<S>(0.5 * static_cast<double>(x) *
                            (1.0 + std::erf(static_cast<double>(x) * M_SQRT1_2)));
    });
  } else {
    out = a.val().unaryExpr([](S x) {
      return static_cast<S>(static_cast<double>(x) /
                            (1.0 + std::exp(-static_cast<double>(x))));
    });
  }
  const int ai = a.idx;
  return t.make(std::move(out), t.needs_grad(a.idx),
                [ai, kind](Tape<S>& tp, int self) {
                  if (!tp.needs_grad(ai)) return;
                  const Mat<S>& g = tp.grad(self);
                  Mat<S> d = tp.val(ai).unaryExpr([kind](S xs) {
                    const double x = static_cast<double>(xs);
                    if (kind == Activation::Gelu) {
                      const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
                      const double pdf =
                          std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
                      return static_cast<S>(cdf + x * pdf);
                    }
                    const double sig = 1.0 / (1.0 + std::exp(-x));
                    return static_cast<S>(sig * (1.0 + x * (1.0 - sig)));
                  });
                  tp.grad(ai).array() += g.array() * d.array();
                });
}

/// Row-wise layer norm with learned gain/bias (each 1 x d).
template <class S>
Var<S> layer_norm(Var<S> x, Var<S> gamma, Var<S> beta, double eps = 1e-5) {
  Tape<S>& t = *x.tape;
  const Eigen::Index d = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 ||
      beta.cols() != d)
    throw ShapeMismatch("layer_norm: gain/bias must be 1 x d");
  Vec<S> mean = x.val().rowwise().mean();
  Mat<S> centered = x.val().colwise() - mean;
  Vec<S> inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<S>(d)) +
       static_cast<S>(eps))
          .sqrt()
          .inverse()
          .matrix();
  Mat<S> xhat = (centered.array().colwise() * inv_std.array()).matrix();
  Mat<S> out = ((xhat.array().rowwise() * gamma.val().row(0).array())
                    .rowwise() +
                beta.val().row(0).array())
                   .matrix();
  const int xi = x.idx, gi = gamma.idx, bi = beta.idx;
  return t.make(
      std::move(out),
      t.needs_grad(x.idx) || t.needs_grad(gamma.idx) || t.needs_grad(beta.idx),
      [xi, gi, bi, xhat = std::move(xhat), inv_std = std::move(inv_std),
       d](Tape<S>& tp, int self) {
        const Mat<S>& g = tp.grad(self);
        if (tp.needs_grad(gi))
          tp.grad(gi).row(0) += (g.array() * xhat.array()).colwise().sum().matrix();
        if (tp.needs_grad(bi)) tp.grad(bi).row(0) += g.colwise().sum();
        if (tp.needs_grad(xi)) {
          Mat<S> dxhat =
              (g.array().rowwise() * tp.val(gi).row(0).array()).matrix();
          Vec<S> m1 = dxhat.rowwise().mean();
          Vec<S> m2 = (dxhat.array() * xhat.array()).rowwise().mean().matrix();
          Mat<S> dx = (((dxhat.colwise() - m1).array() -
                        xhat.array().colwise() * m2.array())
                           .colwise() *
                       inv_std.array())
                          .matrix();
          (void)d;
          tp.grad(xi) += dx;
        }
      });
}

/// Gathers table rows by id. Backward scatter-adds serially, so gradient
/// accumulation order is fixed.
template <class S>
Var<S> embedding(Var<S> table, const std::vector<int>& ids) {
  Tape<S>& t = *table.tape;
  Mat<S> out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t n = 0; n < ids.size(); ++n)
    out.row(static_cast<Eigen::Index>(n)) = table.val().row(ids[n]);
  const int ti = table.idx;
  return t.make(std::move(out), t.needs_grad(table.idx),
                [ti, ids](Tape<S>& tp, int self) {
                  if (!tp.needs_grad(ti)) return;
                  const Mat<S>& g = tp.grad(self);
                  Mat<S>& gt = tp.grad(ti);
                  for (std::size_t n = 0; n < ids.size(); ++n)
                    gt.row(ids[n]) += g.row(static_cast<Eigen::Index>(n));
                });
}

/// Batched multi-head scaled dot-product attention without masking.
/// q is (B*Lq) x d, k and v are (B*Lk) x d; per sample b and head h,
/// out_block = softmax(Q K^T / sqrt(dh)) V. Cross-attention is the same op
/// with k/v taken from the encoder sequence.
template <class S>
Var<S> multihead_attention(Var<S> q, Var<S> k, Var<S> v, int batch, int heads,
                           int Lq, int Lk) {
  Tape<S>& t = *q.tape;
  const Eigen::Index d = q.cols();
  if (d % heads != 0) throw ShapeMismatch("attention: heads must divide d");
  if (q.rows() != static_cast<Eigen::Index>(batch) * Lq ||
      k.rows() != static_cast<Eigen::Index>(batch) * Lk || k.cols() != d ||
      v.rows() != k.rows() || v.cols() != d)
    throw ShapeMismatch("attention: inconsistent q/k/v shapes");
  const Eigen::Index dh = d / heads;
  const S sc = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

  Mat<S> out(q.rows(), d);
  std::vector<Mat<S>> probs(static_cast<std::size_t>(batch) * heads);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      auto Q = q.val().block(b * Lq, h * dh, Lq, dh);
      auto K = k.val().block(b * Lk, h * dh, Lk, dh);
      auto V = v.val().block(b * Lk, h * dh, Lk, dh);
      Mat<S> scores = (Q * K.transpose()) * sc;
      // row-wise softmax
      Vec<S> mx = scores.rowwise().maxCoeff();
      scores = (scores.colwise() - mx).array().exp().matrix();
      Vec<S> sum = scores.rowwise().sum();
      Mat<S> P = (scores.array().colwise() / sum.array()).matrix();
      out.block(b * Lq, h * dh, Lq, dh).noalias() = P * V;
      probs[static_cast<std::size_t>(b) * heads + h] = std::move(P);
    }
  }
  const int qi = q.idx, ki = k.idx, vi = v.idx;
  const bool ng = t.needs_grad(q.idx) || t.needs_grad(k.idx) || t.needs_grad(v.idx);
  return t.make(
      std::move(out), ng,
      [qi, ki, vi, batch, heads, Lq, Lk, dh, sc,
       probs = std::move(probs)](Tape<S>& tp, int self) {
        const Mat<S>& g = tp.grad(self);
        for (int b = 0; b < batch; ++b) {
          for (int h = 0; h < heads; ++h) {
            const Mat<S>& P = probs[static_cast<std::size_t>(b) * heads + h];
            auto Q = tp.val(qi).block(b * Lq, h * dh, Lq, dh);
            auto K = tp.val(ki).block(b * Lk, h * dh, Lk, dh);
            auto V = tp.val(vi).block(b * Lk, h * dh, Lk, dh);
            auto gO = g.block(b * Lq, h * dh, Lq, dh);
            if (tp.needs_grad(vi))
              tp.grad(vi).block(b * Lk, h * dh, Lk, dh).noalias() +=
                  P.transpose() * gO;
            Mat<S> dP = gO * V.transpose();
            Vec<S> rowdot = (dP.array() * P.array()).rowwise().sum();
            Mat<S> dS =
                (P.array() * (dP.colwise() - rowdot).array()).matrix() * sc;
            if (tp.needs_grad(qi))
              tp.grad(qi).block(b * Lq, h * dh, Lq, dh).noalias() += dS * K;
            if (tp.needs_grad(ki))
              tp.grad(ki).block(b * Lk, h * dh, Lk, dh).noalias() +=
                  dS.transpose() * Q;
          }
        }
      });
}

/// Inverted dropout; identity when p == 0.
template <class S>
Var<S> dropout(Var<S> a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  Tape<S>& t = *a.tape;
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  Mat<S> mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = rng.uniform() < p ? S(0) : keep_scale;
  Mat<S> out = a.val().array() * mask.array();
  const int ai = a.idx;
  return t.make(std::move(out), t.needs_grad(a.idx),
                [ai, mask = std::move(mask)](Tape<S>& tp, int self) {
                  if (tp.needs_grad(ai))
                    tp.grad(ai).array() += tp.grad(self).array() * mask.array();
                });
}

/// x W + b.
template <class S>
Var<S> linear(Var<S> x, Var<S> W, Var<S> b) {
  return add_rowvec(matmul(x, W), b);
}

// ---------------------------------------------------------------------------
// Losses (scalar 1x1 nodes).
// ---------------------------------------------------------------------------

/// Mean cross-entropy of row-softmax(logits) against integer targets.
template <class S>
Var<S> softmax_ce_mean(Var<S> logits, const std::vector<int>& targets) {
  Tape<S>& t = *logits.tape;
  const Eigen::Index N = logits.rows();
  if (static_cast<Eigen::Index>(targets.size()) != N)
    throw ShapeMismatch("softmax_ce_mean: target count mismatch");
  Vec<S> mx = logits.val().rowwise().maxCoeff();
  Mat<S> probs = (logits.val().colwise() - mx).array().exp().matrix();
  Vec<S> sum = probs.rowwise().sum();
  probs = (probs.array().colwise() / sum.array()).matrix();
  double loss = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    const double lz = static_cast<double>(logits.val()(n, targets[static_cast<std::size_t>(n)]));
    const double lse = static_cast<double>(mx(n)) + std::log(static_cast<double>(sum(n)));
    loss += lse - lz;
  }
  loss /= static_cast<double>(N);
  Mat<S> out(1, 1);
  out(0, 0) = static_cast<S>(loss);
  const int li = logits.idx;
  return t.make(std::move(out), t.needs_grad(logits.idx),
                [li, targets, probs = std::move(probs), N](Tape<S>& tp, int self) {
                  if (!tp.needs_grad(li)) return;
                  const S g = tp.grad(self)(0, 0) / static_cast<S>(N);
                  Mat<S>& gl = tp.grad(li);
                  gl += probs * g;
                  for (Eigen::Index n = 0; n < N; ++n)
                    gl(n, targets[static_cast<std::size_t>(n)]) -= g;
                });
}

/// Mean binary cross-entropy of sigmoid(logits) against {0,1} targets.
/// logits is N x 1.
template <class S>
Var<S> bce_logits_mean(Var<S> logits, const std::vector<std::uint8_t>& targets) {
  Tape<S>& t = *logits.tape;
  const Eigen::Index N = logits.rows();
  if (logits.cols() != 1 || static_cast<Eigen::Index>(targets.size()) != N)
    throw ShapeMismatch("bce_logits_mean: expects N x 1 logits and N targets");
  double loss = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    const double z = static_cast<double>(logits.val()(n, 0));
    const double y = targets[static_cast<std::size_t>(n)] ? 1.0 : 0.0;
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  loss /= static_cast<double>(N);
  Mat<S> out(1, 1);
  out(0, 0) = static_cast<S>(loss);
  const int li = logits.idx;
  return t.make(std::move(out), t.needs_grad(logits.idx),
                [li, targets, N](Tape<S>& tp, int self) {
                  if (!tp.needs_grad(li)) return;
                  const S g = tp.grad(self)(0, 0) / static_cast<S>(N);
                  Mat<S>& gl = tp.grad(li);
                  for (Eigen::Index n = 0; n < N; ++n) {
                    const double z = static_cast<double>(tp.val(li)(n, 0));
                    const double sig = 1.0 / (1.0 + std::exp(-z));
                    const double y = targets[static_cast<std::size_t>(n)] ? 1.0 : 0.0;
                    gl(n, 0) += static_cast<S>(sig - y) * g;
                  }
                });
}

/// Mean squared error between row-softmax(logits) and one-hot targets,
/// averaged over all N*K entries.
template <class S>
Var<S> mse_softmax_onehot_mean(Var<S> logits, const std::vector<int>& targets) {
  Tape<S>& t = *logits.tape;
  const Eigen::Index N = logits.rows();
  const Eigen::Index K = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != N)
    throw ShapeMismatch("mse_softmax_onehot_mean: target count mismatch");
  Vec<S> mx = logits.val().rowwise().maxCoeff();
  Mat<S> probs = (logits.val().colwise() - mx).array().exp().matrix();
  Vec<S> sum = probs.rowwise().sum();
  probs = (probs.array().colwise() / sum.array()).matrix();
  double loss = 0.0;
  for (Eigen::Index n = 0; n < N; ++n) {
    for (Eigen::Index c = 0; c < K; ++c) {
      const double target = targets[static_cast<std::size_t>(n)] == c ? 1.0 : 0.0;
      const double diff = static_cast<double>(probs(n, c)) - target;
      loss += diff * diff;
    }
  }
  loss /= static_cast<double>(N * K);
  Mat<S> out(1, 1);
  out(0, 0) = static_cast<S>(loss);
  const int li = logits.idx;
  return t.make(
      std::move(out), t.needs_grad(logits.idx),
      [li, targets, probs = std::move(probs), N, K](Tape<S>& tp, int self) {
        if (!tp.needs_grad(li)) return;
        const S g = tp.grad(self)(0, 0);
        Mat<S> dp = probs * (S(2) / static_cast<S>(N * K));
        for (Eigen::Index n = 0; n < N; ++n)
          dp(n, targets[static_cast<std::size_t>(n)]) -=
              S(2) / static_cast<S>(N * K);
        // softmax backward: dl = p * (dp - rowsum(dp * p))
        Vec<S> rowdot = (dp.array() * probs.array()).rowwise().sum();
        tp.grad(li) +=
            (probs.array() * (dp.colwise() - rowdot).array()).matrix() * g;
      });
}

}  // namespace diffstr
