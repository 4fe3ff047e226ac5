// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode autodiff over dense Eigen matrices. A Tape owns value/grad
// nodes created in topological order; ops are free functions returning node
// handles. backward() sweeps nodes in reverse creation order, which is a
// valid reverse topological order because ops only reference existing nodes.

#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "higen/types.hpp"

namespace higen {

template <typename S>
class Tape;

// Lightweight handle; ops are free functions over Val so expressions read
// like math: add(matmul(x, w), b).
template <typename S>
struct Val {
  Tape<S>* tape = nullptr;
  int id = -1;

  const Mat<S>& v() const;
  bool valid() const { return tape != nullptr && id >= 0; }
};

template <typename S>
class Tape {
 public:
  struct Node {
    Mat<S> value;
    Mat<S> grad;  // empty until first accumulation
    std::function<void(Tape&, int)> pull;
    bool needs_grad = false;
  };

  explicit Tape(bool track_grad = true) : track_(track_grad) {}

  bool tracking() const { return track_; }

  int size() const { return static_cast<int>(nodes_.size()); }

  void clear() { nodes_.clear(); }

  Val<S> constant(Mat<S> v) {
    nodes_.push_back(Node{std::move(v), {}, nullptr, false});
    return {this, size() - 1};
  }

  Val<S> leaf(Mat<S> v) {
    nodes_.push_back(Node{std::move(v), {}, nullptr, track_});
    return {this, size() - 1};
  }

  Val<S> make(Mat<S> v, bool needs_grad,
              std::function<void(Tape&, int)> pull) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad && track_;
    if (n.needs_grad) n.pull = std::move(pull);
    nodes_.push_back(std::move(n));
    return {this, size() - 1};
  }

  const Mat<S>& value(int id) const { return nodes_[id].value; }
  Mat<S>& value_mut(int id) { return nodes_[id].value; }

  const Mat<S>& grad(int id) const { return nodes_[id].grad; }
  bool has_grad(int id) const { return nodes_[id].grad.size() > 0; }

  S scalar(int id) const {
    const Mat<S>& v = nodes_[id].value;
    require(v.rows() == 1 && v.cols() == 1, "expected 1x1 node");
    return v(0, 0);
  }

  bool needs_grad(int id) const { return nodes_[id].needs_grad; }

  // Adds g into a node's gradient, allocating on first touch. No-op for
  // nodes that do not require gradients (constants, frozen tables).
  template <typename Expr>
  void accumulate(int id, const Expr& g) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  void seed(int id, Mat<S> g) {
    require(nodes_[id].value.rows() == g.rows() &&
                nodes_[id].value.cols() == g.cols(),
            "seed gradient shape mismatch");
    if (nodes_[id].grad.size() == 0)
      nodes_[id].grad = std::move(g);
    else
      nodes_[id].grad += g;
  }

  // Reverse sweep from a scalar root seeded with 1.
  void backward(Val<S> root) {
    require(root.tape == this, "root from another tape");
    seed(root.id, Mat<S>::Ones(1, 1));
    sweep(root.id);
  }

  // Reverse sweep after external seeds (multiple roots / vector-Jacobian).
  void sweep(int top_id) {
    for (int i = top_id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.pull || n.grad.size() == 0) continue;
      n.pull(*this, i);
    }
  }

  void sweep_all() { sweep(size() - 1); }

 private:
  std::vector<Node> nodes_;
  bool track_;
};

template <typename S>
inline const Mat<S>& Val<S>::v() const {
  return tape->value(id);
}

namespace ops {

template <typename S>
Val<S> add(Val<S> a, Val<S> b) {
  require(a.v().rows() == b.v().rows() && a.v().cols() == b.v().cols(),
          "add: shape mismatch");
  Tape<S>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.make(a.v() + b.v(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  tp.accumulate(ia, g);
                  tp.accumulate(ib, g);
                });
}

template <typename S>
Val<S> sub(Val<S> a, Val<S> b) {
  require(a.v().rows() == b.v().rows() && a.v().cols() == b.v().cols(),
          "sub: shape mismatch");
  Tape<S>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.make(a.v() - b.v(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  tp.accumulate(ia, g);
                  tp.accumulate(ib, -g);
                });
}

template <typename S>
Val<S> hadamard(Val<S> a, Val<S> b) {
  require(a.v().rows() == b.v().rows() && a.v().cols() == b.v().cols(),
          "hadamard: shape mismatch");
  Tape<S>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.make(a.v().cwiseProduct(b.v()),
                t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
                  tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
                });
}

template <typename S>
Val<S> scale(Val<S> a, S s) {
  Tape<S>& t = *a.tape;
  const int ia = a.id;
  return t.make(a.v() * s, t.needs_grad(ia),
                [ia, s](Tape<S>& tp, int self) {
                  tp.accumulate(ia, tp.grad(self) * s);
                });
}

template <typename S>
Val<S> add_const(Val<S> a, S s) {
  Tape<S>& t = *a.tape;
  const int ia = a.id;
  return t.make((a.v().array() + s).matrix(), t.needs_grad(ia),
                [ia](Tape<S>& tp, int self) {
                  tp.accumulate(ia, tp.grad(self));
                });
}

template <typename S>
Val<S> matmul(Val<S> a, Val<S> b) {
  require(a.v().cols() == b.v().rows(), "matmul: inner dim mismatch");
  Tape<S>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.make(a.v() * b.v(), t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  tp.accumulate(ia, g * tp.value(ib).transpose());
                  tp.accumulate(ib, tp.value(ia).transpose() * g);
                });
}

// a * b^T * s; used for attention scores with the 1/sqrt(d_head) scale.
template <typename S>
Val<S> matmul_nt(Val<S> a, Val<S> b, S s) {
  require(a.v().cols() == b.v().cols(), "matmul_nt: inner dim mismatch");
  Tape<S>& t = *a.tape;
  const int ia = a.id, ib = b.id;
  return t.make((a.v() * b.v().transpose()) * s,
                t.needs_grad(ia) || t.needs_grad(ib),
                [ia, ib, s](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  tp.accumulate(ia, g * tp.value(ib) * s);
                  tp.accumulate(ib, g.transpose() * tp.value(ia) * s);
                });
}

// x (L x din) * W (din x dout) + bias row broadcast. Bias is 1 x dout.
template <typename S>
Val<S> affine_rows(Val<S> x, Val<S> w, Val<S> b) {
  require(x.v().cols() == w.v().rows(), "affine_rows: inner dim mismatch");
  require(b.v().rows() == 1 && b.v().cols() == w.v().cols(),
          "affine_rows: bias must be 1 x dout");
  Tape<S>& t = *x.tape;
  const int ix = x.id, iw = w.id, ib = b.id;
  Mat<S> out = x.v() * w.v();
  out.rowwise() += b.v().row(0);
  return t.make(std::move(out),
                t.needs_grad(ix) || t.needs_grad(iw) || t.needs_grad(ib),
                [ix, iw, ib](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  tp.accumulate(ix, g * tp.value(iw).transpose());
                  tp.accumulate(iw, tp.value(ix).transpose() * g);
                  tp.accumulate(ib, g.colwise().sum());
                });
}

// out.row(k) = table.row(indices[k]); scatter-add on the way back.
template <typename S>
Val<S> gather_rows(Val<S> table, std::vector<int> indices) {
  Tape<S>& t = *table.tape;
  const int it = table.id;
  const Mat<S>& tv = table.v();
  Mat<S> out(static_cast<Index>(indices.size()), tv.cols());
  for (size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] >= 0 && indices[k] < tv.rows(),
            "gather_rows: index out of range");
    out.row(static_cast<Index>(k)) = tv.row(indices[k]);
  }
  return t.make(std::move(out), t.needs_grad(it),
                [it, idx = std::move(indices)](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  Mat<S> acc = Mat<S>::Zero(tp.value(it).rows(),
                                            tp.value(it).cols());
                  for (size_t k = 0; k < idx.size(); ++k)
                    acc.row(idx[k]) += g.row(static_cast<Index>(k));
                  tp.accumulate(it, acc);
                });
}

template <typename S>
Val<S> concat_rows(const std::vector<Val<S>>& parts) {
  require(!parts.empty(), "concat_rows: empty");
  Tape<S>& t = *parts[0].tape;
  Index rows = 0;
  const Index cols = parts[0].v().cols();
  bool needs = false;
  std::vector<int> ids;
  std::vector<Index> heights;
  for (const auto& p : parts) {
    require(p.v().cols() == cols, "concat_rows: column mismatch");
    rows += p.v().rows();
    heights.push_back(p.v().rows());
    ids.push_back(p.id);
    needs = needs || t.needs_grad(p.id);
  }
  Mat<S> out(rows, cols);
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.v().rows()) = p.v();
    r += p.v().rows();
  }
  return t.make(std::move(out), needs,
                [ids, heights](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  Index r = 0;
                  for (size_t k = 0; k < ids.size(); ++k) {
                    tp.accumulate(ids[k], g.middleRows(r, heights[k]));
                    r += heights[k];
                  }
                });
}

template <typename S>
Val<S> slice_rows(Val<S> x, Index r0, Index n) {
  require(r0 >= 0 && r0 + n <= x.v().rows(), "slice_rows: out of range");
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  return t.make(x.v().middleRows(r0, n), t.needs_grad(ix),
                [ix, r0, n](Tape<S>& tp, int self) {
                  Mat<S> acc = Mat<S>::Zero(tp.value(ix).rows(),
                                            tp.value(ix).cols());
                  acc.middleRows(r0, n) = tp.grad(self);
                  tp.accumulate(ix, acc);
                });
}

template <typename S>
Val<S> slice_cols(Val<S> x, Index c0, Index n) {
  require(c0 >= 0 && c0 + n <= x.v().cols(), "slice_cols: out of range");
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  return t.make(x.v().middleCols(c0, n), t.needs_grad(ix),
                [ix, c0, n](Tape<S>& tp, int self) {
                  Mat<S> acc = Mat<S>::Zero(tp.value(ix).rows(),
                                            tp.value(ix).cols());
                  acc.middleCols(c0, n) = tp.grad(self);
                  tp.accumulate(ix, acc);
                });
}

template <typename S>
Val<S> concat_cols(const std::vector<Val<S>>& parts) {
  require(!parts.empty(), "concat_cols: empty");
  Tape<S>& t = *parts[0].tape;
  const Index rows = parts[0].v().rows();
  Index cols = 0;
  bool needs = false;
  std::vector<int> ids;
  std::vector<Index> widths;
  for (const auto& p : parts) {
    require(p.v().rows() == rows, "concat_cols: row mismatch");
    cols += p.v().cols();
    widths.push_back(p.v().cols());
    ids.push_back(p.id);
    needs = needs || t.needs_grad(p.id);
  }
  Mat<S> out(rows, cols);
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.v().cols()) = p.v();
    c += p.v().cols();
  }
  return t.make(std::move(out), needs,
                [ids, widths](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  Index c = 0;
                  for (size_t k = 0; k < ids.size(); ++k) {
                    tp.accumulate(ids[k], g.middleCols(c, widths[k]));
                    c += widths[k];
                  }
                });
}

// out.row(p) = x.row(src[p]); the 2x nearest-neighbor spatial upsample is a
// special case. Gradients of replicated rows accumulate onto their source.
template <typename S>
Val<S> replicate_rows(Val<S> x, std::vector<int> src) {
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  Mat<S> out(static_cast<Index>(src.size()), x.v().cols());
  for (size_t p = 0; p < src.size(); ++p) {
    require(src[p] >= 0 && src[p] < x.v().rows(),
            "replicate_rows: index out of range");
    out.row(static_cast<Index>(p)) = x.v().row(src[p]);
  }
  return t.make(std::move(out), t.needs_grad(ix),
                [ix, map = std::move(src)](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  Mat<S> acc = Mat<S>::Zero(tp.value(ix).rows(),
                                            tp.value(ix).cols());
                  for (size_t p = 0; p < map.size(); ++p)
                    acc.row(map[p]) += g.row(static_cast<Index>(p));
                  tp.accumulate(ix, acc);
                });
}

// Mean over rows -> 1 x d.
template <typename S>
Val<S> row_mean_all(Val<S> x) {
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  const S inv = S(1) / static_cast<S>(x.v().rows());
  return t.make(x.v().colwise().sum() * inv, t.needs_grad(ix),
                [ix, inv](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  Mat<S> acc(tp.value(ix).rows(), tp.value(ix).cols());
                  acc.rowwise() = g.row(0) * inv;
                  tp.accumulate(ix, acc);
                });
}

template <typename S>
Val<S> sum_all(Val<S> x) {
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  Mat<S> out(1, 1);
  out(0, 0) = x.v().sum();
  return t.make(std::move(out), t.needs_grad(ix),
                [ix](Tape<S>& tp, int self) {
                  const S g = tp.grad(self)(0, 0);
                  tp.accumulate(ix, Mat<S>::Constant(tp.value(ix).rows(),
                                                     tp.value(ix).cols(), g));
                });
}

template <typename S>
Val<S> mean_all(Val<S> x) {
  const S inv = S(1) / static_cast<S>(x.v().rows() * x.v().cols());
  return scale(sum_all(x), inv);
}

// Per-row LayerNorm with learnable gain/bias (1 x d each).
template <typename S>
Val<S> layer_norm_rows(Val<S> x, Val<S> gamma, Val<S> beta, S eps = S(1e-5)) {
  const Index d = x.v().cols();
  require(gamma.v().rows() == 1 && gamma.v().cols() == d &&
              beta.v().rows() == 1 && beta.v().cols() == d,
          "layer_norm_rows: gain/bias must be 1 x d");
  Tape<S>& t = *x.tape;
  const int ix = x.id, ig = gamma.id, ib = beta.id;

  const Mat<S>& xv = x.v();
  Mat<S> xhat(xv.rows(), d);
  Vec<S> inv_std(xv.rows());
  for (Index r = 0; r < xv.rows(); ++r) {
    const S mu = xv.row(r).mean();
    const S var = (xv.row(r).array() - mu).square().mean();
    const S is = S(1) / std::sqrt(var + eps);
    inv_std(r) = is;
    xhat.row(r) = (xv.row(r).array() - mu) * is;
  }
  Mat<S> out = xhat;
  out.array().rowwise() *= gamma.v().row(0).array();
  out.rowwise() += beta.v().row(0);

  const bool needs =
      t.needs_grad(ix) || t.needs_grad(ig) || t.needs_grad(ib);
  return t.make(std::move(out), needs,
                [ix, ig, ib, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  const Index d = g.cols();
                  tp.accumulate(ig, (g.cwiseProduct(xhat)).colwise().sum());
                  tp.accumulate(ib, g.colwise().sum());
                  if (!tp.needs_grad(ix)) return;
                  const auto gamma_row = tp.value(ig).row(0);
                  Mat<S> dx(g.rows(), d);
                  for (Index r = 0; r < g.rows(); ++r) {
                    Eigen::Array<S, 1, Eigen::Dynamic> gy =
                        g.row(r).array() * gamma_row.array();
                    const S m1 = gy.mean();
                    const S m2 = (gy * xhat.row(r).array()).mean();
                    dx.row(r) =
                        ((gy - m1 - xhat.row(r).array() * m2) * inv_std(r))
                            .matrix();
                  }
                  tp.accumulate(ix, dx);
                });
}

// Exact GELU, x * Phi(x); smooth everywhere, which keeps central finite
// differences honest in the gradient checker.
template <typename S>
Val<S> gelu(Val<S> x) {
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  Mat<S> out = x.v().unaryExpr([](S v) {
    const double vd = static_cast<double>(v);
    return static_cast<S>(vd * 0.5 *
                          (1.0 + std::erf(vd * 0.7071067811865475244)));
  });
  return t.make(std::move(out), t.needs_grad(ix),
                [ix](Tape<S>& tp, int self) {
                  Mat<S> d = tp.value(ix).unaryExpr([](S v) {
                    const double vd = static_cast<double>(v);
                    const double phi =
                        0.5 * (1.0 + std::erf(vd * 0.7071067811865475244));
                    const double dens = 0.3989422804014326779 *
                                        std::exp(-0.5 * vd * vd);
                    return static_cast<S>(phi + vd * dens);
                  });
                  tp.accumulate(ix, tp.grad(self).cwiseProduct(d));
                });
}

template <typename S>
Val<S> tanh_op(Val<S> x) {
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  return t.make(x.v().array().tanh().matrix(), t.needs_grad(ix),
                [ix](Tape<S>& tp, int self) {
                  const Mat<S>& y = tp.value(self);
                  tp.accumulate(
                      ix, tp.grad(self).cwiseProduct(
                              (S(1) - y.array().square()).matrix()));
                });
}

template <typename S>
Val<S> exp_op(Val<S> x) {
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  return t.make(x.v().array().exp().matrix(), t.needs_grad(ix),
                [ix](Tape<S>& tp, int self) {
                  tp.accumulate(ix,
                                tp.grad(self).cwiseProduct(tp.value(self)));
                });
}

// Clamp with pass-through gradient strictly inside [lo, hi].
template <typename S>
Val<S> clamp_op(Val<S> x, S lo, S hi) {
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  return t.make(x.v().cwiseMax(lo).cwiseMin(hi), t.needs_grad(ix),
                [ix, lo, hi](Tape<S>& tp, int self) {
                  const Mat<S>& xv = tp.value(ix);
                  Mat<S> mask = ((xv.array() >= lo) && (xv.array() <= hi))
                                    .template cast<S>()
                                    .matrix();
                  tp.accumulate(ix, tp.grad(self).cwiseProduct(mask));
                });
}

namespace detail {

template <typename S>
void softmax_backward_into(Tape<S>& tp, int input_id, int self_id) {
  const Mat<S>& y = tp.value(self_id);
  const Mat<S>& g = tp.grad(self_id);
  Mat<S> dx(y.rows(), y.cols());
  for (Index r = 0; r < y.rows(); ++r) {
    const S dot = g.row(r).dot(y.row(r));
    dx.row(r) = y.row(r).cwiseProduct(
        (g.row(r).array() - dot).matrix());
  }
  tp.accumulate(input_id, dx);
}

}  // namespace detail

// Row-wise softmax, numerically stable.
template <typename S>
Val<S> softmax_rows(Val<S> x) {
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  const Mat<S>& xv = x.v();
  Mat<S> out(xv.rows(), xv.cols());
  for (Index r = 0; r < xv.rows(); ++r) {
    const S m = xv.row(r).maxCoeff();
    out.row(r) = (xv.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return t.make(std::move(out), t.needs_grad(ix),
                [ix](Tape<S>& tp, int self) {
                  detail::softmax_backward_into(tp, ix, self);
                });
}

// Square score matrix; row r is softmaxed over columns 0..r and zero beyond.
template <typename S>
Val<S> causal_softmax_rows(Val<S> x) {
  require(x.v().rows() == x.v().cols(), "causal_softmax_rows: must be square");
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  const Mat<S>& xv = x.v();
  Mat<S> out = Mat<S>::Zero(xv.rows(), xv.cols());
  for (Index r = 0; r < xv.rows(); ++r) {
    const Index n = r + 1;
    const S m = xv.row(r).head(n).maxCoeff();
    out.row(r).head(n) = (xv.row(r).head(n).array() - m).exp();
    out.row(r).head(n) /= out.row(r).head(n).sum();
  }
  return t.make(std::move(out), t.needs_grad(ix),
                [ix](Tape<S>& tp, int self) {
                  detail::softmax_backward_into(tp, ix, self);
                });
}

// Softmax over entries where mask is nonzero; masked entries get weight 0.
// Each row must have at least one unmasked entry.
template <typename S>
Val<S> masked_softmax_rows(Val<S> x, const Mat<S>& mask) {
  require(mask.rows() == x.v().rows() && mask.cols() == x.v().cols(),
          "masked_softmax_rows: mask shape mismatch");
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  const Mat<S>& xv = x.v();
  Mat<S> out = Mat<S>::Zero(xv.rows(), xv.cols());
  for (Index r = 0; r < xv.rows(); ++r) {
    S m = std::numeric_limits<S>::lowest();
    for (Index c = 0; c < xv.cols(); ++c)
      if (mask(r, c) != S(0)) m = std::max(m, xv(r, c));
    require(m != std::numeric_limits<S>::lowest(),
            "masked_softmax_rows: fully masked row");
    S denom = S(0);
    for (Index c = 0; c < xv.cols(); ++c) {
      if (mask(r, c) != S(0)) {
        out(r, c) = std::exp(xv(r, c) - m);
        denom += out(r, c);
      }
    }
    out.row(r) /= denom;
  }
  return t.make(std::move(out), t.needs_grad(ix),
                [ix](Tape<S>& tp, int self) {
                  detail::softmax_backward_into(tp, ix, self);
                });
}

// Mean token cross-entropy of row-wise logits against integer targets.
template <typename S>
Val<S> cross_entropy_mean(Val<S> logits, std::vector<int> targets) {
  const Mat<S>& lv = logits.v();
  require(static_cast<Index>(targets.size()) == lv.rows(),
          "cross_entropy_mean: target count mismatch");
  Tape<S>& t = *logits.tape;
  const int il = logits.id;
  S total = S(0);
  for (Index r = 0; r < lv.rows(); ++r) {
    require(targets[r] >= 0 && targets[r] < lv.cols(),
            "cross_entropy_mean: target out of range");
    const S m = lv.row(r).maxCoeff();
    const S lse = m + std::log((lv.row(r).array() - m).exp().sum());
    total += lse - lv(r, targets[r]);
  }
  Mat<S> out(1, 1);
  out(0, 0) = total / static_cast<S>(lv.rows());
  return t.make(std::move(out), t.needs_grad(il),
                [il, tg = std::move(targets)](Tape<S>& tp, int self) {
                  const S g = tp.grad(self)(0, 0);
                  const Mat<S>& lv = tp.value(il);
                  const S inv = g / static_cast<S>(lv.rows());
                  Mat<S> dl(lv.rows(), lv.cols());
                  for (Index r = 0; r < lv.rows(); ++r) {
                    const S m = lv.row(r).maxCoeff();
                    Eigen::Array<S, 1, Eigen::Dynamic> p =
                        (lv.row(r).array() - m).exp();
                    p /= p.sum();
                    dl.row(r) = p.matrix() * inv;
                    dl(r, tg[r]) -= inv;
                  }
                  tp.accumulate(il, dl);
                });
}

// Sum over rows of log softmax(logits)[target]; the per-stage log-likelihood.
template <typename S>
Val<S> logprob_sum(Val<S> logits, std::vector<int> targets) {
  const Mat<S>& lv = logits.v();
  require(static_cast<Index>(targets.size()) == lv.rows(),
          "logprob_sum: target count mismatch");
  Tape<S>& t = *logits.tape;
  const int il = logits.id;
  S total = S(0);
  for (Index r = 0; r < lv.rows(); ++r) {
    const S m = lv.row(r).maxCoeff();
    const S lse = m + std::log((lv.row(r).array() - m).exp().sum());
    total += lv(r, targets[r]) - lse;
  }
  Mat<S> out(1, 1);
  out(0, 0) = total;
  return t.make(std::move(out), t.needs_grad(il),
                [il, tg = std::move(targets)](Tape<S>& tp, int self) {
                  const S g = tp.grad(self)(0, 0);
                  const Mat<S>& lv = tp.value(il);
                  Mat<S> dl(lv.rows(), lv.cols());
                  for (Index r = 0; r < lv.rows(); ++r) {
                    const S m = lv.row(r).maxCoeff();
                    Eigen::Array<S, 1, Eigen::Dynamic> p =
                        (lv.row(r).array() - m).exp();
                    p /= p.sum();
                    dl.row(r) = -p.matrix() * g;
                    dl(r, tg[r]) += g;
                  }
                  tp.accumulate(il, dl);
                });
}

// Pairwise squared Euclidean distances of the rows of z: D_ij = |z_i - z_j|^2.
template <typename S>
Val<S> pairwise_sqdist(Val<S> z) {
  Tape<S>& t = *z.tape;
  const int iz = z.id;
  const Mat<S>& zv = z.v();
  const Index n = zv.rows();
  Mat<S> d = Mat<S>::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const S v = (zv.row(i) - zv.row(j)).squaredNorm();
      d(i, j) = v;
      d(j, i) = v;
    }
  return t.make(std::move(d), t.needs_grad(iz),
                [iz](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  const Mat<S>& zv = tp.value(iz);
                  const Index n = zv.rows();
                  Mat<S> dz = Mat<S>::Zero(n, zv.cols());
                  for (Index i = 0; i < n; ++i)
                    for (Index j = 0; j < n; ++j) {
                      if (i == j) continue;
                      const S w = S(2) * (g(i, j) + g(j, i));
                      dz.row(i) += w * (zv.row(i) - zv.row(j));
                    }
                  tp.accumulate(iz, dz);
                });
}

// Reshape preserving row-major element order.
template <typename S>
Val<S> reshape(Val<S> x, Index rows, Index cols) {
  require(x.v().size() == rows * cols, "reshape: element count mismatch");
  Tape<S>& t = *x.tape;
  const int ix = x.id;
  Mat<S> out = Eigen::Map<const Mat<S>>(x.v().data(), rows, cols);
  return t.make(std::move(out), t.needs_grad(ix),
                [ix](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  tp.accumulate(ix, Eigen::Map<const Mat<S>>(
                                        g.data(), tp.value(ix).rows(),
                                        tp.value(ix).cols()));
                });
}

// Row-wise feature modulation: out.row(p) = gamma .* x.row(p) + beta.
template <typename S>
Val<S> film_rows(Val<S> x, Val<S> gamma, Val<S> beta) {
  const Index d = x.v().cols();
  require(gamma.v().rows() == 1 && gamma.v().cols() == d &&
              beta.v().rows() == 1 && beta.v().cols() == d,
          "film_rows: modulation must be 1 x d");
  Tape<S>& t = *x.tape;
  const int ix = x.id, ig = gamma.id, ib = beta.id;
  Mat<S> out = x.v();
  out.array().rowwise() *= gamma.v().row(0).array();
  out.rowwise() += beta.v().row(0);
  const bool needs =
      t.needs_grad(ix) || t.needs_grad(ig) || t.needs_grad(ib);
  return t.make(std::move(out), needs,
                [ix, ig, ib](Tape<S>& tp, int self) {
                  const Mat<S>& g = tp.grad(self);
                  const Mat<S>& xv = tp.value(ix);
                  Mat<S> dx = g;
                  dx.array().rowwise() *= tp.value(ig).row(0).array();
                  tp.accumulate(ix, dx);
                  tp.accumulate(ig, g.cwiseProduct(xv).colwise().sum());
                  tp.accumulate(ib, g.colwise().sum());
                });
}

}  // namespace ops

}  // namespace higen
