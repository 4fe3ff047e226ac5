// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0
//
// Metric-aware regularization: batchwise leave-one-out Nadaraya-Watson
// kernel regression in the learned 2-D embedding space, with a Gaussian
// kernel and a median-heuristic bandwidth. The squared-error loss between
// regressed and oracle scores backpropagates into the generator through the
// projected points.

#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "higen/grammar.hpp"
#include "higen/tape.hpp"
#include "higen/types.hpp"

namespace higen {

inline constexpr double kBandwidthFloor = 1e-3;

// Median of the N(N-1)/2 pairwise Euclidean distances, floored at 1e-3.
// Treated as a constant with respect to gradients.
template <typename S>
S adaptive_bandwidth(const Mat<S>& z) {
  const Index n = z.rows();
  require(n >= 2, "adaptive_bandwidth needs at least 2 points");
  std::vector<S> d;
  d.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      d.push_back((z.row(i) - z.row(j)).norm());
  std::sort(d.begin(), d.end());
  const size_t m = d.size();
  const S med = (m % 2 == 1) ? d[m / 2]
                             : S(0.5) * (d[m / 2 - 1] + d[m / 2]);
  return std::max(med, S(kBandwidthFloor));
}

template <typename S>
struct KernelRegression {
  Vec<S> y_hat;  // leave-one-out estimates
  Mat<S> W;      // Gaussian kernel weights, zero diagonal
};

// W_ij = exp(-|z_i - z_j|^2 / (2 h^2)) for j != i, W_ii = 0;
// y_hat_i = sum_j W_ij y_j / sum_j W_ij.
template <typename S>
KernelRegression<S> kernel_regress(const Mat<S>& z, const Vec<S>& y, S h) {
  const Index n = z.rows();
  require(n >= 2, "kernel_regress needs at least 2 points");
  require(y.size() == n, "kernel_regress: y length mismatch");
  require(h > S(0), "kernel_regress: bandwidth must be positive");
  KernelRegression<S> out;
  out.W = Mat<S>::Zero(n, n);
  out.y_hat = Vec<S>(n);
  const S inv = S(1) / (S(2) * h * h);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      out.W(i, j) = std::exp(-(z.row(i) - z.row(j)).squaredNorm() * inv);
    }
  for (Index i = 0; i < n; ++i) {
    const S denom = out.W.row(i).sum();
    out.y_hat(i) = out.W.row(i).dot(y.transpose()) / denom;
  }
  return out;
}

// Mean squared error between regressed and target scores.
template <typename S>
S maer_loss(const Vec<S>& y_hat, const Vec<S>& y) {
  require(y_hat.size() == y.size(), "maer_loss: length mismatch");
  require(y.size() >= 2, "maer_loss needs at least 2 points");
  return (y_hat - y).squaredNorm() / static_cast<S>(y.size());
}

// Full per-example MetricBatch for reports and diagnostics.
template <typename S>
struct MetricBatch {
  Mat<S> e_I;    // N x 64 image embeddings
  Mat<S> z;      // N x 2 projected points
  Vec<S> y;      // oracle targets in [0, 1]
  Vec<S> y_hat;  // kernel-regressed estimates
  S h = S(0);
  Mat<S> W;
};

// Tape-side regression loss over per-example z nodes. The off-diagonal
// softmax over -D/(2h^2) equals the leave-one-out Nadaraya-Watson weights;
// y and the bandwidth are constants, so gradients reach the generator only
// through the projected points.
template <typename S>
struct MetricGraph {
  Val<S> z_all;   // N x 2
  Val<S> y_hat;   // N x 1
  Val<S> loss;    // 1 x 1
  S bandwidth = S(0);
};

// fixed_h overrides the adaptive bandwidth; the gradient checker uses it to
// probe the loss with the stop-gradient bandwidth held at its base value.
template <typename S>
MetricGraph<S> metric_loss_graph(Tape<S>& tape,
                                 const std::vector<Val<S>>& z_points,
                                 const Vec<S>& y,
                                 std::optional<S> fixed_h = {}) {
  using namespace ops;
  const Index n = static_cast<Index>(z_points.size());
  require(n >= 2, "metric loss needs a batch of at least 2");
  require(y.size() == n, "metric loss: target length mismatch");

  MetricGraph<S> g;
  g.z_all = concat_rows(z_points);
  g.bandwidth =
      fixed_h ? *fixed_h : adaptive_bandwidth(g.z_all.v());

  Val<S> d = pairwise_sqdist(g.z_all);
  Val<S> scores =
      scale(d, -S(1) / (S(2) * g.bandwidth * g.bandwidth));
  Mat<S> offdiag = Mat<S>::Ones(n, n) - Mat<S>::Identity(n, n);
  Val<S> weights = masked_softmax_rows(scores, offdiag);
  Val<S> y_const = tape.constant(Mat<S>(y));
  g.y_hat = matmul(weights, y_const);
  Val<S> resid = sub(g.y_hat, y_const);
  g.loss = mean_all(hadamard(resid, resid));
  return g;
}

// Hard decode of a token-probability grid: per-position argmax with
// lowest-id tie-break.
template <typename S>
TokenGrid argmax_decode(const Mat<S>& soft) {
  require(soft.rows() == kHrCells && soft.cols() == vocab::kImageVocabSize,
          "argmax_decode expects a 64 x 8 grid");
  TokenGrid g;
  g.res = Resolution::kHr;
  g.cells.resize(kHrCells);
  for (Index r = 0; r < soft.rows(); ++r) {
    int best = 0;
    for (Index c = 1; c < soft.cols(); ++c)
      if (soft(r, c) > soft(r, best)) best = static_cast<int>(c);
    g.cells[r] = best;
  }
  return g;
}

// Oracle targets for a batch of soft grids: score of the hard decode against
// the prompt. Returned as constants; no gradient flows through y.
template <typename S>
Vec<S> score_targets(const std::vector<Mat<S>>& soft_batch,
                     const std::vector<const PromptSpec*>& prompts) {
  require(soft_batch.size() == prompts.size(),
          "score_targets: batch size mismatch");
  Vec<S> y(static_cast<Index>(soft_batch.size()));
  for (size_t i = 0; i < soft_batch.size(); ++i)
    y(static_cast<Index>(i)) = static_cast<S>(
        oracle_score(argmax_decode(soft_batch[i]), *prompts[i]));
  return y;
}

}  // namespace higen
