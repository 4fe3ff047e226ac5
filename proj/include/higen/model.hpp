// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0
//
// Two-stage hierarchical autoregressive generator over token grids. A frozen
// text table embeds the 4-token prompt; a causal LR transformer decodes the
// 4x4 grid with an optional latent prefix row; its final hidden states are
// upsampled 2x, optionally feature-modulated by the latent, and added as
// per-position context for the causal HR transformer that decodes the 8x8
// grid. A frozen linear image embedder and a trainable 2-layer projection
// head map HR token probabilities to the 2-D metric embedding space.

#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "higen/grammar.hpp"
#include "higen/nn.hpp"
#include "higen/rng.hpp"
#include "higen/tape.hpp"
#include "higen/types.hpp"

namespace higen {

constexpr int kImageBos = vocab::kImageVocabSize;  // row 8 of token tables
constexpr int kLrSeqLen = 1 + vocab::kPromptLen + kLrCells;  // prefix+text+16
constexpr int kLrTokenRow0 = 1 + vocab::kPromptLen;          // first LR token row
constexpr int kEmbedInDim = kHrCells * vocab::kImageVocabSize;  // 512
constexpr int kEmbedDim = 64;   // image embedding width
constexpr int kProjHidden = 32;
constexpr int kPostHidden = 32;

struct ModelConfig {
  int d_model = 64;
  int n_layers = 2;
  int n_heads = 4;
  int d_ff = 128;
  int latent_dim = 8;
  std::uint64_t seed = 1;  // drives init and the frozen tables

  bool operator==(const ModelConfig&) const = default;
};

// Per-example natural-log likelihood, split by stage. The total is the sum
// of the two stage terms by construction.
struct LikelihoodReport {
  double log_p_lr = 0.0;
  double log_p_hr = 0.0;
  double log_p_total = 0.0;
};

enum class LatentMode {
  kOff,      // no latent: zero prefix row, unmodulated context
  kMean,     // c = mu from the posterior
  kSampled,  // c = mu + exp(log_var / 2) .* eps, eps supplied by caller
  kFixed,    // c supplied by caller
};

// HR position -> source LR position for the 2x nearest-neighbor upsample.
inline const std::vector<int>& hr_to_lr_map() {
  static const std::vector<int> map = [] {
    std::vector<int> m(kHrCells);
    for (int r = 0; r < kHrSide; ++r)
      for (int c = 0; c < kHrSide; ++c)
        m[r * kHrSide + c] = (r / 2) * kLrSide + (c / 2);
    return m;
  }();
  return map;
}

template <typename S>
struct ExampleGraph {
  Val<S> lr_logits;  // 16 x 8
  Val<S> hr_logits;  // 64 x 8
  Val<S> ar_loss;    // 1 x 1, mean cross-entropy over all 80 positions
  Val<S> mu, log_var, c, kl;  // valid only when the latent path is built
  Val<S> soft;       // 64 x 8 token probabilities (metric path)
  Val<S> emb;        // 1 x 64 image embedding (metric path)
  Val<S> z;          // 1 x 2 projected point (metric path)
};

template <typename S>
struct SampleResult {
  TokenGrid lr;
  TokenGrid hr;
};

template <typename S>
class Model {
 public:
  struct Ids {
    int text_table, image_embedder;
    int lr_tok, lr_pos, hr_tok, hr_pos;
    std::vector<BlockIds> lr_blocks, hr_blocks;
    int lr_lnf_g, lr_lnf_b, hr_lnf_g, hr_lnf_b;
    int lr_head_w, lr_head_b, hr_head_w, hr_head_b;
    int post_w1, post_b1, post_w2, post_b2;
    int prefix_w, prefix_b;
    int film_g_w, film_g_b, film_b_w, film_b_b;
    int proj_w1, proj_b1, proj_w2, proj_b2;
  };

  ModelConfig cfg;
  ParamStore<S> params;
  Ids ids;

  explicit Model(const ModelConfig& c) : cfg(c) {
    require(cfg.d_model % cfg.n_heads == 0,
            "d_model must be divisible by n_heads");
    register_params();
    init_params();
  }

  Bound<S> bind(Tape<S>& tape) const { return bind_params(tape, params); }

  // Frozen table lookup; bitwise-constant across training by construction.
  Mat<S> encode_text(const std::array<int, vocab::kPromptLen>& tokens) const {
    const Mat<S>& table = params.at(ids.text_table).value;
    Mat<S> out(vocab::kPromptLen, cfg.d_model);
    for (int k = 0; k < vocab::kPromptLen; ++k) {
      if (tokens[k] < 0 || tokens[k] >= vocab::kPromptVocabSize)
        throw VocabError("prompt token out of vocabulary at position " +
                         std::to_string(k) + ": " +
                         std::to_string(tokens[k]));
      out.row(k) = table.row(tokens[k]);
    }
    return out;
  }

  struct LatentGraph {
    Val<S> mu, log_var, c, kl;
  };

  // Posterior over the latent given the prompt: mean-pooled text rows through
  // a 2-layer MLP, split into mu and log-variance (clamped to [-10, 10]).
  LatentGraph build_posterior(
      Tape<S>& tape, const Bound<S>& p,
      const std::array<int, vocab::kPromptLen>& prompt) const {
    using namespace ops;
    const Mat<S> text = encode_text(prompt);
    Mat<S> pooled = text.colwise().mean();
    Val<S> pool = tape.constant(pooled);
    Val<S> h = tanh_op(affine_rows(pool, p[ids.post_w1], p[ids.post_b1]));
    Val<S> out = affine_rows(h, p[ids.post_w2], p[ids.post_b2]);
    LatentGraph g;
    g.mu = slice_cols(out, 0, cfg.latent_dim);
    g.log_var = clamp_op(slice_cols(out, cfg.latent_dim, cfg.latent_dim),
                         S(-10), S(10));
    g.kl = kl_from(tape, g.mu, g.log_var);
    return g;
  }

  // Closed-form KL(N(mu, diag(exp(log_var))) || N(0, I)).
  static Val<S> kl_from(Tape<S>& tape, Val<S> mu, Val<S> log_var) {
    using namespace ops;
    Val<S> term = sub(exp_op(log_var), add_const(log_var, S(1)));
    Val<S> quad = hadamard(mu, mu);
    return scale(add(sum_all(quad), sum_all(term)), S(0.5));
  }

  static Val<S> sample_latent(Tape<S>& tape, Val<S> mu, Val<S> log_var,
                              const Vec<S>& eps) {
    using namespace ops;
    require(eps.size() == mu.v().cols(), "latent noise dimension mismatch");
    Mat<S> eps_row = eps.transpose();
    Val<S> sigma = exp_op(scale(log_var, S(0.5)));
    return add(mu, hadamard(sigma, tape.constant(eps_row)));
  }

  // Builds the latent according to mode. Returned c is invalid for kOff.
  LatentGraph build_latent(Tape<S>& tape, const Bound<S>& p,
                           const std::array<int, vocab::kPromptLen>& prompt,
                           LatentMode mode, const Vec<S>* eps_or_c) const {
    LatentGraph g;
    switch (mode) {
      case LatentMode::kOff:
        return g;
      case LatentMode::kFixed: {
        require(eps_or_c != nullptr &&
                    eps_or_c->size() == cfg.latent_dim,
                "fixed latent requires an 8-dim c");
        Mat<S> row = eps_or_c->transpose();
        g.c = tape.constant(std::move(row));
        return g;
      }
      case LatentMode::kMean: {
        g = build_posterior(tape, p, prompt);
        g.c = g.mu;
        return g;
      }
      case LatentMode::kSampled: {
        require(eps_or_c != nullptr, "sampled latent requires noise");
        g = build_posterior(tape, p, prompt);
        g.c = sample_latent(tape, g.mu, g.log_var, *eps_or_c);
        return g;
      }
    }
    return g;
  }

  // LR stage over [prefix, text rows, token embeddings]; returns the final
  // post-norm hidden states for the whole sequence. `token_inputs` are the
  // teacher-forced (or decoded-so-far) input ids including the leading bos.
  Val<S> lr_stage(Tape<S>& tape, const Bound<S>& p, Val<S> prefix_row,
                  const std::array<int, vocab::kPromptLen>& prompt,
                  const std::vector<int>& token_inputs) const {
    using namespace ops;
    require(prefix_row.v().rows() == 1 &&
                prefix_row.v().cols() == cfg.d_model,
            "prefix must be one d_model row");
    Val<S> text = tape.constant(encode_text(prompt));
    Val<S> toks = gather_rows(p[ids.lr_tok], token_inputs);
    Val<S> seq = concat_rows<S>({prefix_row, text, toks});
    const Index len = seq.v().rows();
    seq = add(seq, slice_rows(p[ids.lr_pos], 0, len));
    for (const auto& blk : ids.lr_blocks)
      seq = causal_block(tape, p, blk, seq, cfg.n_heads);
    return layer_norm_rows(seq, p[ids.lr_lnf_g], p[ids.lr_lnf_b]);
  }

  // HR stage: token embeddings plus per-position context plus positions.
  // `context` must already be modulated if the latent path is active.
  Val<S> hr_stage(Tape<S>& tape, const Bound<S>& p, Val<S> context,
                  const std::vector<int>& token_inputs) const {
    using namespace ops;
    const Index len = static_cast<Index>(token_inputs.size());
    require(context.v().rows() >= len, "context shorter than HR sequence");
    Val<S> toks = gather_rows(p[ids.hr_tok], token_inputs);
    Val<S> ctx = context.v().rows() == len
                     ? context
                     : slice_rows(context, 0, len);
    Val<S> seq = add(add(toks, ctx), slice_rows(p[ids.hr_pos], 0, len));
    for (const auto& blk : ids.hr_blocks)
      seq = causal_block(tape, p, blk, seq, cfg.n_heads);
    return layer_norm_rows(seq, p[ids.hr_lnf_g], p[ids.hr_lnf_b]);
  }

  Val<S> upsampled_context(Tape<S>& tape, const Bound<S>& p,
                           Val<S> lr_hidden,
                           const LatentGraph& latent, bool modulate) const {
    using namespace ops;
    require(lr_hidden.v().rows() == kLrCells,
            "upsample expects 16 LR hidden rows");
    Val<S> ctx = replicate_rows(lr_hidden, hr_to_lr_map());
    if (modulate) {
      require(latent.c.valid(), "modulation requires a latent");
      Val<S> gamma = add_const(
          affine_rows(latent.c, p[ids.film_g_w], p[ids.film_g_b]), S(1));
      Val<S> beta = affine_rows(latent.c, p[ids.film_b_w], p[ids.film_b_b]);
      ctx = film_rows(ctx, gamma, beta);
    }
    return ctx;
  }

  Val<S> prefix_row(Tape<S>& tape, const Bound<S>& p,
                    const LatentGraph& latent, LatentMode mode) const {
    using namespace ops;
    if (mode == LatentMode::kOff)
      return tape.constant(Mat<S>::Zero(1, cfg.d_model));
    return affine_rows(latent.c, p[ids.prefix_w], p[ids.prefix_b]);
  }

  // Full teacher-forced example graph: AR loss, optional KL, optional metric
  // embedding path (token probabilities -> frozen embedder -> projection).
  ExampleGraph<S> build_example(Tape<S>& tape, const Bound<S>& p,
                                const PromptSpec& prompt,
                                const TokenGrid& lr, const TokenGrid& hr,
                                LatentMode mode, const Vec<S>* eps_or_c,
                                bool with_metric) const {
    using namespace ops;
    require(lr.cells.size() == kLrCells && hr.cells.size() == kHrCells,
            "teacher forcing expects full grids");

    ExampleGraph<S> g;
    LatentGraph latent = build_latent(tape, p, prompt.tokens, mode, eps_or_c);
    g.mu = latent.mu;
    g.log_var = latent.log_var;
    g.c = latent.c;
    g.kl = latent.kl;

    // LR: inputs shifted right with bos; logits read at the token rows.
    std::vector<int> lr_in(kLrCells);
    lr_in[0] = kImageBos;
    for (int i = 1; i < kLrCells; ++i) lr_in[i] = lr.cells[i - 1];
    Val<S> pre = prefix_row(tape, p, latent, mode);
    Val<S> lr_hidden = lr_stage(tape, p, pre, prompt.tokens, lr_in);
    Val<S> lr_tok_hidden = slice_rows(lr_hidden, kLrTokenRow0, kLrCells);
    g.lr_logits =
        affine_rows(lr_tok_hidden, p[ids.lr_head_w], p[ids.lr_head_b]);

    // HR conditioned on the upsampled LR hidden states.
    Val<S> ctx = upsampled_context(tape, p, lr_tok_hidden, latent,
                                   mode != LatentMode::kOff);
    std::vector<int> hr_in(kHrCells);
    hr_in[0] = kImageBos;
    for (int i = 1; i < kHrCells; ++i) hr_in[i] = hr.cells[i - 1];
    Val<S> hr_hidden = hr_stage(tape, p, ctx, hr_in);
    g.hr_logits =
        affine_rows(hr_hidden, p[ids.hr_head_w], p[ids.hr_head_b]);

    // Mean token cross-entropy over all 16 + 64 positions.
    Val<S> ce_lr = cross_entropy_mean(g.lr_logits, lr.cells);
    Val<S> ce_hr = cross_entropy_mean(g.hr_logits, hr.cells);
    g.ar_loss = scale(
        add(scale(ce_lr, S(kLrCells)), scale(ce_hr, S(kHrCells))),
        S(1) / S(kLrCells + kHrCells));

    if (with_metric) {
      g.soft = softmax_rows(g.hr_logits);
      Val<S> flat = reshape(g.soft, 1, kEmbedInDim);
      g.emb = matmul_nt(flat, p[ids.image_embedder], S(1));
      Val<S> h = tanh_op(affine_rows(g.emb, p[ids.proj_w1], p[ids.proj_b1]));
      g.z = affine_rows(h, p[ids.proj_w2], p[ids.proj_b2]);
    }
    return g;
  }

  // Teacher-forced stage log-likelihoods. log_p_total is log_p_lr +
  // log_p_hr by construction.
  LikelihoodReport log_likelihood(const PromptSpec& prompt,
                                  const TokenGrid& lr, const TokenGrid& hr,
                                  LatentMode mode,
                                  const Vec<S>* eps_or_c) const {
    using namespace ops;
    Tape<S> tape(false);
    Bound<S> p = bind(tape);
    LatentGraph latent =
        build_latent(tape, p, prompt.tokens, mode, eps_or_c);

    std::vector<int> lr_in(kLrCells);
    lr_in[0] = kImageBos;
    for (int i = 1; i < kLrCells; ++i) lr_in[i] = lr.cells[i - 1];
    Val<S> pre = prefix_row(tape, p, latent, mode);
    Val<S> lr_hidden = lr_stage(tape, p, pre, prompt.tokens, lr_in);
    Val<S> lr_tok_hidden = slice_rows(lr_hidden, kLrTokenRow0, kLrCells);
    Val<S> lr_logits =
        affine_rows(lr_tok_hidden, p[ids.lr_head_w], p[ids.lr_head_b]);

    Val<S> ctx = upsampled_context(tape, p, lr_tok_hidden, latent,
                                   mode != LatentMode::kOff);
    std::vector<int> hr_in(kHrCells);
    hr_in[0] = kImageBos;
    for (int i = 1; i < kHrCells; ++i) hr_in[i] = hr.cells[i - 1];
    Val<S> hr_hidden = hr_stage(tape, p, ctx, hr_in);
    Val<S> hr_logits =
        affine_rows(hr_hidden, p[ids.hr_head_w], p[ids.hr_head_b]);

    LikelihoodReport rep;
    rep.log_p_lr = static_cast<double>(
        tape.scalar(logprob_sum(lr_logits, lr.cells).id));
    rep.log_p_hr = static_cast<double>(
        tape.scalar(logprob_sum(hr_logits, hr.cells).id));
    rep.log_p_total = rep.log_p_lr + rep.log_p_hr;
    return rep;
  }

  // Ancestral decode: the LR grid is fully decoded before the HR stage.
  // Temperature 0 is argmax with lowest-id tie-break; positive temperatures
  // draw from softmax(logits / T) with the given seed.
  SampleResult<S> sample(const PromptSpec& prompt, LatentMode mode,
                         const Vec<S>* eps_or_c, S temperature,
                         std::uint64_t seed) const {
    if (temperature < S(0))
      throw ConfigError("temperature must be >= 0");
    Rng rng(mix_seed(seed, 0x73616d706cULL));
    Tape<S> tape(false);
    Bound<S> p = bind(tape);
    LatentGraph latent =
        build_latent(tape, p, prompt.tokens, mode, eps_or_c);
    Val<S> pre = prefix_row(tape, p, latent, mode);

    SampleResult<S> out;
    out.lr.res = Resolution::kLr;
    out.hr.res = Resolution::kHr;

    // LR decode
    std::vector<int> lr_in{kImageBos};
    for (int t = 0; t < kLrCells; ++t) {
      Val<S> hidden = lr_stage(tape, p, pre, prompt.tokens, lr_in);
      Val<S> last = ops::slice_rows(hidden, hidden.v().rows() - 1, 1);
      Val<S> logits =
          ops::affine_rows(last, p[ids.lr_head_w], p[ids.lr_head_b]);
      const int tok = draw_token(logits.v(), temperature, rng);
      out.lr.cells.push_back(tok);
      lr_in.push_back(tok);
    }
    lr_in.pop_back();  // inputs for the full teacher-forced LR pass

    // Context from the fully decoded LR grid.
    Val<S> lr_hidden = lr_stage(tape, p, pre, prompt.tokens, lr_in);
    Val<S> lr_tok_hidden =
        ops::slice_rows(lr_hidden, kLrTokenRow0, kLrCells);
    Val<S> ctx = upsampled_context(tape, p, lr_tok_hidden, latent,
                                   mode != LatentMode::kOff);

    // HR decode
    std::vector<int> hr_in{kImageBos};
    for (int t = 0; t < kHrCells; ++t) {
      Val<S> hidden = hr_stage(tape, p, ctx, hr_in);
      Val<S> last = ops::slice_rows(hidden, hidden.v().rows() - 1, 1);
      Val<S> logits =
          ops::affine_rows(last, p[ids.hr_head_w], p[ids.hr_head_b]);
      const int tok = draw_token(logits.v(), temperature, rng);
      out.hr.cells.push_back(tok);
      hr_in.push_back(tok);
    }
    return out;
  }

  // Mean latent of the posterior, computed off-tape; the deterministic
  // single-output decode conditions on this.
  Vec<S> mean_latent(const std::array<int, vocab::kPromptLen>& prompt) const {
    Tape<S> tape(false);
    Bound<S> p = bind(tape);
    LatentGraph g = build_posterior(tape, p, prompt);
    return g.mu.v().row(0).transpose();
  }

  struct PosteriorMoments {
    Vec<S> mu;
    Vec<S> sigma;
  };

  PosteriorMoments posterior_moments(
      const std::array<int, vocab::kPromptLen>& prompt) const {
    Tape<S> tape(false);
    Bound<S> p = bind(tape);
    LatentGraph g = build_posterior(tape, p, prompt);
    PosteriorMoments m;
    m.mu = g.mu.v().row(0).transpose();
    m.sigma = (g.log_var.v().row(0).array() * S(0.5)).exp().transpose();
    return m;
  }

 private:
  void register_params() {
    auto& st = params;
    ids.text_table = st.add("frozen.text_table", vocab::kPromptVocabSize,
                            cfg.d_model, /*frozen=*/true);
    ids.image_embedder =
        st.add("frozen.image_embedder", kEmbedDim, kEmbedInDim,
               /*frozen=*/true);

    ids.lr_tok = st.add("lr.tok_embed", vocab::kImageVocabSize + 1,
                        cfg.d_model);
    ids.lr_pos = st.add("lr.pos_embed", kLrSeqLen, cfg.d_model);
    for (int l = 0; l < cfg.n_layers; ++l)
      ids.lr_blocks.push_back(register_block(
          "lr.block" + std::to_string(l), cfg.d_model, cfg.d_ff, st));
    ids.lr_lnf_g = st.add("lr.final_ln.g", 1, cfg.d_model);
    ids.lr_lnf_b = st.add("lr.final_ln.b", 1, cfg.d_model);
    ids.lr_head_w = st.add("lr.head.w", cfg.d_model, vocab::kImageVocabSize);
    ids.lr_head_b = st.add("lr.head.b", 1, vocab::kImageVocabSize);

    ids.hr_tok = st.add("hr.tok_embed", vocab::kImageVocabSize + 1,
                        cfg.d_model);
    ids.hr_pos = st.add("hr.pos_embed", kHrCells, cfg.d_model);
    for (int l = 0; l < cfg.n_layers; ++l)
      ids.hr_blocks.push_back(register_block(
          "hr.block" + std::to_string(l), cfg.d_model, cfg.d_ff, st));
    ids.hr_lnf_g = st.add("hr.final_ln.g", 1, cfg.d_model);
    ids.hr_lnf_b = st.add("hr.final_ln.b", 1, cfg.d_model);
    ids.hr_head_w = st.add("hr.head.w", cfg.d_model, vocab::kImageVocabSize);
    ids.hr_head_b = st.add("hr.head.b", 1, vocab::kImageVocabSize);

    ids.post_w1 = st.add("latent.post.w1", cfg.d_model, kPostHidden);
    ids.post_b1 = st.add("latent.post.b1", 1, kPostHidden);
    ids.post_w2 = st.add("latent.post.w2", kPostHidden, 2 * cfg.latent_dim);
    ids.post_b2 = st.add("latent.post.b2", 1, 2 * cfg.latent_dim);
    ids.prefix_w = st.add("latent.prefix.w", cfg.latent_dim, cfg.d_model);
    ids.prefix_b = st.add("latent.prefix.b", 1, cfg.d_model);
    ids.film_g_w = st.add("latent.film_gamma.w", cfg.latent_dim, cfg.d_model);
    ids.film_g_b = st.add("latent.film_gamma.b", 1, cfg.d_model);
    ids.film_b_w = st.add("latent.film_beta.w", cfg.latent_dim, cfg.d_model);
    ids.film_b_b = st.add("latent.film_beta.b", 1, cfg.d_model);

    ids.proj_w1 = st.add("metric.proj.w1", kEmbedDim, kProjHidden);
    ids.proj_b1 = st.add("metric.proj.b1", 1, kProjHidden);
    ids.proj_w2 = st.add("metric.proj.w2", kProjHidden, 2);
    ids.proj_b2 = st.add("metric.proj.b2", 1, 2);
  }

  void init_params() {
    const std::uint64_t seed = cfg.seed;
    auto gauss = [&](int id, double std_dev) {
      auto& e = params.at(id);
      init_gaussian(e.value, seed, e.name, std_dev);
    };
    auto ones = [&](int id) { params.at(id).value.setOnes(); };

    gauss(ids.text_table, 1.0);  // unit-variance frozen text table
    gauss(ids.image_embedder, 1.0 / std::sqrt(double(kEmbedInDim)));

    const double emb_std = 0.08;
    gauss(ids.lr_tok, emb_std);
    gauss(ids.lr_pos, emb_std);
    gauss(ids.hr_tok, emb_std);
    gauss(ids.hr_pos, emb_std);

    auto init_block = [&](const BlockIds& b) {
      const double w_std = 1.0 / std::sqrt(double(cfg.d_model));
      gauss(b.wq, w_std);
      gauss(b.wk, w_std);
      gauss(b.wv, w_std);
      gauss(b.wo, w_std);
      gauss(b.w1, w_std);
      gauss(b.w2, 1.0 / std::sqrt(double(cfg.d_ff)));
      ones(b.ln1_g);
      ones(b.ln2_g);
      // biases and ln offsets stay zero
    };
    for (const auto& b : ids.lr_blocks) init_block(b);
    for (const auto& b : ids.hr_blocks) init_block(b);
    ones(ids.lr_lnf_g);
    ones(ids.hr_lnf_g);
    // heads stay zero: an untrained model emits uniform logits

    gauss(ids.post_w1, 1.0 / std::sqrt(double(cfg.d_model)));
    // post.w2 stays zero: mu = 0, log_var = 0 at init
    gauss(ids.prefix_w, emb_std);
    // film maps stay zero: identity modulation at init

    gauss(ids.proj_w1, 1.0 / std::sqrt(double(kEmbedDim)));
    gauss(ids.proj_w2, 1.0 / std::sqrt(double(kProjHidden)));
  }

  static int draw_token(const Mat<S>& logits_row, S temperature, Rng& rng) {
    require(logits_row.rows() == 1, "expected one logits row");
    const Index n = logits_row.cols();
    if (temperature == S(0)) {
      int best = 0;
      for (Index i = 1; i < n; ++i)
        if (logits_row(0, i) > logits_row(0, best))
          best = static_cast<int>(i);
      return best;
    }
    Eigen::Array<double, 1, Eigen::Dynamic> l =
        logits_row.row(0).template cast<double>().array() /
        static_cast<double>(temperature);
    const double m = l.maxCoeff();
    Eigen::Array<double, 1, Eigen::Dynamic> pr = (l - m).exp();
    pr /= pr.sum();
    const double u = rng.uniform();
    double cum = 0.0;
    for (Index i = 0; i < n; ++i) {
      cum += pr(i);
      if (u < cum) return static_cast<int>(i);
    }
    return static_cast<int>(n - 1);
  }
};

}  // namespace higen
