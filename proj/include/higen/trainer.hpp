// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0
//
// Composite objective L_total = L_AR + lambda1 * L_MAER + lambda2 * L_KL,
// decoupled-weight-decay adaptive-moment optimization, deterministic seeded
// batching, metrics logging, and the finite-difference gradient checker.

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "higen/config.hpp"
#include "higen/dataset.hpp"
#include "higen/metric.hpp"
#include "higen/model.hpp"

namespace higen {

// ---- batch loss graph ----

template <typename S>
struct BatchOptions {
  bool use_maer = true;
  bool use_ambiguity = true;
  double lambda1 = 0.05;
  double lambda2 = 1e-4;
  // Per-example latent noise; required when use_ambiguity is set.
  const std::vector<Vec<S>>* eps = nullptr;
  // Gradient checker hooks: freeze the stop-gradient quantities so central
  // differences probe the same function the analytic gradient differentiates.
  const Vec<S>* fixed_y = nullptr;
  std::optional<S> fixed_h;
};

template <typename S>
struct BatchGraph {
  Val<S> total;  // 1 x 1
  Val<S> ar;     // 1 x 1
  Val<S> maer;   // 1 x 1 (invalid when metric path disabled)
  Val<S> kl;     // 1 x 1 (invalid when latent disabled)
  Vec<S> y;      // metric targets (empty when disabled)
  S bandwidth = S(0);

  double ar_value(const Tape<S>& t) const { return t.scalar(ar.id); }
  double maer_value(const Tape<S>& t) const {
    return maer.valid() ? t.scalar(maer.id) : 0.0;
  }
  double kl_value(const Tape<S>& t) const {
    return kl.valid() ? t.scalar(kl.id) : 0.0;
  }
  double total_value(const Tape<S>& t) const { return t.scalar(total.id); }
};

// Builds the teacher-forced loss graph for a batch. Disabled components
// contribute no nodes at all, so their parameters receive exactly zero
// gradient.
template <typename S>
BatchGraph<S> build_batch_loss(const Model<S>& model, Tape<S>& tape,
                               const Bound<S>& p,
                               const std::vector<const Record*>& batch,
                               const BatchOptions<S>& opt) {
  using namespace ops;
  require(!batch.empty(), "empty batch");
  if (opt.use_maer)
    require(batch.size() >= 2,
            "metric regression needs a batch of at least 2");
  if (opt.use_ambiguity)
    require(opt.eps != nullptr && opt.eps->size() == batch.size(),
            "latent noise must match batch size");

  const LatentMode mode =
      opt.use_ambiguity ? LatentMode::kSampled : LatentMode::kOff;

  BatchGraph<S> g;
  std::vector<Val<S>> ar_terms, kl_terms, z_points;
  std::vector<Mat<S>> softs;
  std::vector<const PromptSpec*> prompts;
  ar_terms.reserve(batch.size());

  for (size_t i = 0; i < batch.size(); ++i) {
    const Record& rec = *batch[i];
    const Vec<S>* eps = opt.use_ambiguity ? &(*opt.eps)[i] : nullptr;
    ExampleGraph<S> ex = model.build_example(
        tape, p, rec.prompt, rec.lr, rec.hr, mode, eps, opt.use_maer);
    ar_terms.push_back(ex.ar_loss);
    if (opt.use_ambiguity) kl_terms.push_back(ex.kl);
    if (opt.use_maer) {
      z_points.push_back(ex.z);
      softs.push_back(ex.soft.v());
      prompts.push_back(&rec.prompt);
    }
  }

  const S inv_b = S(1) / static_cast<S>(batch.size());
  g.ar = scale(sum_all(concat_rows(ar_terms)), inv_b);
  g.total = g.ar;

  if (opt.use_maer) {
    g.y = opt.fixed_y ? *opt.fixed_y : score_targets(softs, prompts);
    MetricGraph<S> mg =
        metric_loss_graph(tape, z_points, g.y, opt.fixed_h);
    g.maer = mg.loss;
    g.bandwidth = mg.bandwidth;
    g.total = add(g.total, scale(g.maer, static_cast<S>(opt.lambda1)));
  }
  if (opt.use_ambiguity) {
    g.kl = scale(sum_all(concat_rows(kl_terms)), inv_b);
    g.total = add(g.total, scale(g.kl, static_cast<S>(opt.lambda2)));
  }
  return g;
}

// ---- optimizer ----

// Adam with decoupled weight decay; frozen entries are skipped entirely.
template <typename S>
class AdamW {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void init(const ParamStore<S>& store) {
    m_.assign(store.count(), Mat<S>());
    v_.assign(store.count(), Mat<S>());
    for (int i = 0; i < store.count(); ++i) {
      if (store.at(i).frozen) continue;
      m_[i] = Mat<S>::Zero(store.at(i).value.rows(), store.at(i).value.cols());
      v_[i] = Mat<S>::Zero(store.at(i).value.rows(), store.at(i).value.cols());
    }
    t_ = 0;
  }

  // `active` masks out parameters of disabled modules so ablation variants
  // leave them bitwise untouched; frozen entries are always skipped.
  void update(ParamStore<S>& store, const std::vector<Mat<S>>& grads,
              double lr, double weight_decay,
              const std::vector<char>* active = nullptr) {
    ++t_;
    const S c1 = static_cast<S>(1.0 - std::pow(beta1, t_));
    const S c2 = static_cast<S>(1.0 - std::pow(beta2, t_));
    const S b1 = static_cast<S>(beta1), b2 = static_cast<S>(beta2);
    const S e = static_cast<S>(eps), step = static_cast<S>(lr);
    const S wd = static_cast<S>(weight_decay);
    for (int i = 0; i < store.count(); ++i) {
      auto& entry = store.at(i);
      if (entry.frozen) continue;
      if (active && !(*active)[i]) continue;
      const Mat<S>& g = grads[i];
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * g.cwiseProduct(g);
      entry.value -=
          step * ((m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + e))
                     .matrix();
      if (wd != S(0)) entry.value -= step * wd * entry.value;
    }
  }

  long step_count() const { return t_; }
  void set_step_count(long t) { t_ = t; }
  Mat<S>& moment1(int i) { return m_[i]; }
  Mat<S>& moment2(int i) { return v_[i]; }
  const Mat<S>& moment1(int i) const { return m_[i]; }
  const Mat<S>& moment2(int i) const { return v_[i]; }

 private:
  std::vector<Mat<S>> m_, v_;
  long t_ = 0;
};

// ---- trainer ----

struct StepReport {
  long step = 0;
  double l_ar = 0, l_maer = 0, l_kl = 0, l_total = 0;
  double grad_norm = 0;
  double realized_kl = 0;
};

template <typename S>
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg)
      : cfg_(cfg),
        model_(cfg.model_config()),
        order_rng_(mix_seed(cfg.seed, name_hash("batch_order"))) {
    cfg_.validate();
    opt_.init(model_.params);
    // Parameters of disabled modules stay untouched so ablation rows differ
    // only through the flags.
    active_.assign(model_.params.count(), 1);
    for (int i = 0; i < model_.params.count(); ++i) {
      const std::string& name = model_.params.at(i).name;
      if (!cfg_.use_maer && name.starts_with("metric.")) active_[i] = 0;
      if (!cfg_.use_ambiguity && name.starts_with("latent.")) active_[i] = 0;
    }
  }

  const TrainConfig& config() const { return cfg_; }
  Model<S>& model() { return model_; }
  const Model<S>& model() const { return model_; }
  AdamW<S>& optimizer() { return opt_; }
  const AdamW<S>& optimizer() const { return opt_; }
  long step() const { return step_; }
  void set_step(long s) { step_ = s; }

  // One optimization step on an explicit batch.
  StepReport train_step(const std::vector<const Record*>& batch) {
    Tape<S> tape(true);
    Bound<S> p = model_.bind(tape);

    std::vector<Vec<S>> eps;
    BatchOptions<S> opt;
    opt.use_maer = cfg_.use_maer;
    opt.use_ambiguity = cfg_.use_ambiguity;
    opt.lambda1 = cfg_.lambda1;
    opt.lambda2 = cfg_.lambda2;
    if (cfg_.use_ambiguity) {
      eps = draw_eps(batch.size());
      opt.eps = &eps;
    }

    BatchGraph<S> g = build_batch_loss(model_, tape, p, batch, opt);

    StepReport rep;
    rep.step = step_ + 1;
    rep.l_ar = g.ar_value(tape);
    rep.l_maer = g.maer_value(tape);
    rep.l_kl = g.kl_value(tape);
    rep.l_total = g.total_value(tape);
    rep.realized_kl = rep.l_kl;
    check_finite(rep);

    tape.backward(g.total);

    std::vector<Mat<S>> grads(model_.params.count());
    double norm_sq = 0.0;
    for (int i = 0; i < model_.params.count(); ++i) {
      if (model_.params.at(i).frozen) continue;
      const auto& e = model_.params.at(i);
      if (tape.has_grad(p[i].id)) {
        grads[i] = tape.grad(p[i].id);
      } else {
        grads[i] = Mat<S>::Zero(e.value.rows(), e.value.cols());
      }
      norm_sq += static_cast<double>(grads[i].squaredNorm());
    }
    rep.grad_norm = std::sqrt(norm_sq);

    opt_.update(model_.params, grads, cfg_.learning_rate, cfg_.weight_decay,
                &active_);
    ++step_;
    return rep;
  }

  // Runs cfg.steps steps over seeded shuffled batches. The callback sees
  // the report for logged steps: the first step of each log interval.
  void train(const Dataset& data,
             const std::function<void(const StepReport&)>& on_log = {}) {
    require(!data.records.empty(), "empty dataset");
    std::vector<int> order;
    size_t cursor = 0;
    auto next_batch = [&] {
      std::vector<const Record*> batch;
      batch.reserve(cfg_.batch_size);
      while (static_cast<int>(batch.size()) < cfg_.batch_size) {
        if (cursor >= order.size()) {
          order.resize(data.records.size());
          for (size_t i = 0; i < order.size(); ++i)
            order[i] = static_cast<int>(i);
          order_rng_.shuffle(order.begin(), order.end());
          cursor = 0;
        }
        batch.push_back(&data.records[order[cursor++]]);
      }
      return batch;
    };

    for (int s = 0; s < cfg_.steps; ++s) {
      const StepReport rep = train_step(next_batch());
      if (on_log && (rep.step - 1) % cfg_.log_interval == 0) on_log(rep);
    }
  }

 private:
  // Noise is derived from (seed, step), not a running stream, so training
  // resumed from a checkpoint draws the same latents as an uninterrupted run.
  std::vector<Vec<S>> draw_eps(size_t n) {
    Rng rng(mix_seed(mix_seed(cfg_.seed, name_hash("latent_noise")),
                     static_cast<std::uint64_t>(step_)));
    std::vector<Vec<S>> eps(n);
    for (auto& e : eps) {
      e.resize(cfg_.latent_dim);
      for (int d = 0; d < cfg_.latent_dim; ++d)
        e(d) = static_cast<S>(rng.gaussian());
    }
    return eps;
  }

  void check_finite(const StepReport& rep) const {
    auto bad = [](double v) { return !std::isfinite(v); };
    if (bad(rep.l_ar))
      throw NumericError("non-finite L_AR at step " +
                         std::to_string(rep.step));
    if (bad(rep.l_maer))
      throw NumericError("non-finite L_MAER at step " +
                         std::to_string(rep.step));
    if (bad(rep.l_kl))
      throw NumericError("non-finite L_KL at step " +
                         std::to_string(rep.step));
    if (bad(rep.l_total))
      throw NumericError("non-finite L_total at step " +
                         std::to_string(rep.step));
  }

  TrainConfig cfg_;
  Model<S> model_;
  std::vector<char> active_;
  AdamW<S> opt_;
  Rng order_rng_;
  long step_ = 0;
};

// ---- gradient checker ----

struct GradCheckRow {
  std::string loss;
  std::string group;
  bool frozen = false;
  double max_rel_err = 0.0;
  double max_abs_diff = 0.0;
  double tolerance = 0.0;
  double noise_guard = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckRow> rows;
  double fd_step = 1e-5;
  bool all_pass = true;
};

// Central finite differences against the tape gradients on a tiny float64
// model. Batch targets y and the regression bandwidth are stop-gradients,
// so they are frozen at their base values for the probing forwards. The
// model is jittered away from the symmetric zero-head init first so the
// losses are locally smooth.
inline GradCheckReport grad_check(const TrainConfig& cfg, int batch_n,
                                  std::uint64_t data_seed,
                                  double tol = 1e-4, double tol_kl = 1e-6) {
  using S = double;
  TrainConfig tc = cfg;
  tc.validate();
  if (tc.d_model > 16)
    throw ConfigError("grad check expects a tiny config (d_model <= 16)");

  Model<S> model(tc.model_config());
  {
    Rng jit(mix_seed(tc.seed, name_hash("gradcheck_jitter")));
    for (int i = 0; i < model.params.count(); ++i) {
      auto& e = model.params.at(i);
      if (e.frozen) continue;
      for (Index r = 0; r < e.value.rows(); ++r)
        for (Index c = 0; c < e.value.cols(); ++c)
          e.value(r, c) += 0.02 * jit.gaussian();
    }
  }

  Dataset data = generate_dataset(batch_n, data_seed, 0.5);
  std::vector<const Record*> batch;
  for (const auto& r : data.records) batch.push_back(&r);

  std::vector<Vec<S>> eps(batch.size());
  {
    Rng erng(mix_seed(tc.seed, name_hash("gradcheck_eps")));
    for (auto& e : eps) {
      e.resize(tc.latent_dim);
      for (int d = 0; d < tc.latent_dim; ++d) e(d) = erng.gaussian();
    }
  }

  BatchOptions<S> base_opt;
  base_opt.use_maer = true;
  base_opt.use_ambiguity = true;
  base_opt.lambda1 = tc.lambda1;
  base_opt.lambda2 = tc.lambda2;
  base_opt.eps = &eps;

  // Base pass fixes the stop-gradient quantities.
  Vec<S> y_base;
  S h_base;
  {
    Tape<S> tape(false);
    Bound<S> p = model.bind(tape);
    BatchGraph<S> g = build_batch_loss(model, tape, p, batch, base_opt);
    y_base = g.y;
    h_base = g.bandwidth;
  }
  BatchOptions<S> opt = base_opt;
  opt.fixed_y = &y_base;
  opt.fixed_h = h_base;

  struct Quad {
    double ar, maer, kl, total;
  };
  auto eval_losses = [&]() -> Quad {
    Tape<S> tape(false);
    Bound<S> p = model.bind(tape);
    BatchGraph<S> g = build_batch_loss(model, tape, p, batch, opt);
    return {g.ar_value(tape), g.maer_value(tape), g.kl_value(tape),
            g.total_value(tape)};
  };

  // Analytic gradients, one backward per loss component.
  const char* loss_names[4] = {"L_AR", "L_MAER", "L_KL", "L_total"};
  std::vector<std::vector<Mat<S>>> analytic(4);
  for (int li = 0; li < 4; ++li) {
    Tape<S> tape(true);
    Bound<S> p = model.bind(tape);
    BatchGraph<S> g = build_batch_loss(model, tape, p, batch, opt);
    Val<S> root = li == 0 ? g.ar
                : li == 1 ? g.maer
                : li == 2 ? g.kl
                          : g.total;
    tape.backward(root);
    analytic[li].resize(model.params.count());
    for (int i = 0; i < model.params.count(); ++i) {
      const auto& e = model.params.at(i);
      analytic[li][i] = tape.has_grad(p[i].id)
                            ? tape.grad(p[i].id)
                            : Mat<S>::Zero(e.value.rows(), e.value.cols());
    }
  }

  GradCheckReport report;
  const double delta = report.fd_step;

  // Central differences bottom out at eps * |L| / (2 delta); analytic-vs-FD
  // gaps below a small multiple of that floor are measurement noise, not
  // gradient defects, so they do not count against the relative tolerance.
  const Quad base = eval_losses();
  const double base_vals[4] = {base.ar, base.maer, base.kl, base.total};
  double guard[4];
  for (int li = 0; li < 4; ++li)
    guard[li] = 64.0 * std::numeric_limits<double>::epsilon() *
                std::max(1.0, std::abs(base_vals[li])) / (2 * delta);

  std::vector<std::vector<double>> max_err(
      4, std::vector<double>(model.params.count(), 0.0));
  std::vector<std::vector<double>> max_abs(
      4, std::vector<double>(model.params.count(), 0.0));

  for (int i = 0; i < model.params.count(); ++i) {
    auto& e = model.params.at(i);
    if (e.frozen) continue;
    for (Index r = 0; r < e.value.rows(); ++r) {
      for (Index c = 0; c < e.value.cols(); ++c) {
        const S saved = e.value(r, c);
        e.value(r, c) = saved + delta;
        const Quad up = eval_losses();
        e.value(r, c) = saved - delta;
        const Quad dn = eval_losses();
        e.value(r, c) = saved;
        const double fd[4] = {(up.ar - dn.ar) / (2 * delta),
                              (up.maer - dn.maer) / (2 * delta),
                              (up.kl - dn.kl) / (2 * delta),
                              (up.total - dn.total) / (2 * delta)};
        for (int li = 0; li < 4; ++li) {
          const double a = analytic[li][i](r, c);
          const double diff = std::abs(a - fd[li]);
          max_abs[li][i] = std::max(max_abs[li][i], diff);
          if (diff <= guard[li]) continue;
          const double denom =
              std::max({std::abs(a), std::abs(fd[li]), 1e-8});
          max_err[li][i] = std::max(max_err[li][i], diff / denom);
        }
      }
    }
  }

  for (int li = 0; li < 4; ++li) {
    const double tolerance = li == 2 ? tol_kl : tol;
    for (int i = 0; i < model.params.count(); ++i) {
      const auto& e = model.params.at(i);
      GradCheckRow row;
      row.loss = loss_names[li];
      row.group = e.name;
      row.frozen = e.frozen;
      row.tolerance = tolerance;
      row.noise_guard = guard[li];
      row.max_rel_err = e.frozen ? 0.0 : max_err[li][i];
      row.max_abs_diff = e.frozen ? 0.0 : max_abs[li][i];
      row.pass = row.max_rel_err <= tolerance;
      report.all_pass = report.all_pass && row.pass;
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace higen
