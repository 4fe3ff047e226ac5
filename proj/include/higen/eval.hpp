// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0
//
// Evaluation harness: oracle alignment of decoded grids, interpretation
// clustering for the ambiguity benchmark, diversity aggregates, and the
// four-variant ablation grid. All evaluation is deterministic given
// (checkpoint, data, seed, K); items are independent, so cells of the
// ablation grid may run on worker threads without changing any result.

#pragma once

#include <atomic>
#include <cmath>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "higen/checkpoint.hpp"
#include "higen/dataset.hpp"
#include "higen/metric.hpp"
#include "higen/model.hpp"
#include "higen/trainer.hpp"

namespace higen {

inline constexpr double kClusterTau = 0.8;

// Interpretation label for a generated grid: the best-matching
// interpretation index if its match fraction reaches tau, else -1
// ("implausible"). Ties break toward the first (lowest color id, pattern)
// interpretation in the prompt's sorted list.
inline int assign_cluster(const TokenGrid& hr, const PromptSpec& prompt,
                          double tau = kClusterTau) {
  int best = -1;
  double best_frac = -1.0;
  for (size_t i = 0; i < prompt.interpretations.size(); ++i) {
    const double f = match_fraction(hr, prompt.interpretations[i]);
    if (f > best_frac) {
      best_frac = f;
      best = static_cast<int>(i);
    }
  }
  return best_frac >= tau ? best : -1;
}

// ---- alignment ----

struct AlignmentResult {
  double mean_score = 0.0;
  double mean_nll = 0.0;
  std::vector<double> scores;  // per record
  std::vector<double> nll;     // per record, -log p_total
};

template <typename S>
AlignmentResult eval_alignment(const Model<S>& model, bool use_ambiguity,
                               const Dataset& data, S temperature,
                               std::uint64_t seed, bool with_nll = false) {
  AlignmentResult out;
  out.scores.reserve(data.records.size());
  const LatentMode mode =
      use_ambiguity ? LatentMode::kMean : LatentMode::kOff;
  for (size_t i = 0; i < data.records.size(); ++i) {
    const Record& rec = data.records[i];
    const auto s = model.sample(rec.prompt, mode, nullptr, temperature,
                                mix_seed(seed, i));
    out.scores.push_back(oracle_score(s.hr, rec.prompt));
    if (with_nll) {
      const LikelihoodReport rep =
          model.log_likelihood(rec.prompt, rec.lr, rec.hr, mode, nullptr);
      out.nll.push_back(-rep.log_p_total);
    }
  }
  double sum = 0.0;
  for (double v : out.scores) sum += v;
  out.mean_score = out.scores.empty() ? 0.0 : sum / out.scores.size();
  if (with_nll) {
    double nsum = 0.0;
    for (double v : out.nll) nsum += v;
    out.mean_nll = out.nll.empty() ? 0.0 : nsum / out.nll.size();
  }
  return out;
}

// Monte-Carlo chance level: mean oracle score of uniformly random grids
// against the dataset's prompts. Reference point for untrained models.
inline double chance_alignment(const Dataset& data, int n_samples,
                               std::uint64_t seed) {
  Rng rng(mix_seed(seed, name_hash("chance")));
  double sum = 0.0;
  for (int s = 0; s < n_samples; ++s) {
    const Record& rec = data.records[rng.below(data.records.size())];
    TokenGrid g;
    g.res = Resolution::kHr;
    g.cells.resize(kHrCells);
    for (int i = 0; i < kHrCells; ++i)
      g.cells[i] = static_cast<int>(rng.below(vocab::kImageVocabSize));
    sum += oracle_score(g, rec.prompt);
  }
  return sum / n_samples;
}

// ---- diversity ----

struct PromptDiversity {
  std::vector<int> labels;        // K cluster labels (-1 = implausible)
  std::vector<double> plausibility;  // K oracle scores
  int distinct = 0;               // distinct buckets incl. implausible
  double coverage = 0.0;          // distinct valid labels / interpretations
  int mean_mode_label = -1;
  double mean_mode_plausibility = 0.0;
};

struct DiversityReport {
  int k = 5;
  double tau = kClusterTau;
  double mean_distinct = 0.0;
  double mean_coverage = 0.0;
  double mean_plausibility = 0.0;
  double frac_multi_cluster = 0.0;  // prompts with >= 2 distinct buckets
  double mean_mode_mean_distinct = 1.0;
  double mean_mode_plausibility = 0.0;
  std::vector<PromptDiversity> per_prompt;
};

// Draws K latents from the prompt posterior (seeded), decodes each at
// temperature 0, and clusters the decodes. Without the ambiguity module the
// decode is deterministic, so one decode stands for all K samples. The
// deterministic mean-mode decode is always evaluated alongside.
template <typename S>
DiversityReport eval_diversity(const Model<S>& model, bool use_ambiguity,
                               const Dataset& bench, int k,
                               std::uint64_t seed, double tau = kClusterTau) {
  require(k >= 1, "diversity needs k >= 1");
  DiversityReport rep;
  rep.k = k;
  rep.tau = tau;
  rep.per_prompt.reserve(bench.records.size());

  for (size_t i = 0; i < bench.records.size(); ++i) {
    const PromptSpec& prompt = bench.records[i].prompt;
    PromptDiversity pd;

    if (use_ambiguity) {
      const auto moments = model.posterior_moments(prompt.tokens);
      for (int s = 0; s < k; ++s) {
        Rng erng(mix_seed(seed, i * static_cast<std::uint64_t>(k) + s));
        Vec<S> c(model.cfg.latent_dim);
        for (int d = 0; d < model.cfg.latent_dim; ++d)
          c(d) = moments.mu(d) +
                 moments.sigma(d) * static_cast<S>(erng.gaussian());
        const auto out =
            model.sample(prompt, LatentMode::kFixed, &c, S(0), 0);
        pd.labels.push_back(assign_cluster(out.hr, prompt, tau));
        pd.plausibility.push_back(oracle_score(out.hr, prompt));
      }
    } else {
      // c is fixed at zero: the temperature-0 decode is one deterministic
      // grid, replicated over the K slots.
      const auto out =
          model.sample(prompt, LatentMode::kOff, nullptr, S(0), 0);
      const int label = assign_cluster(out.hr, prompt, tau);
      const double plaus = oracle_score(out.hr, prompt);
      pd.labels.assign(k, label);
      pd.plausibility.assign(k, plaus);
    }

    const auto mm = model.sample(
        prompt, use_ambiguity ? LatentMode::kMean : LatentMode::kOff,
        nullptr, S(0), 0);
    pd.mean_mode_label = assign_cluster(mm.hr, prompt, tau);
    pd.mean_mode_plausibility = oracle_score(mm.hr, prompt);

    std::set<int> buckets(pd.labels.begin(), pd.labels.end());
    pd.distinct = static_cast<int>(buckets.size());
    buckets.erase(-1);
    pd.coverage = static_cast<double>(buckets.size()) /
                  static_cast<double>(prompt.interpretations.size());
    rep.per_prompt.push_back(std::move(pd));
  }

  const double n = static_cast<double>(rep.per_prompt.size());
  for (const auto& pd : rep.per_prompt) {
    rep.mean_distinct += pd.distinct / n;
    rep.mean_coverage += pd.coverage / n;
    for (double p : pd.plausibility)
      rep.mean_plausibility += p / (n * rep.k);
    if (pd.distinct >= 2) rep.frac_multi_cluster += 1.0 / n;
    rep.mean_mode_plausibility += pd.mean_mode_plausibility / n;
  }
  return rep;
}

// ---- ablation ----

struct AblationCell {
  std::string variant;
  bool use_maer = false;
  bool use_ambiguity = false;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double alignment = 0.0;
  double nll = 0.0;
  double mean_distinct = 0.0;
  double mean_coverage = 0.0;
  double plausibility = 0.0;
  double frac_multi_cluster = 0.0;
  double final_l_ar = 0.0;
  double final_kl = 0.0;
};

struct AblationRowSummary {
  std::string variant;
  bool use_maer = false;
  bool use_ambiguity = false;
  int seed_count = 0;
  double alignment_mean = 0.0, alignment_std = 0.0;
  double nll_mean = 0.0, nll_std = 0.0;
  double distinct_mean = 0.0, distinct_std = 0.0;
  double coverage_mean = 0.0;
  double plausibility_mean = 0.0;
  std::vector<AblationCell> cells;
};

struct AblationResult {
  TrainConfig base_config;
  int k = 5;
  double tau = kClusterTau;
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRowSummary> rows;  // baseline, +MAER, +ambiguity, full
};

struct AblationVariant {
  const char* name;
  bool use_maer;
  bool use_ambiguity;
};

inline const std::array<AblationVariant, 4>& ablation_variants() {
  static const std::array<AblationVariant, 4> v = {{
      {"baseline", false, false},
      {"+MAER", true, false},
      {"+ambiguity", false, true},
      {"full", true, true},
  }};
  return v;
}

// Trains every (variant, seed) cell from bit-identical per-seed inits
// (the variant flags do not enter parameter initialization) and evaluates
// alignment on the held-out set and diversity on the benchmark. Cells are
// independent; `threads` > 1 distributes them without affecting results.
inline AblationResult run_ablation(const TrainConfig& base,
                                   const Dataset& train_data,
                                   const Dataset& holdout,
                                   const Dataset& bench,
                                   const std::vector<std::uint64_t>& seeds,
                                   int k = 5, double tau = kClusterTau,
                                   int threads = 1) {
  require(!seeds.empty(), "ablation needs at least one seed");
  AblationResult result;
  result.base_config = base;
  result.k = k;
  result.tau = tau;
  result.seeds = seeds;

  const auto& variants = ablation_variants();
  const int n_cells = static_cast<int>(variants.size() * seeds.size());
  std::vector<AblationCell> cells(n_cells);

  auto run_cell = [&](int idx) {
    const int vi = idx / static_cast<int>(seeds.size());
    const int si = idx % static_cast<int>(seeds.size());
    AblationCell& cell = cells[idx];
    cell.variant = variants[vi].name;
    cell.use_maer = variants[vi].use_maer;
    cell.use_ambiguity = variants[vi].use_ambiguity;
    cell.seed = seeds[si];
    try {
      TrainConfig cfg = base;
      cfg.seed = seeds[si];
      cfg.use_maer = cell.use_maer;
      cfg.use_ambiguity = cell.use_ambiguity;
      Trainer<float> trainer(cfg);
      StepReport last;
      trainer.train(train_data,
                    [&last](const StepReport& r) { last = r; });
      cell.final_l_ar = last.l_ar;
      cell.final_kl = last.realized_kl;

      const auto align =
          eval_alignment(trainer.model(), cfg.use_ambiguity, holdout,
                         0.0f, cfg.seed, /*with_nll=*/true);
      cell.alignment = align.mean_score;
      cell.nll = align.mean_nll;

      const auto div = eval_diversity(trainer.model(), cfg.use_ambiguity,
                                      bench, k, cfg.seed, tau);
      cell.mean_distinct = div.mean_distinct;
      cell.mean_coverage = div.mean_coverage;
      cell.plausibility = div.mean_plausibility;
      cell.frac_multi_cluster = div.frac_multi_cluster;
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  };

  if (threads <= 1) {
    for (int i = 0; i < n_cells; ++i) run_cell(i);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    const int n_workers = std::min(threads, n_cells);
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
      pool.emplace_back([&] {
        for (int i = next.fetch_add(1); i < n_cells;
             i = next.fetch_add(1))
          run_cell(i);
      });
    for (auto& t : pool) t.join();
  }

  for (size_t vi = 0; vi < variants.size(); ++vi) {
    AblationRowSummary row;
    row.variant = variants[vi].name;
    row.use_maer = variants[vi].use_maer;
    row.use_ambiguity = variants[vi].use_ambiguity;
    std::vector<double> aligns, nlls, distincts;
    for (size_t si = 0; si < seeds.size(); ++si) {
      const AblationCell& cell = cells[vi * seeds.size() + si];
      row.cells.push_back(cell);
      if (cell.failed) continue;
      ++row.seed_count;
      aligns.push_back(cell.alignment);
      nlls.push_back(cell.nll);
      distincts.push_back(cell.mean_distinct);
      row.coverage_mean += cell.mean_coverage;
      row.plausibility_mean += cell.plausibility;
    }
    auto mean_std = [](const std::vector<double>& v, double& m, double& s) {
      if (v.empty()) return;
      m = 0.0;
      for (double x : v) m += x;
      m /= v.size();
      s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      s = v.size() > 1 ? std::sqrt(s / (v.size() - 1)) : 0.0;
    };
    mean_std(aligns, row.alignment_mean, row.alignment_std);
    mean_std(nlls, row.nll_mean, row.nll_std);
    mean_std(distincts, row.distinct_mean, row.distinct_std);
    if (row.seed_count > 0) {
      row.coverage_mean /= row.seed_count;
      row.plausibility_mean /= row.seed_count;
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

// ---- metric-space snapshot for the z-scatter report ----

struct MetricSnapshot {
  Matd z;      // N x 2
  Vecd y;      // N oracle scores
  Vecd y_hat;  // leave-one-out regression estimates
  double bandwidth = 0.0;
};

// Embeds each record's generated grid (one-hot token probabilities) through
// the frozen embedder and the trained projection head.
template <typename S>
MetricSnapshot metric_snapshot(const Model<S>& model, bool use_ambiguity,
                               const Dataset& data, std::uint64_t seed) {
  const Index n = static_cast<Index>(data.records.size());
  require(n >= 2, "metric snapshot needs at least 2 records");
  MetricSnapshot snap;
  snap.z.resize(n, 2);
  snap.y.resize(n);
  const LatentMode mode =
      use_ambiguity ? LatentMode::kMean : LatentMode::kOff;

  const Mat<S>& F = model.params.at(model.ids.image_embedder).value;
  const Mat<S>& w1 = model.params.at(model.ids.proj_w1).value;
  const Mat<S>& b1 = model.params.at(model.ids.proj_b1).value;
  const Mat<S>& w2 = model.params.at(model.ids.proj_w2).value;
  const Mat<S>& b2 = model.params.at(model.ids.proj_b2).value;

  for (Index i = 0; i < n; ++i) {
    const Record& rec = data.records[i];
    const auto out = model.sample(rec.prompt, mode, nullptr, S(0),
                                  mix_seed(seed, i));
    Mat<S> onehot = Mat<S>::Zero(kHrCells, vocab::kImageVocabSize);
    for (int p = 0; p < kHrCells; ++p) onehot(p, out.hr.cells[p]) = S(1);
    Eigen::Map<const Mat<S>> flat(onehot.data(), 1, kEmbedInDim);
    Mat<S> e = flat * F.transpose();
    Mat<S> h = ((e * w1).rowwise() + b1.row(0)).array().tanh().matrix();
    Mat<S> z = (h * w2).rowwise() + b2.row(0);
    snap.z(i, 0) = static_cast<double>(z(0, 0));
    snap.z(i, 1) = static_cast<double>(z(0, 1));
    snap.y(i) = oracle_score(out.hr, rec.prompt);
  }
  snap.bandwidth = adaptive_bandwidth(snap.z);
  const auto reg = kernel_regress(snap.z, snap.y, snap.bandwidth);
  snap.y_hat = reg.y_hat;
  return snap;
}

}  // namespace higen
