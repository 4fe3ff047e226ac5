// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0
//
// higen CLI: dataset synthesis, training, sampling, evaluation, the
// four-variant ablation grid, and the finite-difference gradient checker.
// Exit codes: 0 success, 1 validation/usage error, 2 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "higen/checkpoint.hpp"
#include "higen/config.hpp"
#include "higen/dataset.hpp"
#include "higen/eval.hpp"
#include "higen/report.hpp"
#include "higen/trainer.hpp"

namespace {

using namespace higen;

TrainConfig config_or_default(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  return load_train_config(path);
}

PromptSpec prompt_from_words(const std::string& word,
                             const std::string& pattern) {
  const auto& names = vocab::prompt_word_names();
  int word_id = -1;
  for (int i = 0; i < vocab::kPromptVocabSize; ++i)
    if (names[i] == word) word_id = i;
  if (word_id < 0 || (!vocab::is_color_word(word_id) &&
                      !vocab::is_class_word(word_id)))
    throw ConfigError("unknown color or class word: " + word);
  return make_prompt(word_id, vocab::pattern_from_name(pattern));
}

nlohmann::json grid_json(const TokenGrid& g) {
  return nlohmann::json(g.cells);
}

int run(int argc, char** argv) {
  CLI::App app{
      "higen: two-stage autoregressive token-grid generator with "
      "metric-space regularization and an ambiguity latent"};
  app.require_subcommand(1);

  // ---- synth ----
  auto* synth = app.add_subcommand(
      "synth", "Generate a synthetic prompt/grid dataset");
  int synth_n = 1000;
  std::uint64_t synth_seed = 1;
  double synth_frac = 0.5;
  std::string synth_out = "dataset.jsonl";
  std::string synth_config;
  synth->add_option("--n", synth_n, "record count");
  synth->add_option("--seed", synth_seed, "generation seed");
  synth->add_option("--ambiguous-fraction", synth_frac,
                    "fraction of ambiguous prompts");
  synth->add_option("--out", synth_out, "output path");
  synth->add_option("--config", synth_config, "unused; accepted for "
                    "uniformity");

  // ---- bench ----
  auto* bench = app.add_subcommand(
      "bench", "Generate the ambiguous-prompt benchmark");
  int bench_n = 200;
  std::uint64_t bench_seed = 1;
  std::string bench_out = "benchmark.jsonl";
  std::string bench_config;
  bench->add_option("--n", bench_n, "prompt count (default 200)");
  bench->add_option("--seed", bench_seed, "generation seed");
  bench->add_option("--out", bench_out, "output path");
  bench->add_option("--config", bench_config, "unused; accepted for "
                    "uniformity");

  // ---- train ----
  auto* train = app.add_subcommand("train", "Train a model");
  std::string train_config, train_data, train_out = "model.ckpt";
  std::string train_log;
  std::optional<std::uint64_t> train_seed;
  std::optional<int> train_steps;
  train->add_option("--config", train_config, "train config JSON");
  train->add_option("--data", train_data, "training dataset")->required();
  train->add_option("--out", train_out, "checkpoint output path");
  train->add_option("--log", train_log, "metrics log path (JSON lines)");
  train->add_option("--seed", train_seed, "override config seed");
  train->add_option("--steps", train_steps, "override config steps");

  // ---- sample ----
  auto* sample = app.add_subcommand("sample", "Decode grids for a prompt");
  std::string sample_ckpt, sample_word = "warm", sample_pattern = "stripes";
  std::string sample_out, sample_mode = "mean", sample_config;
  double sample_temp = 0.0;
  std::uint64_t sample_seed = 1;
  sample->add_option("--ckpt", sample_ckpt, "checkpoint")->required();
  sample->add_option("--word", sample_word, "color or class word");
  sample->add_option("--pattern", sample_pattern,
                     "pattern word (solid|stripes|checker)");
  sample->add_option("--mode", sample_mode, "latent mode: mean|sampled");
  sample->add_option("--temperature", sample_temp, "sampling temperature");
  sample->add_option("--seed", sample_seed, "sampling seed");
  sample->add_option("--out", sample_out, "write grids as JSON here");
  sample->add_option("--config", sample_config, "unused; accepted for "
                     "uniformity");

  // ---- eval-align ----
  auto* align = app.add_subcommand(
      "eval-align", "Oracle alignment of mean-mode decodes");
  std::string align_ckpt, align_data, align_out, align_scatter;
  std::string align_config;
  double align_temp = 0.0;
  std::uint64_t align_seed = 1;
  bool align_nll = false;
  align->add_option("--ckpt", align_ckpt, "checkpoint")->required();
  align->add_option("--data", align_data, "evaluation dataset")->required();
  align->add_option("--temperature", align_temp, "decode temperature");
  align->add_option("--seed", align_seed, "evaluation seed");
  align->add_option("--out", align_out, "JSON report path");
  align->add_option("--scatter", align_scatter,
                    "write the 2-D metric-embedding scatter (SVG)");
  align->add_flag("--nll", align_nll, "also report teacher-forced NLL");
  align->add_option("--config", align_config, "unused; accepted for "
                    "uniformity");

  // ---- eval-diversity ----
  auto* div = app.add_subcommand(
      "eval-diversity", "Diversity/plausibility on the ambiguous benchmark");
  std::string div_ckpt, div_bench, div_out, div_config;
  int div_k = 5;
  double div_tau = kClusterTau;
  std::uint64_t div_seed = 1;
  div->add_option("--ckpt", div_ckpt, "checkpoint")->required();
  div->add_option("--bench", div_bench, "benchmark dataset")->required();
  div->add_option("--k", div_k, "samples per prompt");
  div->add_option("--tau", div_tau, "plausibility threshold");
  div->add_option("--seed", div_seed, "latent sampling seed");
  div->add_option("--out", div_out, "JSON report path");
  div->add_option("--config", div_config, "unused; accepted for uniformity");

  // ---- ablate ----
  auto* ablate = app.add_subcommand(
      "ablate", "Train and evaluate the four variant-flag combinations");
  std::string ab_config, ab_data, ab_holdout, ab_bench, ab_out = "ablation";
  int ab_seeds = 5, ab_k = 5, ab_threads = 1;
  std::uint64_t ab_seed = 1;
  double ab_tau = kClusterTau;
  ablate->add_option("--config", ab_config, "base train config JSON");
  ablate->add_option("--data", ab_data, "training dataset")->required();
  ablate->add_option("--holdout", ab_holdout, "held-out evaluation dataset")
      ->required();
  ablate->add_option("--bench", ab_bench, "ambiguous benchmark")->required();
  ablate->add_option("--seeds", ab_seeds, "number of seeds");
  ablate->add_option("--seed", ab_seed, "first seed value");
  ablate->add_option("--k", ab_k, "diversity samples per prompt");
  ablate->add_option("--tau", ab_tau, "plausibility threshold");
  ablate->add_option("--threads", ab_threads, "worker threads over cells");
  ablate->add_option("--out", ab_out,
                     "output prefix (writes <out>.json and <out>.csv)");

  // ---- gradcheck ----
  auto* gc = app.add_subcommand(
      "gradcheck", "Finite-difference check of every parameter group");
  std::string gc_config, gc_out;
  int gc_batch = 4;
  std::uint64_t gc_seed = 7;
  double gc_tol = 1e-4, gc_tol_kl = 1e-6;
  gc->add_option("--config", gc_config, "tiny train config JSON");
  gc->add_option("--batch", gc_batch, "probe batch size");
  gc->add_option("--seed", gc_seed, "probe data seed");
  gc->add_option("--tol", gc_tol, "relative error tolerance");
  gc->add_option("--tol-kl", gc_tol_kl, "tolerance for the KL closed form");
  gc->add_option("--out", gc_out, "JSON report path");

  CLI11_PARSE(app, argc, argv);

  if (*synth) {
    if (synth_n < 1) throw ConfigError("--n must be >= 1");
    write_dataset(generate_dataset(synth_n, synth_seed, synth_frac),
                  synth_out);
    std::cout << "wrote " << synth_n << " records to " << synth_out << "\n";
  } else if (*bench) {
    if (bench_n < 1) throw ConfigError("--n must be >= 1");
    write_dataset(generate_ambiguous_benchmark(bench_n, bench_seed),
                  bench_out);
    std::cout << "wrote " << bench_n << " benchmark prompts to " << bench_out
              << "\n";
  } else if (*train) {
    TrainConfig cfg = config_or_default(train_config);
    if (train_seed) cfg.seed = *train_seed;
    if (train_steps) cfg.steps = *train_steps;
    cfg.validate();
    const Dataset data = load_dataset(train_data);
    Trainer<float> trainer(cfg);
    std::ofstream log;
    if (!train_log.empty()) {
      log.open(train_log, std::ios::binary);
      if (!log) throw IoError("cannot open metrics log: " + train_log);
    }
    trainer.train(data, [&](const StepReport& rep) {
      const std::string line = metrics_line(rep);
      if (log.is_open()) log << line << "\n";
      std::cout << line << "\n";
    });
    save_checkpoint(make_checkpoint(trainer), train_out);
    std::cout << "saved checkpoint to " << train_out << "\n";
  } else if (*sample) {
    const Checkpoint ck = load_checkpoint(sample_ckpt);
    Model<float> model = model_from_checkpoint<float>(ck);
    const PromptSpec prompt =
        prompt_from_words(sample_word, sample_pattern);
    LatentMode mode;
    Vec<float> eps;
    const Vec<float>* eps_ptr = nullptr;
    if (!ck.config.use_ambiguity) {
      mode = LatentMode::kOff;
    } else if (sample_mode == "mean") {
      mode = LatentMode::kMean;
    } else if (sample_mode == "sampled") {
      mode = LatentMode::kSampled;
      Rng rng(mix_seed(sample_seed, name_hash("cli_sample")));
      eps.resize(model.cfg.latent_dim);
      for (int d = 0; d < model.cfg.latent_dim; ++d)
        eps(d) = static_cast<float>(rng.gaussian());
      eps_ptr = &eps;
    } else {
      throw ConfigError("--mode must be mean or sampled");
    }
    const auto out = model.sample(prompt, mode, eps_ptr,
                                  static_cast<float>(sample_temp),
                                  sample_seed);
    nlohmann::json j{{"prompt", prompt.tokens},
                     {"word", sample_word},
                     {"pattern", sample_pattern},
                     {"lr", grid_json(out.lr)},
                     {"hr", grid_json(out.hr)},
                     {"oracle_score", oracle_score(out.hr, prompt)}};
    if (!sample_out.empty()) {
      std::ofstream f(sample_out, std::ios::binary);
      if (!f) throw IoError("cannot open for writing: " + sample_out);
      f << j.dump(2) << "\n";
    }
    std::cout << j.dump(2) << "\n";
  } else if (*align) {
    const Checkpoint ck = load_checkpoint(align_ckpt);
    Model<float> model = model_from_checkpoint<float>(ck);
    const Dataset data = load_dataset(align_data);
    const AlignmentResult res = eval_alignment(
        model, ck.config.use_ambiguity, data,
        static_cast<float>(align_temp), align_seed, align_nll);
    const double chance = chance_alignment(data, 20000, align_seed);
    std::cout << "mean oracle alignment: " << res.mean_score
              << " (chance " << chance << ")\n";
    if (align_nll) std::cout << "mean NLL: " << res.mean_nll << "\n";
    if (!align_out.empty()) write_alignment_json(res, chance, align_out);
    if (!align_scatter.empty())
      write_scatter_svg(
          metric_snapshot(model, ck.config.use_ambiguity, data, align_seed),
          align_scatter);
  } else if (*div) {
    const Checkpoint ck = load_checkpoint(div_ckpt);
    Model<float> model = model_from_checkpoint<float>(ck);
    const Dataset benchd = load_dataset(div_bench);
    const DiversityReport rep = eval_diversity(
        model, ck.config.use_ambiguity, benchd, div_k, div_seed, div_tau);
    std::cout << "mean distinct clusters: " << rep.mean_distinct
              << " (mean-mode baseline: " << rep.mean_mode_mean_distinct
              << ")\nmean plausibility: " << rep.mean_plausibility
              << "\ncoverage: " << rep.mean_coverage << "\n";
    if (!div_out.empty()) write_diversity_json(rep, div_out);
  } else if (*ablate) {
    TrainConfig cfg = config_or_default(ab_config);
    const Dataset train_d = load_dataset(ab_data);
    const Dataset holdout_d = load_dataset(ab_holdout);
    const Dataset bench_d = load_dataset(ab_bench);
    if (ab_seeds < 1) throw ConfigError("--seeds must be >= 1");
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < ab_seeds; ++i) seeds.push_back(ab_seed + i);
    const AblationResult res = run_ablation(
        cfg, train_d, holdout_d, bench_d, seeds, ab_k, ab_tau, ab_threads);
    write_ablation_json(res, ab_out + ".json");
    write_ablation_csv(res, ab_out + ".csv");
    for (const auto& row : res.rows)
      std::cout << row.variant << ": alignment " << row.alignment_mean
                << " +- " << row.alignment_std << ", nll " << row.nll_mean
                << ", distinct " << row.distinct_mean << "\n";
    std::cout << "wrote " << ab_out << ".json and " << ab_out << ".csv\n";
  } else if (*gc) {
    TrainConfig cfg;
    if (!gc_config.empty()) {
      cfg = load_train_config(gc_config);
    } else {
      cfg.d_model = 16;
      cfg.n_layers = 1;
      cfg.n_heads = 2;
      cfg.d_ff = 32;
      cfg.batch_size = gc_batch;
      cfg.seed = gc_seed;
    }
    const GradCheckReport rep =
        grad_check(cfg, gc_batch, gc_seed, gc_tol, gc_tol_kl);
    double worst = 0.0;
    for (const auto& row : rep.rows) {
      worst = std::max(worst, row.max_rel_err);
      if (!row.pass)
        std::cout << "FAIL " << row.loss << " " << row.group
                  << " max_rel_err=" << row.max_rel_err << " > "
                  << row.tolerance << "\n";
    }
    std::cout << (rep.all_pass ? "gradcheck passed" : "gradcheck FAILED")
              << " (worst max_rel_err " << worst << ")\n";
    if (!gc_out.empty()) write_gradcheck_json(rep, gc_out);
    if (!rep.all_pass) return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const VocabError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}
