// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "higen/checkpoint.hpp"
#include "higen/report.hpp"
#include "higen/trainer.hpp"

using namespace higen;

namespace {

TrainConfig tiny_train_config() {
  TrainConfig c;
  c.d_model = 16;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 32;
  c.batch_size = 4;
  c.steps = 5;
  c.log_interval = 2;
  c.seed = 3;
  return c;
}

std::vector<const Record*> batch_of(const Dataset& ds, size_t n) {
  std::vector<const Record*> out;
  for (size_t i = 0; i < n && i < ds.records.size(); ++i)
    out.push_back(&ds.records[i]);
  return out;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("composite loss") {
  const Dataset data = generate_dataset(8, 17, 0.5);
  const auto batch = batch_of(data, 4);

  SUBCASE("components combine linearly with the configured weights") {
    Model<double> model(tiny_train_config().model_config());
    Tape<double> tape(false);
    auto p = model.bind(tape);
    std::vector<Vec<double>> eps(batch.size(), Vec<double>::Zero(8));
    BatchOptions<double> opt;
    opt.eps = &eps;
    opt.lambda1 = 0.05;
    opt.lambda2 = 1e-4;
    auto g = build_batch_loss(model, tape, p, batch, opt);
    CHECK(g.total_value(tape) ==
          doctest::Approx(g.ar_value(tape) + 0.05 * g.maer_value(tape) +
                          1e-4 * g.kl_value(tape))
              .epsilon(1e-12));

    // the stated arithmetic example
    CHECK(2.0 + 0.05 * 0.4 + 1e-4 * 3.0 == doctest::Approx(2.0203));
  }

  SUBCASE("doubling lambda1 doubles the metric contribution exactly") {
    Model<double> model(tiny_train_config().model_config());
    std::vector<Vec<double>> eps(batch.size(), Vec<double>::Zero(8));
    auto total_at = [&](double lambda1) {
      Tape<double> tape(false);
      auto p = model.bind(tape);
      BatchOptions<double> opt;
      opt.eps = &eps;
      opt.lambda1 = lambda1;
      auto g = build_batch_loss(model, tape, p, batch, opt);
      return std::make_pair(g.total_value(tape), g.maer_value(tape));
    };
    const auto [t1, m1] = total_at(0.05);
    const auto [t2, m2] = total_at(0.10);
    CHECK(m1 == m2);
    CHECK(t2 - t1 == doctest::Approx(0.05 * m1).epsilon(1e-9));
  }

  SUBCASE("disabled components contribute exactly zero") {
    Model<double> model(tiny_train_config().model_config());
    Tape<double> tape(false);
    auto p = model.bind(tape);
    BatchOptions<double> opt;
    opt.use_maer = false;
    opt.use_ambiguity = false;
    auto g = build_batch_loss(model, tape, p, batch, opt);
    CHECK(g.total_value(tape) == g.ar_value(tape));
    CHECK(g.maer_value(tape) == 0.0);
    CHECK(g.kl_value(tape) == 0.0);
  }

  SUBCASE("a batch too small for the metric path is rejected") {
    Model<double> model(tiny_train_config().model_config());
    Tape<double> tape(false);
    auto p = model.bind(tape);
    BatchOptions<double> opt;
    opt.use_ambiguity = false;
    auto one = batch_of(data, 1);
    CHECK_THROWS_AS(build_batch_loss(model, tape, p, one, opt),
                    ShapeError);
  }
}

TEST_CASE("variant-flag isolation") {
  const Dataset data = generate_dataset(8, 18, 0.5);
  const auto batch = batch_of(data, 4);
  Model<double> model(tiny_train_config().model_config());

  SUBCASE("without the metric path the projection head gets zero gradient") {
    Tape<double> tape(true);
    auto p = model.bind(tape);
    std::vector<Vec<double>> eps(batch.size(), Vec<double>::Zero(8));
    BatchOptions<double> opt;
    opt.use_maer = false;
    opt.eps = &eps;
    auto g = build_batch_loss(model, tape, p, batch, opt);
    tape.backward(g.total);
    for (int i : {model.ids.proj_w1, model.ids.proj_b1, model.ids.proj_w2,
                  model.ids.proj_b2})
      CHECK_FALSE(tape.has_grad(p[i].id));
    CHECK(tape.has_grad(p[model.ids.prefix_w].id));
  }

  SUBCASE("without the latent the ambiguity parameters get zero gradient") {
    Tape<double> tape(true);
    auto p = model.bind(tape);
    BatchOptions<double> opt;
    opt.use_ambiguity = false;
    auto g = build_batch_loss(model, tape, p, batch, opt);
    tape.backward(g.total);
    for (int i : {model.ids.post_w1, model.ids.post_w2, model.ids.prefix_w,
                  model.ids.prefix_b, model.ids.film_g_w,
                  model.ids.film_b_w})
      CHECK_FALSE(tape.has_grad(p[i].id));
    CHECK(tape.has_grad(p[model.ids.proj_w1].id));
  }

  SUBCASE("disabled-module parameters stay bitwise untouched by training") {
    TrainConfig cfg = tiny_train_config();
    cfg.use_maer = false;
    cfg.use_ambiguity = false;
    cfg.steps = 6;
    Trainer<float> tr(cfg);
    std::vector<Matf> before;
    for (int i = 0; i < tr.model().params.count(); ++i)
      before.push_back(tr.model().params.at(i).value);
    tr.train(generate_dataset(32, 5, 0.5), {});
    for (int i = 0; i < tr.model().params.count(); ++i) {
      const auto& e = tr.model().params.at(i);
      const bool off_module = e.name.starts_with("metric.") ||
                              e.name.starts_with("latent.");
      if (off_module || e.frozen) {
        CHECK(e.value == before[i]);
      }
    }
  }
}

TEST_CASE("train step") {
  const Dataset data = generate_dataset(64, 19, 0.5);

  SUBCASE("frozen tables are bitwise unchanged by optimization") {
    TrainConfig cfg = tiny_train_config();
    Trainer<float> tr(cfg);
    const Matf text =
        tr.model().params.at(tr.model().ids.text_table).value;
    const Matf embedder =
        tr.model().params.at(tr.model().ids.image_embedder).value;
    tr.train(data, {});
    CHECK(tr.model().params.at(tr.model().ids.text_table).value == text);
    CHECK(tr.model().params.at(tr.model().ids.image_embedder).value ==
          embedder);
  }

  SUBCASE("identical seeds give identical report streams") {
    TrainConfig cfg = tiny_train_config();
    cfg.steps = 8;
    cfg.log_interval = 1;
    std::vector<std::string> lines1, lines2;
    {
      Trainer<float> tr(cfg);
      tr.train(data, [&](const StepReport& r) {
        lines1.push_back(metrics_line(r));
      });
    }
    {
      Trainer<float> tr(cfg);
      tr.train(data, [&](const StepReport& r) {
        lines2.push_back(metrics_line(r));
      });
    }
    CHECK(lines1 == lines2);
    CHECK(lines1.size() == 8);
  }

  SUBCASE("zero learning rate leaves parameters bitwise unchanged") {
    TrainConfig cfg = tiny_train_config();
    cfg.learning_rate = 0.0;
    cfg.steps = 3;
    Trainer<float> tr(cfg);
    std::vector<Matf> before;
    for (int i = 0; i < tr.model().params.count(); ++i)
      before.push_back(tr.model().params.at(i).value);
    tr.train(data, {});
    for (int i = 0; i < tr.model().params.count(); ++i)
      CHECK(tr.model().params.at(i).value == before[i]);
  }

  SUBCASE("metrics log line count is ceil(steps / interval)") {
    TrainConfig cfg = tiny_train_config();
    cfg.steps = 10;
    cfg.log_interval = 4;
    int lines = 0;
    Trainer<float> tr(cfg);
    tr.train(data, [&](const StepReport&) { ++lines; });
    CHECK(lines == 3);  // steps 1, 5, 9
  }

  SUBCASE("metrics lines carry the expected keys") {
    StepReport rep;
    rep.step = 7;
    rep.l_ar = 1.5;
    const std::string line = metrics_line(rep);
    for (const char* key : {"\"step\"", "\"L_AR\"", "\"L_MAER\"", "\"L_KL\"",
                            "\"L_total\"", "\"grad_norm\"",
                            "\"realized_KL\""})
      CHECK(line.find(key) != std::string::npos);
  }
}

TEST_CASE("checkpointing") {
  const Dataset data = generate_dataset(16, 23, 0.5);

  SUBCASE("zero steps preserves the initialization") {
    TrainConfig cfg = tiny_train_config();
    cfg.steps = 0;
    Trainer<float> tr(cfg);
    tr.train(data, {});
    Model<float> fresh(cfg.model_config());
    for (int i = 0; i < fresh.params.count(); ++i)
      CHECK(tr.model().params.at(i).value == fresh.params.at(i).value);
  }

  SUBCASE("save, load and re-save are byte-identical; loss is bitwise") {
    TrainConfig cfg = tiny_train_config();
    cfg.steps = 4;
    Trainer<float> tr(cfg);
    tr.train(data, {});

    const auto batch = batch_of(data, 4);
    auto loss_of = [&](Trainer<float>& t) {
      Tape<float> tape(false);
      auto p = t.model().bind(tape);
      std::vector<Vec<float>> eps(batch.size(), Vec<float>::Zero(8));
      BatchOptions<float> opt;
      opt.eps = &eps;
      auto g = build_batch_loss(t.model(), tape, p, batch, opt);
      return g.total_value(tape);
    };
    const double before = loss_of(tr);

    const std::string p1 = temp_path("higen_ck_a.bin");
    const std::string p2 = temp_path("higen_ck_b.bin");
    save_checkpoint(make_checkpoint(tr), p1);
    Trainer<float> loaded = trainer_from_checkpoint<float>(
        load_checkpoint(p1));
    save_checkpoint(make_checkpoint(loaded), p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(loss_of(loaded) == before);
    CHECK(loaded.step() == tr.step());

    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }

  SUBCASE("training continues identically after a reload") {
    TrainConfig cfg = tiny_train_config();
    cfg.steps = 3;
    Trainer<float> a(cfg);
    a.train(data, {});
    const std::string path = temp_path("higen_ck_resume.bin");
    save_checkpoint(make_checkpoint(a), path);
    Trainer<float> b = trainer_from_checkpoint<float>(load_checkpoint(path));
    const auto batch = batch_of(data, 4);
    const StepReport ra = a.train_step(batch);
    const StepReport rb = b.train_step(batch);
    CHECK(ra.l_total == rb.l_total);
    CHECK(ra.grad_norm == rb.grad_norm);
    std::filesystem::remove(path);
  }

  SUBCASE("corrupt magic bytes are rejected without a partial load") {
    TrainConfig cfg = tiny_train_config();
    Trainer<float> tr(cfg);
    const std::string path = temp_path("higen_ck_bad.bin");
    save_checkpoint(make_checkpoint(tr), path);
    std::string bytes = slurp(path);
    bytes[0] = 'X';
    {
      std::ofstream out(path, std::ios::binary);
      out << bytes;
    }
    CHECK_THROWS_WITH_AS(load_checkpoint(path),
                         doctest::Contains("magic"), ParseError);
    std::filesystem::remove(path);
  }

  SUBCASE("truncated files are rejected") {
    TrainConfig cfg = tiny_train_config();
    Trainer<float> tr(cfg);
    const std::string path = temp_path("higen_ck_trunc.bin");
    save_checkpoint(make_checkpoint(tr), path);
    std::string bytes = slurp(path);
    bytes.resize(bytes.size() / 2);
    {
      std::ofstream out(path, std::ios::binary);
      out << bytes;
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    std::filesystem::remove(path);
  }

  SUBCASE("dimension mismatches name the parameter") {
    TrainConfig cfg = tiny_train_config();
    Trainer<float> tr(cfg);
    const std::string path = temp_path("higen_ck_dim.bin");
    save_checkpoint(make_checkpoint(tr), path);
    TrainConfig other = cfg;
    other.d_model = 8;
    other.n_heads = 2;
    Model<float> wrong(other.model_config());
    const Checkpoint ck = load_checkpoint(path);
    CHECK_THROWS_WITH_AS(load_into_model(ck, wrong),
                         doctest::Contains("frozen.text_table"), ShapeError);
    std::filesystem::remove(path);
  }
}

TEST_CASE("gradient checker smoke run") {
  // The full-resolution run is the acceptance suite's first criterion; this
  // keeps a small always-on regression in the unit tests.
  TrainConfig cfg = tiny_train_config();
  cfg.batch_size = 3;
  const GradCheckReport rep = grad_check(cfg, 3, 29);
  CHECK(rep.all_pass);
  bool saw_frozen = false;
  for (const auto& row : rep.rows) {
    if (row.frozen) {
      saw_frozen = true;
      CHECK(row.max_rel_err == 0.0);
    }
  }
  CHECK(saw_frozen);
}
