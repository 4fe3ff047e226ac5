// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "higen/dataset.hpp"
#include "higen/grammar.hpp"
#include "higen/types.hpp"

using namespace higen;
using namespace higen::vocab;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("interpretation enumeration") {
  SUBCASE("concrete color admits exactly itself") {
    const auto p = make_prompt(kRed, Pattern::kSolid);
    REQUIRE(p.interpretations.size() == 1);
    CHECK(p.interpretations[0].color == kRed);
    CHECK(p.interpretations[0].pattern == Pattern::kSolid);
    CHECK_FALSE(p.ambiguous());
  }

  SUBCASE("warm class admits its three colors") {
    const auto p = make_prompt(kWordWarm, Pattern::kStripes);
    REQUIRE(p.interpretations.size() == 3);
    CHECK(p.interpretations[0].color == kRed);
    CHECK(p.interpretations[1].color == kOrange);
    CHECK(p.interpretations[2].color == kYellow);
    for (const auto& it : p.interpretations)
      CHECK(it.pattern == Pattern::kStripes);
  }

  SUBCASE("any admits all colors, found by brute force") {
    const auto p = make_prompt(kWordAny, Pattern::kChecker);
    // brute force: every image token id must appear exactly once
    std::set<int> colors;
    for (const auto& it : p.interpretations) colors.insert(it.color);
    CHECK(colors.size() == 8);
    for (int c = 0; c < kImageVocabSize; ++c) CHECK(colors.count(c) == 1);
  }

  SUBCASE("interpretation count always equals the color class size") {
    for (const auto& p : all_prompts())
      CHECK(p.interpretations.size() == p.color_class.size());
  }

  SUBCASE("malformed prompts name the offending position") {
    CHECK_THROWS_WITH_AS(
        parse_prompt({kWordPad, kRed, kWordSolid, kWordPad}),
        doctest::Contains("position 0"), VocabError);
    CHECK_THROWS_WITH_AS(
        parse_prompt({kWordBos, kWordSolid, kWordSolid, kWordPad}),
        doctest::Contains("position 1"), VocabError);
    CHECK_THROWS_WITH_AS(parse_prompt({kWordBos, kRed, kRed, kWordPad}),
                         doctest::Contains("position 2"), VocabError);
    CHECK_THROWS_WITH_AS(parse_prompt({kWordBos, kRed, kWordSolid, kRed}),
                         doctest::Contains("position 3"), VocabError);
  }
}

TEST_CASE("scene rendering") {
  SUBCASE("solid fills all 64 cells") {
    const auto g = render_scene({kRed, Pattern::kSolid});
    REQUIRE(g.cells.size() == 64);
    for (int c : g.cells) CHECK(c == kRed);
  }

  SUBCASE("stripes color even rows and leave odd rows white") {
    const auto g = render_scene({kBlue, Pattern::kStripes});
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c)
        CHECK(g.at(r, c) == (r % 2 == 0 ? kBlue : kWhite));
  }

  SUBCASE("checker colors exactly the 32 even-parity cells") {
    const auto g = render_scene({kGreen, Pattern::kChecker});
    int green_cells = 0;
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        if ((r + c) % 2 == 0) {
          CHECK(g.at(r, c) == kGreen);
          ++green_cells;
        } else {
          CHECK(g.at(r, c) == kWhite);
        }
      }
    CHECK(green_cells == 32);
  }
}

TEST_CASE("downsampling") {
  SUBCASE("solid stays solid") {
    const auto lr = downsample_lr(render_scene({kRed, Pattern::kSolid}));
    REQUIRE(lr.cells.size() == 16);
    for (int c : lr.cells) CHECK(c == kRed);
  }

  SUBCASE("stripes block ties resolve to the lower id") {
    // each 2x2 block is {blue, blue, white, white}; blue=4 < white=7
    const auto lr = downsample_lr(render_scene({kBlue, Pattern::kStripes}));
    for (int c : lr.cells) CHECK(c == kBlue);
  }

  SUBCASE("checker block ties resolve to the lower id") {
    // blocks are {green, white, white, green}; green=3 < white=7
    const auto lr = downsample_lr(render_scene({kGreen, Pattern::kChecker}));
    for (int c : lr.cells) CHECK(c == kGreen);
  }

  SUBCASE("white-on-white degenerates to white") {
    const auto lr = downsample_lr(render_scene({kWhite, Pattern::kStripes}));
    for (int c : lr.cells) CHECK(c == kWhite);
  }

  SUBCASE("wrong resolution is rejected") {
    TokenGrid small;
    small.res = Resolution::kLr;
    small.cells.assign(16, 0);
    CHECK_THROWS_AS(downsample_lr(small), ShapeError);
  }

  SUBCASE("re-running yields identical grids") {
    for (const auto& p : all_prompts())
      for (const auto& it : p.interpretations) {
        const auto a = downsample_lr(render_scene(it));
        const auto b = downsample_lr(render_scene(it));
        CHECK(a.cells == b.cells);
      }
  }
}

TEST_CASE("oracle score") {
  SUBCASE("exact rendering scores 1") {
    const auto p = make_prompt(kWordWarm, Pattern::kSolid);
    for (const auto& it : p.interpretations)
      CHECK(oracle_score(render_scene(it), p) == doctest::Approx(1.0));
  }

  SUBCASE("all-black grid scores 0 against red solid") {
    TokenGrid g;
    g.res = Resolution::kHr;
    g.cells.assign(64, kBlack);
    CHECK(oracle_score(g, make_prompt(kRed, Pattern::kSolid)) == 0.0);
  }

  SUBCASE("half-matching grid scores 0.5, counted by brute force") {
    const auto p = make_prompt(kRed, Pattern::kSolid);
    TokenGrid g = render_scene({kRed, Pattern::kSolid});
    for (int i = 0; i < 32; ++i) g.cells[i] = kBlack;
    int matches = 0;
    const auto ref = render_scene({kRed, Pattern::kSolid});
    for (int i = 0; i < 64; ++i)
      if (g.cells[i] == ref.cells[i]) ++matches;
    CHECK(matches == 32);
    CHECK(oracle_score(g, p) == doctest::Approx(0.5));
  }

  SUBCASE("renders of disjoint colors never score 1") {
    for (const auto& p : all_prompts()) {
      for (int color = 0; color < kImageVocabSize; ++color) {
        bool admissible = false;
        for (int c : p.color_class) admissible |= (c == color);
        if (admissible) continue;
        for (int pat = 0; pat < 3; ++pat) {
          const auto g =
              render_scene({color, static_cast<Pattern>(pat)});
          CHECK(oracle_score(g, p) < 1.0);
        }
      }
    }
  }

  SUBCASE("max cross-pattern overlap for the same color is at most 0.75") {
    // solid vs stripes share the colored even rows (32 cells) plus nothing
    // else; stripes vs checker share half the colored cells plus half the
    // white cells. The plausibility threshold 0.8 sits above all of them.
    for (int color = 0; color < kImageVocabSize - 1; ++color) {
      for (int pa = 0; pa < 3; ++pa)
        for (int pb = 0; pb < 3; ++pb) {
          if (pa == pb) continue;
          const auto ga = render_scene({color, static_cast<Pattern>(pa)});
          const double f =
              match_fraction(ga, {color, static_cast<Pattern>(pb)});
          CHECK(f <= 0.75);
        }
    }
  }
}

TEST_CASE("dataset generation") {
  SUBCASE("ambiguous_fraction 0 yields single-interpretation prompts") {
    const auto ds = generate_dataset(1, 7, 0.0);
    REQUIRE(ds.records.size() == 1);
    CHECK(ds.records[0].prompt.interpretations.size() == 1);
  }

  SUBCASE("every record scores 1 against its own prompt") {
    const auto ds = generate_dataset(200, 3, 0.5);
    for (const auto& rec : ds.records) {
      CHECK(oracle_score(rec.hr, rec.prompt) == doctest::Approx(1.0));
      CHECK(downsample_lr(rec.hr).cells == rec.lr.cells);
    }
  }

  SUBCASE("generation is a pure function of (n, seed, fraction)") {
    const std::string p1 = temp_path("higen_ds_a.jsonl");
    const std::string p2 = temp_path("higen_ds_b.jsonl");
    write_dataset(generate_dataset(50, 11, 0.3), p1);
    write_dataset(generate_dataset(50, 11, 0.3), p2);
    CHECK(slurp(p1) == slurp(p2));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }

  SUBCASE("ambiguous fraction lands in the binomial bound") {
    const auto ds = generate_dataset(1000, 5, 0.5);
    int ambiguous = 0;
    for (const auto& rec : ds.records)
      if (rec.prompt.ambiguous()) ++ambiguous;
    CHECK(ambiguous >= 400);
    CHECK(ambiguous <= 600);
  }

  SUBCASE("round-trips through the file format") {
    const std::string path = temp_path("higen_ds_rt.jsonl");
    const auto ds = generate_dataset(40, 13, 0.5);
    write_dataset(ds, path);
    const auto loaded = load_dataset(path);
    REQUIRE(loaded.records.size() == ds.records.size());
    for (size_t i = 0; i < ds.records.size(); ++i) {
      CHECK(loaded.records[i].prompt.tokens == ds.records[i].prompt.tokens);
      CHECK(loaded.records[i].lr.cells == ds.records[i].lr.cells);
      CHECK(loaded.records[i].hr.cells == ds.records[i].hr.cells);
      CHECK(loaded.records[i].interpretation ==
            ds.records[i].interpretation);
    }
    std::filesystem::remove(path);
  }

  SUBCASE("parse errors carry the line number") {
    const std::string path = temp_path("higen_ds_bad.jsonl");
    {
      std::ofstream out(path);
      const auto ds = generate_dataset(2, 1, 0.0);
      write_dataset(ds, path);
    }
    std::string text = slurp(path);
    text += "{\"prompt\": [14, 0], \"lr\": [], \"hr\": []}\n";
    {
      std::ofstream out(path, std::ios::binary);
      out << text;
    }
    CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains(":4:"),
                         ParseError);
    std::filesystem::remove(path);
  }
}

TEST_CASE("ambiguous benchmark") {
  SUBCASE("every prompt has at least two interpretations and a class word") {
    const auto b = generate_ambiguous_benchmark(200, 9);
    REQUIRE(b.records.size() == 200);
    for (const auto& rec : b.records) {
      CHECK(rec.prompt.interpretations.size() >= 2);
      CHECK(is_class_word(rec.prompt.tokens[1]));
    }
  }

  SUBCASE("benchmark files are deterministic and carry interpretations") {
    const std::string p1 = temp_path("higen_bench_a.jsonl");
    const std::string p2 = temp_path("higen_bench_b.jsonl");
    write_dataset(generate_ambiguous_benchmark(10, 4), p1);
    write_dataset(generate_ambiguous_benchmark(10, 4), p2);
    CHECK(slurp(p1) == slurp(p2));
    const auto loaded = load_dataset(p1);
    CHECK(loaded.benchmark);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }
}
