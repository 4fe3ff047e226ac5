// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "higen/vocab.hpp"

namespace higen {

constexpr int kLrSide = 4;
constexpr int kHrSide = 8;
constexpr int kLrCells = kLrSide * kLrSide;  // 16
constexpr int kHrCells = kHrSide * kHrSide;  // 64

enum class Resolution { kLr, kHr };

// Discrete token grid, row-major cells, ids in the 8-symbol image vocabulary.
struct TokenGrid {
  Resolution res = Resolution::kHr;
  std::vector<int> cells;

  int side() const { return res == Resolution::kLr ? kLrSide : kHrSide; }
  int size() const { return side() * side(); }
  int at(int row, int col) const { return cells[row * side() + col]; }
};

// One concrete realization of a prompt: a color paired with a pattern.
struct Interpretation {
  int color = 0;
  vocab::Pattern pattern = vocab::Pattern::kSolid;

  bool operator==(const Interpretation& o) const {
    return color == o.color && pattern == o.pattern;
  }
  bool operator<(const Interpretation& o) const {
    if (color != o.color) return color < o.color;
    return static_cast<int>(pattern) < static_cast<int>(o.pattern);
  }
};

// Prompt token sequence plus the enumerated set of valid interpretations.
// Ambiguous prompts (class word warm/cool/any) admit two or more.
struct PromptSpec {
  std::array<int, vocab::kPromptLen> tokens{};
  std::vector<int> color_class;                  // admissible color ids, sorted
  vocab::Pattern pattern = vocab::Pattern::kSolid;
  std::vector<Interpretation> interpretations;   // sorted by color id

  bool ambiguous() const { return interpretations.size() >= 2; }
};

// Admissible colors for a color-or-class word: a concrete color admits
// itself; warm = {red, orange, yellow}; cool = {green, blue, purple};
// any = all 8.
std::vector<int> admissible_colors(int color_or_class_word);

// Enumerates interpretations for a well-formed 4-token prompt. Throws
// VocabError naming the offending position on malformed input.
PromptSpec parse_prompt(const std::array<int, vocab::kPromptLen>& tokens);

PromptSpec make_prompt(int color_or_class_word, vocab::Pattern pattern);

std::vector<Interpretation> enumerate_interpretations(const PromptSpec& p);

// Deterministic 8x8 rendering: solid fills with the color; stripes color
// even rows and leave odd rows white; checker colors cells with even
// (row + col) parity.
TokenGrid render_scene(const Interpretation& interp);

// Majority token per 2x2 block, ties broken by lowest token id.
TokenGrid downsample_lr(const TokenGrid& hr);

// Alignment oracle: best cell-match fraction over the prompt's
// interpretations, in [0, 1]. Stands in for a learned text-image score.
double oracle_score(const TokenGrid& hr, const PromptSpec& prompt);

// Match fraction against a single interpretation's rendering.
double match_fraction(const TokenGrid& hr, const Interpretation& interp);

// All 33 well-formed prompts (24 concrete + 9 ambiguous); test helper and
// benchmark source of truth.
std::vector<PromptSpec> all_prompts();

std::string describe(const PromptSpec& p);

}  // namespace higen
