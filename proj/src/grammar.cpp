// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#include "higen/grammar.hpp"

#include <algorithm>

#include "higen/types.hpp"

namespace higen {

using namespace vocab;

std::vector<int> admissible_colors(int word) {
  if (is_color_word(word)) return {word};
  switch (word) {
    case kWordWarm:
      return {kRed, kOrange, kYellow};
    case kWordCool:
      return {kGreen, kBlue, kPurple};
    case kWordAny:
      return {kRed, kOrange, kYellow, kGreen, kBlue, kPurple, kBlack, kWhite};
    default:
      throw VocabError("token " + std::to_string(word) +
                       " is not a color or class word");
  }
}

PromptSpec parse_prompt(const std::array<int, kPromptLen>& tokens) {
  if (tokens[0] != kWordBos)
    throw VocabError("malformed prompt at position 0: expected <bos>, got " +
                     std::to_string(tokens[0]));
  if (!is_color_word(tokens[1]) && !is_class_word(tokens[1]))
    throw VocabError(
        "malformed prompt at position 1: expected color or class word, got " +
        std::to_string(tokens[1]));
  if (!is_pattern_word(tokens[2]))
    throw VocabError("malformed prompt at position 2: expected pattern word, "
                     "got " +
                     std::to_string(tokens[2]));
  if (tokens[3] != kWordPad)
    throw VocabError("malformed prompt at position 3: expected <pad>, got " +
                     std::to_string(tokens[3]));

  PromptSpec p;
  p.tokens = tokens;
  p.color_class = admissible_colors(tokens[1]);
  p.pattern = pattern_from_word(tokens[2]);
  p.interpretations = enumerate_interpretations(p);
  return p;
}

PromptSpec make_prompt(int color_or_class_word, Pattern pattern) {
  return parse_prompt({kWordBos, color_or_class_word,
                       word_from_pattern(pattern), kWordPad});
}

std::vector<Interpretation> enumerate_interpretations(const PromptSpec& p) {
  std::vector<Interpretation> out;
  out.reserve(p.color_class.size());
  for (int c : p.color_class) out.push_back({c, p.pattern});
  std::sort(out.begin(), out.end());
  return out;
}

TokenGrid render_scene(const Interpretation& interp) {
  require(interp.color >= 0 && interp.color < kImageVocabSize,
          "interpretation color out of range");
  TokenGrid g;
  g.res = Resolution::kHr;
  g.cells.assign(kHrCells, kWhite);
  for (int r = 0; r < kHrSide; ++r) {
    for (int c = 0; c < kHrSide; ++c) {
      bool on = false;
      switch (interp.pattern) {
        case Pattern::kSolid:
          on = true;
          break;
        case Pattern::kStripes:
          on = (r % 2 == 0);
          break;
        case Pattern::kChecker:
          on = ((r + c) % 2 == 0);
          break;
      }
      if (on) g.cells[r * kHrSide + c] = interp.color;
    }
  }
  return g;
}

TokenGrid downsample_lr(const TokenGrid& hr) {
  if (hr.res != Resolution::kHr ||
      hr.cells.size() != static_cast<size_t>(kHrCells))
    throw ShapeError("downsample_lr expects an 8x8 grid, got " +
                     std::to_string(hr.cells.size()) + " cells");
  TokenGrid lr;
  lr.res = Resolution::kLr;
  lr.cells.assign(kLrCells, 0);
  for (int r = 0; r < kLrSide; ++r) {
    for (int c = 0; c < kLrSide; ++c) {
      std::array<int, kImageVocabSize> counts{};
      for (int dr = 0; dr < 2; ++dr)
        for (int dc = 0; dc < 2; ++dc)
          counts[hr.at(2 * r + dr, 2 * c + dc)]++;
      // majority vote, lowest id on ties
      int best = 0;
      for (int t = 1; t < kImageVocabSize; ++t)
        if (counts[t] > counts[best]) best = t;
      lr.cells[r * kLrSide + c] = best;
    }
  }
  return lr;
}

double match_fraction(const TokenGrid& hr, const Interpretation& interp) {
  const TokenGrid ref = render_scene(interp);
  int hits = 0;
  for (int i = 0; i < kHrCells; ++i)
    if (hr.cells[i] == ref.cells[i]) ++hits;
  return static_cast<double>(hits) / kHrCells;
}

double oracle_score(const TokenGrid& hr, const PromptSpec& prompt) {
  require(hr.res == Resolution::kHr &&
              hr.cells.size() == static_cast<size_t>(kHrCells),
          "oracle_score expects an 8x8 grid");
  double best = 0.0;
  for (const auto& interp : prompt.interpretations)
    best = std::max(best, match_fraction(hr, interp));
  return best;
}

std::vector<PromptSpec> all_prompts() {
  std::vector<PromptSpec> out;
  for (int w = 0; w < kImageVocabSize; ++w)
    for (int p = 0; p < 3; ++p)
      out.push_back(make_prompt(w, static_cast<Pattern>(p)));
  for (int w : {kWordWarm, kWordCool, kWordAny})
    for (int p = 0; p < 3; ++p)
      out.push_back(make_prompt(w, static_cast<Pattern>(p)));
  return out;
}

std::string describe(const PromptSpec& p) {
  return prompt_word_names()[p.tokens[1]] + " " +
         pattern_names()[static_cast<int>(p.pattern)];
}

}  // namespace higen
