// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace higen::vocab {

// Image token vocabulary: 8 color ids, dense from 0.
enum Color : int {
  kRed = 0,
  kOrange = 1,
  kYellow = 2,
  kGreen = 3,
  kBlue = 4,
  kPurple = 5,
  kBlack = 6,
  kWhite = 7,
};

constexpr int kImageVocabSize = 8;

// Prompt token vocabulary: 24 word ids.
//   0..7   color words (aligned with image token ids)
//   8..10  class words: warm, cool, any
//   11..13 pattern words: solid, stripes, checker
//   14     bos, 15 pad
//   16..23 filler words (vocabulary padding, unused by the prompt grammar)
constexpr int kPromptVocabSize = 24;

constexpr int kWordWarm = 8;
constexpr int kWordCool = 9;
constexpr int kWordAny = 10;
constexpr int kWordSolid = 11;
constexpr int kWordStripes = 12;
constexpr int kWordChecker = 13;
constexpr int kWordBos = 14;
constexpr int kWordPad = 15;
constexpr int kFillerBase = 16;

constexpr int kPromptLen = 4;  // [bos, color-or-class, pattern, pad]

enum class Pattern : int { kSolid = 0, kStripes = 1, kChecker = 2 };

const std::array<std::string, kImageVocabSize>& color_names();
const std::array<std::string, 3>& pattern_names();
const std::array<std::string, kPromptVocabSize>& prompt_word_names();

// True for tokens usable in prompt slot 1 (color or class word).
bool is_color_word(int token);
bool is_class_word(int token);
bool is_pattern_word(int token);

Pattern pattern_from_word(int token);
int word_from_pattern(Pattern p);
Pattern pattern_from_name(const std::string& name);

// FNV-1a over the canonical vocabulary spelling; stamped into dataset
// headers so files from mismatched vocabularies are rejected on load.
std::uint64_t vocabulary_hash();
std::string vocabulary_hash_hex();

}  // namespace higen::vocab
