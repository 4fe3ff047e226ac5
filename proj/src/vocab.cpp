// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#include "higen/vocab.hpp"

#include "higen/types.hpp"

namespace higen::vocab {

const std::array<std::string, kImageVocabSize>& color_names() {
  static const std::array<std::string, kImageVocabSize> names = {
      "red", "orange", "yellow", "green", "blue", "purple", "black", "white"};
  return names;
}

const std::array<std::string, 3>& pattern_names() {
  static const std::array<std::string, 3> names = {"solid", "stripes",
                                                   "checker"};
  return names;
}

const std::array<std::string, kPromptVocabSize>& prompt_word_names() {
  static const std::array<std::string, kPromptVocabSize> names = [] {
    std::array<std::string, kPromptVocabSize> n;
    for (int i = 0; i < kImageVocabSize; ++i) n[i] = color_names()[i];
    n[kWordWarm] = "warm";
    n[kWordCool] = "cool";
    n[kWordAny] = "any";
    n[kWordSolid] = "solid";
    n[kWordStripes] = "stripes";
    n[kWordChecker] = "checker";
    n[kWordBos] = "<bos>";
    n[kWordPad] = "<pad>";
    for (int i = 0; i < 8; ++i)
      n[kFillerBase + i] = "filler" + std::to_string(i);
    return n;
  }();
  return names;
}

bool is_color_word(int token) { return token >= 0 && token < kImageVocabSize; }

bool is_class_word(int token) {
  return token == kWordWarm || token == kWordCool || token == kWordAny;
}

bool is_pattern_word(int token) {
  return token == kWordSolid || token == kWordStripes || token == kWordChecker;
}

Pattern pattern_from_word(int token) {
  if (!is_pattern_word(token))
    throw VocabError("token " + std::to_string(token) +
                     " is not a pattern word");
  return static_cast<Pattern>(token - kWordSolid);
}

int word_from_pattern(Pattern p) { return kWordSolid + static_cast<int>(p); }

Pattern pattern_from_name(const std::string& name) {
  const auto& names = pattern_names();
  for (int i = 0; i < 3; ++i)
    if (names[i] == name) return static_cast<Pattern>(i);
  throw VocabError("unknown pattern name: " + name);
}

std::uint64_t vocabulary_hash() {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    h ^= '|';
    h *= 0x100000001b3ULL;
  };
  for (const auto& s : prompt_word_names()) feed(s);
  for (const auto& s : color_names()) feed(s);
  return h;
}

std::string vocabulary_hash_hex() {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(vocabulary_hash()));
  return std::string(buf);
}

}  // namespace higen::vocab
