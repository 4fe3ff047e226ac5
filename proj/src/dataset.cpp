// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#include "higen/dataset.hpp"

#include <fstream>

#include <json.hpp>

#include "higen/rng.hpp"
#include "higen/types.hpp"

namespace higen {

using nlohmann::json;
using namespace vocab;

Record sample_record(std::uint64_t seed, std::uint64_t index,
                     double ambiguous_fraction) {
  Rng rng(mix_seed(seed, index));
  const bool ambiguous = rng.uniform() < ambiguous_fraction;

  int word;
  if (ambiguous) {
    const int cls[3] = {kWordWarm, kWordCool, kWordAny};
    word = cls[rng.below(3)];
  } else {
    word = static_cast<int>(rng.below(kImageVocabSize));
  }
  const auto pattern = static_cast<Pattern>(rng.below(3));

  Record rec;
  rec.prompt = make_prompt(word, pattern);
  const auto& interps = rec.prompt.interpretations;
  rec.interpretation = interps[rng.below(interps.size())];
  rec.hr = render_scene(rec.interpretation);
  rec.lr = downsample_lr(rec.hr);
  return rec;
}

Dataset generate_dataset(int n, std::uint64_t seed,
                         double ambiguous_fraction) {
  require(n >= 1, "dataset size must be >= 1");
  require(ambiguous_fraction >= 0.0 && ambiguous_fraction <= 1.0,
          "ambiguous_fraction must be in [0, 1]");
  Dataset ds;
  ds.vocab_hash = vocabulary_hash_hex();
  ds.records.reserve(n);
  for (int i = 0; i < n; ++i)
    ds.records.push_back(sample_record(seed, i, ambiguous_fraction));
  return ds;
}

Dataset generate_ambiguous_benchmark(int n, std::uint64_t seed) {
  require(n >= 1, "benchmark size must be >= 1");
  Dataset ds;
  ds.vocab_hash = vocabulary_hash_hex();
  ds.benchmark = true;
  ds.records.reserve(n);
  for (int i = 0; i < n; ++i)
    ds.records.push_back(sample_record(seed, i, /*ambiguous_fraction=*/1.0));
  return ds;
}

namespace {

json interp_to_json(const Interpretation& it) {
  return json{{"color", it.color},
              {"pattern", pattern_names()[static_cast<int>(it.pattern)]}};
}

Interpretation interp_from_json(const json& j) {
  Interpretation it;
  it.color = j.at("color").get<int>();
  it.pattern = pattern_from_name(j.at("pattern").get<std::string>());
  return it;
}

}  // namespace

void write_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);

  json header{{"format_version", ds.format_version},
              {"vocab_hash", ds.vocab_hash},
              {"benchmark", ds.benchmark}};
  out << header.dump() << "\n";

  for (const auto& rec : ds.records) {
    json j{{"prompt", rec.prompt.tokens},
           {"lr", rec.lr.cells},
           {"hr", rec.hr.cells},
           {"interpretation", interp_to_json(rec.interpretation)}};
    if (ds.benchmark) {
      json list = json::array();
      for (const auto& it : rec.prompt.interpretations)
        list.push_back(interp_to_json(it));
      j["interpretations"] = list;
    }
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset: " + path);

  Dataset ds;
  std::string line;
  int lineno = 0;
  if (!std::getline(in, line))
    throw ParseError(path + ": empty file, missing header");
  ++lineno;
  try {
    const json header = json::parse(line);
    ds.format_version = header.at("format_version").get<int>();
    if (ds.format_version != 1)
      throw ParseError("unsupported format_version " +
                       std::to_string(ds.format_version));
    ds.vocab_hash = header.at("vocab_hash").get<std::string>();
    if (ds.vocab_hash != vocabulary_hash_hex())
      throw ParseError("vocabulary hash mismatch");
    ds.benchmark = header.value("benchmark", false);
  } catch (const json::exception& e) {
    throw ParseError(path + ":1: bad header: " + e.what());
  }

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      Record rec;
      std::array<int, kPromptLen> toks{};
      const auto& pt = j.at("prompt");
      if (pt.size() != kPromptLen)
        throw ParseError("prompt must have 4 tokens");
      for (int k = 0; k < kPromptLen; ++k) toks[k] = pt[k].get<int>();
      rec.prompt = parse_prompt(toks);
      rec.lr.res = Resolution::kLr;
      rec.lr.cells = j.at("lr").get<std::vector<int>>();
      rec.hr.res = Resolution::kHr;
      rec.hr.cells = j.at("hr").get<std::vector<int>>();
      if (rec.lr.cells.size() != kLrCells || rec.hr.cells.size() != kHrCells)
        throw ParseError("bad grid size");
      for (int c : rec.lr.cells)
        if (c < 0 || c >= kImageVocabSize) throw ParseError("lr token range");
      for (int c : rec.hr.cells)
        if (c < 0 || c >= kImageVocabSize) throw ParseError("hr token range");
      rec.interpretation = interp_from_json(j.at("interpretation"));
      ds.records.push_back(std::move(rec));
    } catch (const std::exception& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ds;
}

}  // namespace higen
