// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "higen/grammar.hpp"

namespace higen {

// One training/benchmark record: a prompt, the single interpretation sampled
// for it, and the rendered grids. Benchmark records also carry the full
// interpretation list.
struct Record {
  PromptSpec prompt;
  Interpretation interpretation;
  TokenGrid hr;
  TokenGrid lr;
};

struct Dataset {
  int format_version = 1;
  std::string vocab_hash;
  bool benchmark = false;
  std::vector<Record> records;
};

// Draws one record. The per-record generator is seeded by (seed, index), so
// generation is order-independent and reproducible.
Record sample_record(std::uint64_t seed, std::uint64_t index,
                     double ambiguous_fraction);

Dataset generate_dataset(int n, std::uint64_t seed, double ambiguous_fraction);

// Every benchmark prompt has >= 2 interpretations (class word prompts only).
Dataset generate_ambiguous_benchmark(int n, std::uint64_t seed);

// Line-delimited JSON: a header object with format_version and the
// vocabulary hash, then one record object per line.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace higen
