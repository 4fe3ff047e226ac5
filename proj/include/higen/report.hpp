// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "higen/eval.hpp"
#include "higen/trainer.hpp"

namespace higen {

// One metrics-log line (line-delimited JSON, stable key order).
std::string metrics_line(const StepReport& rep);

void write_alignment_json(const AlignmentResult& res, double chance,
                          const std::string& path);
void write_alignment_csv(const AlignmentResult& res,
                         const std::string& path);

void write_diversity_json(const DiversityReport& rep,
                          const std::string& path);

void write_ablation_json(const AblationResult& res, const std::string& path);
void write_ablation_csv(const AblationResult& res, const std::string& path);

// Scatter of the 2-D metric embedding, points colored by oracle score.
void write_scatter_svg(const MetricSnapshot& snap, const std::string& path);

void write_gradcheck_json(const GradCheckReport& rep,
                          const std::string& path);

}  // namespace higen
