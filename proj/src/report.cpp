// Copyright (c) 2026 the higen authors
// SPDX-License-Identifier: Apache-2.0

#include "higen/report.hpp"

#include <cstdio>
#include <fstream>

#include <json.hpp>

namespace higen {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

json cell_to_json(const AblationCell& c) {
  json j{{"variant", c.variant},
         {"use_maer", c.use_maer},
         {"use_ambiguity", c.use_ambiguity},
         {"seed", c.seed},
         {"failed", c.failed}};
  if (c.failed) {
    j["error"] = c.error;
    return j;
  }
  j["alignment"] = c.alignment;
  j["nll"] = c.nll;
  j["mean_distinct"] = c.mean_distinct;
  j["mean_coverage"] = c.mean_coverage;
  j["plausibility"] = c.plausibility;
  j["frac_multi_cluster"] = c.frac_multi_cluster;
  j["final_l_ar"] = c.final_l_ar;
  j["final_kl"] = c.final_kl;
  return j;
}

}  // namespace

std::string metrics_line(const StepReport& rep) {
  json j{{"step", rep.step},
         {"L_AR", rep.l_ar},
         {"L_MAER", rep.l_maer},
         {"L_KL", rep.l_kl},
         {"L_total", rep.l_total},
         {"grad_norm", rep.grad_norm},
         {"realized_KL", rep.realized_kl}};
  return j.dump();
}

void write_alignment_json(const AlignmentResult& res, double chance,
                          const std::string& path) {
  json j{{"mean_score", res.mean_score},
         {"chance_level", chance},
         {"scores", res.scores}};
  if (!res.nll.empty()) {
    j["mean_nll"] = res.mean_nll;
    j["nll"] = res.nll;
  }
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_alignment_csv(const AlignmentResult& res,
                         const std::string& path) {
  auto out = open_out(path);
  out << "record,score";
  const bool with_nll = !res.nll.empty();
  if (with_nll) out << ",nll";
  out << "\n";
  char buf[128];
  for (size_t i = 0; i < res.scores.size(); ++i) {
    if (with_nll)
      std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f\n", i, res.scores[i],
                    res.nll[i]);
    else
      std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", i, res.scores[i]);
    out << buf;
  }
}

void write_diversity_json(const DiversityReport& rep,
                          const std::string& path) {
  json per = json::array();
  for (const auto& pd : rep.per_prompt) {
    per.push_back(json{{"labels", pd.labels},
                       {"plausibility", pd.plausibility},
                       {"distinct", pd.distinct},
                       {"coverage", pd.coverage},
                       {"mean_mode_label", pd.mean_mode_label},
                       {"mean_mode_plausibility",
                        pd.mean_mode_plausibility}});
  }
  // The cluster labels automate a judgment the source benchmark assigns to
  // human raters; they are a proxy, as is the color-x-pattern notion of a
  // distinct interpretation.
  json j{{"k", rep.k},
         {"tau", rep.tau},
         {"note",
          "cluster-based diversity is an automated proxy for human "
          "judgment; interpretation = (color, pattern)"},
         {"mean_distinct", rep.mean_distinct},
         {"mean_coverage", rep.mean_coverage},
         {"mean_plausibility", rep.mean_plausibility},
         {"frac_multi_cluster", rep.frac_multi_cluster},
         {"mean_mode_mean_distinct", rep.mean_mode_mean_distinct},
         {"mean_mode_plausibility", rep.mean_mode_plausibility},
         {"per_prompt", per}};
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_ablation_json(const AblationResult& res, const std::string& path) {
  json rows = json::array();
  for (const auto& row : res.rows) {
    json cells = json::array();
    for (const auto& c : row.cells) cells.push_back(cell_to_json(c));
    rows.push_back(json{{"variant", row.variant},
                        {"use_maer", row.use_maer},
                        {"use_ambiguity", row.use_ambiguity},
                        {"seed_count", row.seed_count},
                        {"alignment_mean", row.alignment_mean},
                        {"alignment_std", row.alignment_std},
                        {"nll_mean", row.nll_mean},
                        {"nll_std", row.nll_std},
                        {"distinct_mean", row.distinct_mean},
                        {"distinct_std", row.distinct_std},
                        {"coverage_mean", row.coverage_mean},
                        {"plausibility_mean", row.plausibility_mean},
                        {"cells", cells}});
  }
  json j{{"config", to_json(res.base_config)},
         {"k", res.k},
         {"tau", res.tau},
         {"seeds", res.seeds},
         {"note",
          "diversity clusters are an automated proxy for human judgment"},
         {"rows", rows}};
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

void write_ablation_csv(const AblationResult& res, const std::string& path) {
  auto out = open_out(path);
  out << "variant,use_maer,use_ambiguity,seeds,alignment_mean,alignment_std,"
         "nll_mean,nll_std,distinct_mean,distinct_std,coverage_mean,"
         "plausibility_mean\n";
  char buf[256];
  for (const auto& row : res.rows) {
    std::snprintf(buf, sizeof(buf),
                  "%s,%d,%d,%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  row.variant.c_str(), row.use_maer ? 1 : 0,
                  row.use_ambiguity ? 1 : 0, row.seed_count,
                  row.alignment_mean, row.alignment_std, row.nll_mean,
                  row.nll_std, row.distinct_mean, row.distinct_std,
                  row.coverage_mean, row.plausibility_mean);
    out << buf;
  }
}

void write_scatter_svg(const MetricSnapshot& snap, const std::string& path) {
  const int w = 640, h = 640, margin = 40;
  double xmin = snap.z.col(0).minCoeff(), xmax = snap.z.col(0).maxCoeff();
  double ymin = snap.z.col(1).minCoeff(), ymax = snap.z.col(1).maxCoeff();
  if (xmax - xmin < 1e-12) xmax = xmin + 1e-12;
  if (ymax - ymin < 1e-12) ymax = ymin + 1e-12;

  auto out = open_out(path);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" "
                "height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                w, h, w, h);
  out << buf;
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (Index i = 0; i < snap.z.rows(); ++i) {
    const double px =
        margin + (snap.z(i, 0) - xmin) / (xmax - xmin) * (w - 2 * margin);
    const double py =
        h - margin - (snap.z(i, 1) - ymin) / (ymax - ymin) * (h - 2 * margin);
    // low scores blue, high scores red
    const int r = static_cast<int>(255.0 * snap.y(i));
    const int b = 255 - r;
    std::snprintf(buf, sizeof(buf),
                  "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"4\" "
                  "fill=\"rgb(%d,40,%d)\" fill-opacity=\"0.8\"/>\n",
                  px, py, r, b);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "<text x=\"%d\" y=\"%d\" font-size=\"12\">metric embedding "
                "(n=%lld, h=%.4f)</text>\n",
                margin, h - 12, static_cast<long long>(snap.z.rows()),
                snap.bandwidth);
  out << buf;
  out << "</svg>\n";
}

void write_gradcheck_json(const GradCheckReport& rep,
                          const std::string& path) {
  json rows = json::array();
  for (const auto& r : rep.rows)
    rows.push_back(json{{"loss", r.loss},
                        {"group", r.group},
                        {"frozen", r.frozen},
                        {"max_rel_err", r.max_rel_err},
                        {"max_abs_diff", r.max_abs_diff},
                        {"noise_guard", r.noise_guard},
                        {"tolerance", r.tolerance},
                        {"pass", r.pass}});
  json j{{"fd_step", rep.fd_step}, {"all_pass", rep.all_pass},
         {"rows", rows}};
  auto out = open_out(path);
  out << j.dump(2) << "\n";
}

}  // namespace higen
