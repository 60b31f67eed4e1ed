#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "ppgemo/metrics.hpp"
#include "ppgemo/training.hpp"

namespace ppgemo::eval {

struct MetricRow {
  double accuracy = 0.0;
  double f1_class0 = 0.0;
  double f1_class1 = 0.0;
  double weighted_f1 = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> auc;
  std::size_t auc_folds = 0;  // folds contributing to the AUC mean

  bool operator==(const MetricRow&) const = default;
};

struct TargetResult {
  train::Target target = train::Target::valence;
  std::vector<FoldMetrics> folds;
  MetricRow mean;

  bool operator==(const TargetResult&) const = default;
};

struct EvalReport {
  std::string variant;
  std::string aggregation = "segment";
  std::vector<TargetResult> targets;
  // Elementwise mean of the valence and arousal rows, present when both exist.
  std::optional<MetricRow> average;
  std::vector<std::string> warnings;

  bool operator==(const EvalReport&) const = default;
};

// Fold mean. Folds without an AUC are skipped for that column and noted in
// `warnings`.
MetricRow mean_row(const std::vector<FoldMetrics>& folds, const std::string& label,
                   std::vector<std::string>& warnings);

// Builds per-target means and the average row. DataError when targets repeat
// or when valence and arousal were evaluated over different folds.
EvalReport aggregate(const std::string& variant,
                     std::vector<std::pair<train::Target, std::vector<FoldMetrics>>> per_target,
                     Aggregation aggregation = Aggregation::segment);

nlohmann::json to_json(const FoldMetrics& m);
FoldMetrics fold_metrics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MetricRow& r);
MetricRow metric_row_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);

// Full-precision JSON text, two-space indent, trailing newline.
std::string serialize(const EvalReport& r);
EvalReport parse_report(const std::string& text);
EvalReport load_report(const std::filesystem::path& file);
// A report file may hold one report object or an array of them.
std::vector<EvalReport> load_reports(const std::filesystem::path& file);

// Two-decimal rendering; "n/a" for an undefined value.
std::string format_metric(std::optional<double> v);

// Table layout: one section per target plus the average section, one row per
// report (model variant).
std::string render_csv(const std::vector<EvalReport>& reports);
std::string render_markdown(const std::vector<EvalReport>& reports);

}  // namespace ppgemo::eval
