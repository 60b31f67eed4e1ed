#include "ppgemo/report.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "ppgemo/error.hpp"
#include "ppgemo/model.hpp"

namespace ppgemo::eval {

using nlohmann::json;

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string model_label(const std::string& variant) {
  try {
    return model::display_name(model::parse_variant(variant));
  } catch (const ConfigError&) {
    return variant;
  }
}

struct Section {
  std::string title;
  std::string key;
  std::vector<std::pair<std::string, std::optional<MetricRow>>> rows;
};

std::vector<Section> sections(const std::vector<EvalReport>& reports) {
  std::vector<Section> out;
  for (const train::Target t : {train::Target::valence, train::Target::arousal}) {
    Section s;
    s.key = train::to_string(t);
    s.title = t == train::Target::valence ? "Valence only" : "Arousal only";
    for (const auto& r : reports) {
      for (const auto& tr : r.targets) {
        if (tr.target == t) s.rows.emplace_back(model_label(r.variant), tr.mean);
      }
    }
    if (!s.rows.empty()) out.push_back(std::move(s));
  }
  Section avg{"Average of Valence and Arousal", "average", {}};
  for (const auto& r : reports) {
    if (r.average) avg.rows.emplace_back(model_label(r.variant), r.average);
  }
  if (!avg.rows.empty()) out.push_back(std::move(avg));
  return out;
}

std::vector<std::string> row_cells(const MetricRow& m) {
  return {format_metric(m.accuracy),    format_metric(m.f1_class0), format_metric(m.f1_class1),
          format_metric(m.weighted_f1), format_metric(m.auc),       format_metric(m.macro_f1)};
}

}  // namespace

MetricRow mean_row(const std::vector<FoldMetrics>& folds, const std::string& label,
                   std::vector<std::string>& warnings) {
  if (folds.empty()) throw DataError("aggregate: no folds for " + label);
  MetricRow r;
  double auc_sum = 0.0;
  for (const auto& f : folds) {
    r.accuracy += f.accuracy;
    r.f1_class0 += f.f1_class0;
    r.f1_class1 += f.f1_class1;
    r.weighted_f1 += f.weighted_f1;
    r.macro_f1 += f.macro_f1;
    if (f.auc) {
      auc_sum += *f.auc;
      ++r.auc_folds;
    } else {
      warnings.push_back(label + ": AUC undefined for test subject " + f.test_subject +
                         " (single-class labels); excluded from the mean");
    }
  }
  const double n = static_cast<double>(folds.size());
  r.accuracy /= n;
  r.f1_class0 /= n;
  r.f1_class1 /= n;
  r.weighted_f1 /= n;
  r.macro_f1 /= n;
  if (r.auc_folds > 0) r.auc = auc_sum / static_cast<double>(r.auc_folds);
  return r;
}

EvalReport aggregate(const std::string& variant,
                     std::vector<std::pair<train::Target, std::vector<FoldMetrics>>> per_target,
                     Aggregation aggregation) {
  EvalReport rep;
  rep.variant = variant;
  rep.aggregation = to_string(aggregation);
  std::set<train::Target> seen;
  for (auto& [target, folds] : per_target) {
    if (!seen.insert(target).second) {
      throw DataError("aggregate: target " + train::to_string(target) + " given twice");
    }
    TargetResult tr;
    tr.target = target;
    tr.mean = mean_row(folds, train::to_string(target), rep.warnings);
    tr.folds = std::move(folds);
    rep.targets.push_back(std::move(tr));
  }

  const TargetResult* val = nullptr;
  const TargetResult* aro = nullptr;
  for (const auto& tr : rep.targets) (tr.target == train::Target::valence ? val : aro) = &tr;
  if (val && aro) {
    if (val->folds.size() != aro->folds.size()) {
      throw DataError("aggregate: valence has " + std::to_string(val->folds.size()) + " folds, arousal " +
                      std::to_string(aro->folds.size()));
    }
    for (std::size_t i = 0; i < val->folds.size(); ++i) {
      if (val->folds[i].test_subject != aro->folds[i].test_subject) {
        throw DataError("aggregate: fold " + std::to_string(i) + " tests " + val->folds[i].test_subject +
                        " for valence but " + aro->folds[i].test_subject + " for arousal");
      }
    }
    const MetricRow& a = val->mean;
    const MetricRow& b = aro->mean;
    MetricRow avg;
    avg.accuracy = (a.accuracy + b.accuracy) / 2.0;
    avg.f1_class0 = (a.f1_class0 + b.f1_class0) / 2.0;
    avg.f1_class1 = (a.f1_class1 + b.f1_class1) / 2.0;
    avg.weighted_f1 = (a.weighted_f1 + b.weighted_f1) / 2.0;
    avg.macro_f1 = (a.macro_f1 + b.macro_f1) / 2.0;
    if (a.auc && b.auc) avg.auc = (*a.auc + *b.auc) / 2.0;
    avg.auc_folds = std::min(a.auc_folds, b.auc_folds);
    rep.average = avg;
  }
  return rep;
}

json to_json(const FoldMetrics& m) {
  return json{{"test_subject", m.test_subject}, {"n_items", m.n_items},         {"accuracy", m.accuracy},
              {"f1_class0", m.f1_class0},       {"f1_class1", m.f1_class1},     {"weighted_f1", m.weighted_f1},
              {"macro_f1", m.macro_f1},         {"auc", optional_json(m.auc)}};
}

FoldMetrics fold_metrics_from_json(const json& j) {
  FoldMetrics m;
  m.test_subject = j.at("test_subject").get<std::string>();
  m.n_items = j.at("n_items").get<std::size_t>();
  m.accuracy = j.at("accuracy").get<double>();
  m.f1_class0 = j.at("f1_class0").get<double>();
  m.f1_class1 = j.at("f1_class1").get<double>();
  m.weighted_f1 = j.at("weighted_f1").get<double>();
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.auc = optional_from(j, "auc");
  return m;
}

json to_json(const MetricRow& r) {
  return json{{"accuracy", r.accuracy},       {"f1_class0", r.f1_class0}, {"f1_class1", r.f1_class1},
              {"weighted_f1", r.weighted_f1}, {"macro_f1", r.macro_f1},   {"auc", optional_json(r.auc)},
              {"auc_folds", r.auc_folds}};
}

MetricRow metric_row_from_json(const json& j) {
  MetricRow r;
  r.accuracy = j.at("accuracy").get<double>();
  r.f1_class0 = j.at("f1_class0").get<double>();
  r.f1_class1 = j.at("f1_class1").get<double>();
  r.weighted_f1 = j.at("weighted_f1").get<double>();
  r.macro_f1 = j.at("macro_f1").get<double>();
  r.auc = optional_from(j, "auc");
  r.auc_folds = j.at("auc_folds").get<std::size_t>();
  return r;
}

json to_json(const EvalReport& r) {
  json targets = json::array();
  for (const auto& tr : r.targets) {
    json folds = json::array();
    for (const auto& f : tr.folds) folds.push_back(to_json(f));
    targets.push_back({{"target", train::to_string(tr.target)}, {"folds", folds}, {"mean", to_json(tr.mean)}});
  }
  return json{{"format", "ppgemo.report"},
              {"version", 1},
              {"variant", r.variant},
              {"aggregation", r.aggregation},
              {"targets", targets},
              {"average", r.average ? to_json(*r.average) : json(nullptr)},
              {"warnings", r.warnings}};
}

EvalReport report_from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != "ppgemo.report") {
      throw DataError("report: missing or unknown \"format\" (expected ppgemo.report)");
    }
    EvalReport r;
    r.variant = j.at("variant").get<std::string>();
    r.aggregation = j.value("aggregation", std::string{"segment"});
    for (const auto& t : j.at("targets")) {
      TargetResult tr;
      tr.target = train::parse_target(t.at("target").get<std::string>());
      for (const auto& f : t.at("folds")) tr.folds.push_back(fold_metrics_from_json(f));
      tr.mean = metric_row_from_json(t.at("mean"));
      r.targets.push_back(std::move(tr));
    }
    if (j.contains("average") && !j.at("average").is_null()) r.average = metric_row_from_json(j.at("average"));
    r.warnings = j.value("warnings", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("report: malformed JSON: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("report: ") + e.what());
  }
}

std::string serialize(const EvalReport& r) { return to_json(r).dump(2) + "\n"; }

EvalReport parse_report(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("report: invalid JSON: ") + e.what());
  }
  return report_from_json(j);
}

std::vector<EvalReport> load_reports(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open report " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw DataError(file.string() + ": invalid JSON: " + e.what());
  }
  std::vector<EvalReport> out;
  try {
    if (j.is_array()) {
      for (const auto& item : j) out.push_back(report_from_json(item));
    } else {
      out.push_back(report_from_json(j));
    }
  } catch (const DataError& e) {
    throw DataError(file.string() + ": " + e.what());
  }
  return out;
}

EvalReport load_report(const std::filesystem::path& file) {
  auto reports = load_reports(file);
  if (reports.size() != 1) {
    throw DataError(file.string() + ": expected one report, found " + std::to_string(reports.size()));
  }
  return reports.front();
}

std::string format_metric(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

std::string render_csv(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  out << "section,model,test_accuracy,f1_class0,f1_class1,weighted_f1,auc,macro_f1\n";
  for (const auto& s : sections(reports)) {
    for (const auto& [name, row] : s.rows) {
      out << s.key << ',' << name;
      for (const auto& cell : row_cells(*row)) out << ',' << cell;
      out << '\n';
    }
  }
  return out.str();
}

std::string render_markdown(const std::vector<EvalReport>& reports) {
  std::ostringstream out;
  for (const auto& s : sections(reports)) {
    out << "### " << s.title << "\n\n";
    out << "| Model | Test Accuracy | F1-score class 0 | F1-score class 1 | weighted F1 | AUC | macro F1 |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& [name, row] : s.rows) {
      out << "| " << name;
      for (const auto& cell : row_cells(*row)) out << " | " << cell;
      out << " |\n";
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace ppgemo::eval
