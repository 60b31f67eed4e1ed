// Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on any
// FAIL. Criterion 9 runs only when PPGEMO_PPGE_DIR names an imported canonical
// PPGE dataset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "ppgemo/dataset.hpp"
#include "ppgemo/gradcheck.hpp"
#include "ppgemo/layers.hpp"
#include "ppgemo/loso.hpp"
#include "ppgemo/metrics.hpp"
#include "ppgemo/model.hpp"
#include "ppgemo/report.hpp"
#include "ppgemo/signal.hpp"
#include "ppgemo/synth.hpp"

using namespace ppgemo;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o) {
  const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
  if (o.verdict == Verdict::fail) ++failures;
  std::printf("%s %d %s: %s\n", tag, id, title.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

template <typename Fn>
void criterion(int id, const std::string& title, Fn fn) {
  try {
    report(id, title, fn());
  } catch (const std::exception& e) {
    report(id, title, {Verdict::fail, std::string("exception: ") + e.what()});
  }
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome pass_if(bool ok, const std::string& detail) { return {ok ? Verdict::pass : Verdict::fail, detail}; }

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nn::Tensor randn(const nn::Shape& shape, Rng& rng) {
  nn::Tensor t(shape);
  for (double& v : t.data()) v = standard_normal(rng);
  return t;
}

Outcome gradients() {
  nn::GradCheckOptions opt;  // 20 cases, step 1e-5, tolerance 1e-4
  const auto results = nn::run_gradcheck_suite(opt);
  const std::set<std::string> required{"conv1d_same", "conv1d_causal", "maxpool1d", "batchnorm_train",
                                       "dropout_frozen_mask", "lstm", "tcn", "dense_softmax_weighted_cce"};
  std::set<std::string> seen;
  bool ok = true;
  double worst = 0;
  std::string bad;
  for (const auto& r : results) {
    seen.insert(r.layer);
    worst = std::max(worst, r.max_rel_error);
    if (!r.passed || r.cases < 20 || !(r.max_rel_error < 1e-4)) {
      ok = false;
      bad += " " + r.layer;
    }
  }
  ok = ok && seen == required;
  return pass_if(ok, std::to_string(results.size()) + " layer kinds x 20 cases, max rel error " + fmt("%.2e", worst) +
                         (bad.empty() ? "" : ", failing:" + bad));
}

Outcome filter_response() {
  dsp::FilterSpec spec;  // order 3, 0.7-3.7 Hz, fs 100
  const auto sos = dsp::design_bandpass(spec);
  auto db = [&](double f) { return 20.0 * std::log10(dsp::magnitude_at(sos, f, spec.fs_hz)); };
  const double lo = db(0.7), hi = db(3.7), s1 = db(0.05), s2 = db(15.0);
  const bool ok = std::abs(lo + 3.0) <= 0.5 && std::abs(hi + 3.0) <= 0.5 && s1 <= -20.0 && s2 <= -20.0;
  return pass_if(ok, "0.7 Hz " + fmt("%.3f", lo) + " dB, 3.7 Hz " + fmt("%.3f", hi) + " dB, 0.05 Hz " +
                         fmt("%.1f", s1) + " dB, 15 Hz " + fmt("%.1f", s2) + " dB");
}

Outcome shape_trace() {
  auto m = model::Model::build(model::ModelConfig{}, 1);
  Rng rng(2);
  model::ShapeTrace trace;
  m.forward(randn({2, 6000, 1}, rng), nn::Mode::train, rng, &trace);
  const std::vector<std::pair<std::string, nn::Shape>> expected{
      {"conv1", {2, 1500, 8}}, {"pool1", {2, 750, 8}}, {"conv2", {2, 375, 16}}, {"pool2", {2, 187, 16}},
      {"tcn", {2, 8}},         {"lstm", {2, 12}},      {"concat", {2, 20}},     {"output", {2, 2}}};
  std::string got;
  bool ok = true;
  for (const auto& [stage, shape] : expected) {
    auto it = std::find_if(trace.begin(), trace.end(), [&](const auto& e) { return e.first == stage; });
    const bool match = it != trace.end() && it->second == shape;
    ok = ok && match;
    got += (got.empty() ? "" : " -> ") + (it == trace.end() ? stage + "?" : nn::shape_str(it->second));
  }
  return pass_if(ok, got);
}

Outcome tcn_structure() {
  Rng rng(3);
  nn::TcnSpec spec;  // kernel 32, dilations 1,2,4,8
  spec.in_channels = 16;
  const std::size_t rf = spec.receptive_field();
  bool causal = true, far_ok = true, near_seen = true;
  double far_max = 0;
  for (int trial = 0; trial < 3; ++trial) {
    nn::Tcn tcn("tcn", spec);
    tcn.init(rng);
    for (auto* p : tcn.parameters()) {
      for (double& v : p->value.data()) v = 0.3 * standard_normal(rng);
      ++p->version;
    }
    const std::size_t len = 1100;
    const nn::Tensor x = randn({1, len, 16}, rng);
    const nn::Tensor y = tcn.forward_sequence(x, nn::Mode::infer, rng);

    // Causality: a bump at t0 leaves every output before t0 unchanged.
    nn::Tensor xp = x;
    const std::size_t t0 = 100 + uniform_index(rng, 800);
    xp.at(0, t0, uniform_index(rng, 16)) += 1.0;
    const nn::Tensor yp = tcn.forward_sequence(xp, nn::Mode::infer, rng);
    for (std::size_t t = 0; t < t0; ++t) {
      for (std::size_t f = 0; f < spec.filters; ++f) causal = causal && yp.at(0, t, f) == y.at(0, t, f);
    }

    // Receptive field: bumps more than rf-1 steps back leave the last step unchanged.
    const nn::Tensor last = tcn.forward(x, nn::Mode::infer, rng);
    for (std::size_t back = rf; back < rf + 20 && back < len; ++back) {
      nn::Tensor xf = x;
      for (std::size_t c = 0; c < 16; ++c) xf.at(0, len - 1 - back, c) += 5.0;
      const nn::Tensor lf = tcn.forward(xf, nn::Mode::infer, rng);
      for (std::size_t f = 0; f < last.size(); ++f) far_max = std::max(far_max, std::abs(lf[f] - last[f]));
    }
    nn::Tensor xn = x;
    for (std::size_t c = 0; c < 16; ++c) xn.at(0, len - rf, c) += 5.0;
    const nn::Tensor ln = tcn.forward(xn, nn::Mode::infer, rng);
    double diff = 0;
    for (std::size_t f = 0; f < last.size(); ++f) diff += std::abs(ln[f] - last[f]);
    near_seen = near_seen && diff > 0.0;
  }
  far_ok = far_max <= 1e-12;
  return pass_if(rf == 931 && causal && far_ok && near_seen,
                 "receptive field " + std::to_string(rf) + ", causal " + (causal ? "yes" : "no") +
                     ", max change from bumps >= 931 steps back " + fmt("%.1e", far_max) +
                     ", bump 930 steps back visible " + (near_seen ? "yes" : "no"));
}

Outcome metric_oracles() {
  Rng rng(5);
  double worst_auc = 0, worst_cls = 0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = 2 + uniform_index(rng, 199);
    const std::size_t levels = 2 + uniform_index(rng, 10);
    std::vector<double> s(n);
    std::vector<int> y(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(uniform_index(rng, levels)) / static_cast<double>(levels);
      y[i] = static_cast<int>(uniform_index(rng, 2));
      p[i] = static_cast<int>(uniform_index(rng, 2));
    }
    y[0] = 0;
    y[1] = 1;
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        pairs += 1;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
    }
    worst_auc = std::max(worst_auc, std::abs(eval::auc(s, y) - wins / pairs));

    double cm[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < n; ++i) cm[y[i]][p[i]] += 1;
    auto f1 = [&](int c) {
      const double tp = cm[c][c], fp = cm[1 - c][c], fn = cm[c][1 - c];
      return tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0.0;
    };
    const double nn_ = static_cast<double>(n);
    const double acc = (cm[0][0] + cm[1][1]) / nn_;
    const double wf1 = ((cm[0][0] + cm[0][1]) * f1(0) + (cm[1][0] + cm[1][1]) * f1(1)) / nn_;
    worst_cls = std::max({worst_cls, std::abs(eval::accuracy(p, y) - acc), std::abs(eval::f1_per_class(p, y, 0) - f1(0)),
                          std::abs(eval::f1_per_class(p, y, 1) - f1(1)), std::abs(eval::weighted_f1(p, y) - wf1)});
  }
  const double example = eval::auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<int>{0, 0, 1, 1});
  const bool ok = worst_auc <= 1e-12 && worst_cls <= 1e-12 && example == 0.75;
  return pass_if(ok, "1000 tied instances, max |auc - brute| " + fmt("%.1e", worst_auc) + ", max confusion-oracle error " +
                         fmt("%.1e", worst_cls) + ", example auc " + fmt("%.4f", example));
}

Outcome loso_properties() {
  bool ok = true;
  Rng rng(6);
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + uniform_index(rng, 30);
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
    const auto folds = eval::loso_folds(ids);
    std::set<std::string> tested;
    ok = ok && folds.size() == n;
    for (const auto& f : folds) {
      ok = ok && tested.insert(f.test_subject).second;
      const std::set<std::string> tr(f.train_subjects.begin(), f.train_subjects.end());
      ok = ok && !tr.count(f.test_subject) && tr.size() + 1 == n;
    }
  }

  // A real run: fit, validation and test subjects partition the dataset and
  // every test item belongs to the held-out subject.
  data::SynthSpec spec;
  spec.duration_s = 24;
  spec.min_window_s = 6;
  spec.n_subjects = 5;
  const auto ds = data::synth_dataset(spec);
  dsp::SegmenterSpec seg;
  seg.window_s = 6;
  seg.overlap_s = 0;
  const auto segs = dsp::preprocess_dataset(ds, dsp::FilterSpec{}, seg).segments;
  std::map<std::string, std::size_t> per_subject;
  for (const auto& s : segs) ++per_subject[s.subject_id];

  eval::LosoConfig cfg;
  cfg.model.input_len = 600;
  cfg.model.conv1 = {4, 16, 4};
  cfg.model.conv2 = {8, 8, 2};
  cfg.model.tcn_filters = 4;
  cfg.model.tcn_kernel = 4;
  cfg.model.tcn_dilations = {1, 2};
  cfg.model.lstm_units = 4;
  cfg.train.batch_size = 16;
  cfg.train.max_epochs = 2;
  cfg.train.patience = 1;
  const auto res = eval::run_loso(segs, model::Variant::cnn_tcn_lstm, {train::Target::valence}, cfg);
  std::set<std::string> tested;
  for (const auto& f : res.folds) {
    ok = ok && tested.insert(f.test_subject).second;
    std::set<std::string> all(f.fit_subjects.begin(), f.fit_subjects.end());
    ok = ok && !f.val_subjects.empty() && !f.fit_subjects.empty();
    for (const auto& v : f.val_subjects) ok = ok && all.insert(v).second;
    ok = ok && all.insert(f.test_subject).second && all.size() == 5;
    ok = ok && f.metrics.n_items == per_subject[f.test_subject];
  }
  ok = ok && res.folds.size() == 5 && tested.size() == 5;
  return pass_if(ok, "100 random subject sets plus a 5-subject run: " + std::to_string(res.folds.size()) +
                         " folds, fit/val/test disjoint, whole subjects per fold");
}

Outcome learnability() {
  const auto start = std::chrono::steady_clock::now();
  data::SynthSpec spec;  // 6 subjects x 4 trials x 120 s, seed 1
  const auto ds = data::synth_dataset(spec);
  const auto segs = dsp::preprocess_dataset(ds, dsp::FilterSpec{}, dsp::SegmenterSpec{}).segments;
  eval::LosoConfig cfg;
  cfg.train.batch_size = 32;
  cfg.train.max_epochs = 200;
  cfg.train.patience = 30;
  cfg.train.seed = 42;
  const auto res = eval::run_loso(segs, model::Variant::cnn_tcn_lstm, {train::Target::valence}, cfg);
  double min_peak = 1.0;
  for (const auto& f : res.folds) {
    double peak = 0;
    for (const auto& e : f.log.epochs) peak = std::max(peak, e.train_accuracy);
    min_peak = std::min(min_peak, peak);
  }
  const auto& mean = res.report.targets.at(0).mean;
  const double auc = mean.auc.value_or(0.0);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool ok = min_peak >= 0.95 && auc >= 0.70 && secs < 600;
  return pass_if(ok, std::to_string(segs.size()) + " segments, min over folds of peak train accuracy " +
                         fmt("%.3f", min_peak) + ", mean LOSO AUC " + fmt("%.3f", auc) + " over " +
                         std::to_string(mean.auc_folds) + " folds, " + fmt("%.0f", secs) + " s");
}

Outcome table_consistency() {
  eval::FoldMetrics v, a;
  v.test_subject = a.test_subject = "s";
  v.auc = 0.66;
  a.auc = 0.69;
  const auto rep = eval::aggregate("cnn_tcn_lstm", {{train::Target::valence, {v}}, {train::Target::arousal, {a}}});
  const std::string text = eval::format_metric(rep.average->auc);
  const bool in_md = eval::render_markdown({rep}).find("| 0.68 |") != std::string::npos;
  return pass_if(text == "0.68" && in_md, "average of 0.66 and 0.69 = " + fmt("%.4f", *rep.average->auc) +
                                              ", rendered " + text);
}

Outcome ppge_dataset() {
  const char* dir = std::getenv("PPGEMO_PPGE_DIR");
  if (!dir || !*dir) return {Verdict::skip, "set PPGEMO_PPGE_DIR to an imported PPGE dataset to run"};
  const auto ds = data::load_canonical(dir);
  const auto segs = dsp::preprocess_dataset(ds, dsp::FilterSpec{}, dsp::SegmenterSpec{}).segments;
  eval::LosoConfig cfg;
  cfg.jobs = std::max(1u, std::thread::hardware_concurrency());
  const auto res = eval::run_loso(segs, model::Variant::cnn_tcn_lstm,
                                  {train::Target::valence, train::Target::arousal}, cfg);
  const double va = res.report.targets.at(0).mean.auc.value_or(0.0);
  const double ar = res.report.targets.at(1).mean.auc.value_or(0.0);
  return pass_if(std::abs(va - 0.66) <= 0.05 && std::abs(ar - 0.69) <= 0.05,
                 "valence AUC " + fmt("%.3f", va) + " (0.66 +- 0.05), arousal AUC " + fmt("%.3f", ar) +
                     " (0.69 +- 0.05)");
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "ppgemo_acceptance_determinism";
  fs::remove_all(root);
  auto call = [](std::vector<std::string> args) {
    args.insert(args.begin(), "ppgemo");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  };
  if (call({"synth", "--out", (root / "ds").string(), "--duration", "24", "--min-window", "6", "--seed", "11"}) != 0) {
    return {Verdict::fail, "synth failed"};
  }
  const std::vector<std::string> common{
      "loso", "--dataset", (root / "ds").string(), "--target", "both", "--seed", "13",
      "--set", "segment.window_s=6", "--set", "segment.overlap_s=0", "--set", "model.conv1.kernel=16",
      "--set", "model.conv1.filters=4", "--set", "model.conv2.kernel=8", "--set", "model.tcn.kernel=4",
      "--set", "model.tcn.dilations=1,2,4", "--set", "model.lstm_units=4", "--set", "train.batch_size=16",
      "--set", "train.max_epochs=4", "--set", "train.patience=3"};
  auto a = common, b = common;
  a.insert(a.end(), {"--jobs", "1", "--out", (root / "j1").string()});
  b.insert(b.end(), {"--jobs", "2", "--out", (root / "j2").string()});
  if (call(a) != 0 || call(b) != 0) return {Verdict::fail, "loso run failed"};

  std::size_t compared = 0;
  bool same = read_text(root / "j1" / "report.json") == read_text(root / "j2" / "report.json");
  ++compared;
  for (const auto& e : fs::directory_iterator(root / "j1" / "folds")) {
    same = same && read_text(e.path()) == read_text(root / "j2" / "folds" / e.path().filename());
    ++compared;
  }
  return pass_if(same && compared == 13, std::to_string(compared) + " metric JSON files compared between --jobs 1 and --jobs 2: " +
                                             (same ? "byte-identical" : "differ"));
}

}  // namespace

int main() {
  criterion(1, "gradient correctness", gradients);
  criterion(2, "filter response", filter_response);
  criterion(3, "shape trace", shape_trace);
  criterion(4, "tcn structure", tcn_structure);
  criterion(5, "metric oracles", metric_oracles);
  criterion(6, "loso properties", loso_properties);
  criterion(7, "end-to-end learnability", learnability);
  criterion(8, "table-internal consistency", table_consistency);
  criterion(9, "ppge dataset auc", ppge_dataset);
  criterion(10, "determinism across --jobs", determinism);
  std::printf("%s (%d failing)\n", failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED", failures);
  return failures ? 1 : 0;
}
