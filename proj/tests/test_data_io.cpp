#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "ppgemo/dataset.hpp"
#include "ppgemo/error.hpp"
#include "ppgemo/metrics.hpp"
#include "ppgemo/ppge_import.hpp"
#include "ppgemo/signal.hpp"
#include "ppgemo/synth.hpp"

using namespace ppgemo;
using namespace ppgemo::data;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& file, const std::string& text) {
  fs::create_directories(file.parent_path());
  std::ofstream(file) << text;
}

std::string read_text(const fs::path& file) {
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

Dataset two_subject_fixture() {
  Dataset ds;
  ds.name = "fixture";
  ds.trials_per_subject = 2;
  const double values[] = {0.1, -2.5e-7, 1.0 / 3.0, 12345.678, -0.0, 3.0};
  for (const char* s : {"alice", "bob"}) {
    for (int t = 1; t <= 2; ++t) {
      PpgRecord r;
      r.subject_id = s;
      r.trial_id = t;
      r.fs_hz = 100.0;
      r.valence = t % 2;
      r.arousal = (t + 1) % 2;
      for (double v : values) r.samples.push_back(v * t + (s[0] == 'b' ? 0.5 : 0.0));
      ds.records.push_back(r);
    }
  }
  return ds;
}

// Magnitude of the DFT of x at frequency f.
double dft_magnitude(const std::vector<double>& x, double fs_hz, double f) {
  double re = 0, im = 0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double w = 2.0 * std::numbers::pi * f * static_cast<double>(n) / fs_hz;
    re += x[n] * std::cos(w);
    im -= x[n] * std::sin(w);
  }
  return std::hypot(re, im);
}

double dominant_frequency(const std::vector<double>& x, double fs_hz, double lo, double hi, double step) {
  double best_f = lo, best = -1;
  for (double f = lo; f <= hi; f += step) {
    const double m = dft_magnitude(x, fs_hz, f);
    if (m > best) best = m, best_f = f;
  }
  return best_f;
}

// Peak of the magnitude spectrum averaged over 10 s chunks.
double averaged_peak_frequency(const std::vector<double>& x, double fs_hz) {
  const auto chunk = static_cast<std::size_t>(10 * fs_hz);
  double best_f = 0, best = -1;
  for (double f = 0.7; f <= 3.2; f += 0.02) {
    double m = 0;
    for (std::size_t start = 0; start + chunk <= x.size(); start += chunk) {
      m += dft_magnitude(std::vector<double>(x.begin() + static_cast<std::ptrdiff_t>(start),
                                             x.begin() + static_cast<std::ptrdiff_t>(start + chunk)),
                         fs_hz, f);
    }
    if (m > best) best = m, best_f = f;
  }
  return best_f;
}

// Interquartile range of beat intervals from up-crossings of the isolated
// fundamental.
double beat_interval_iqr(const PpgRecord& r) {
  const double f0 = averaged_peak_frequency(r.samples, r.fs_hz);
  dsp::FilterSpec band;
  band.order = 2;
  band.low_hz = 0.7 * f0;
  band.high_hz = 1.35 * f0;
  band.fs_hz = r.fs_hz;
  const auto y = dsp::apply_filter(r.samples, band);
  std::vector<double> crossings;
  for (std::size_t i = static_cast<std::size_t>(5 * r.fs_hz); i + 1 < y.size(); ++i) {
    if (y[i] < 0.0 && y[i + 1] >= 0.0) crossings.push_back(static_cast<double>(i) + y[i] / (y[i] - y[i + 1]));
  }
  std::vector<double> iv;
  for (std::size_t i = 1; i < crossings.size(); ++i) iv.push_back((crossings[i] - crossings[i - 1]) / r.fs_hz);
  std::sort(iv.begin(), iv.end());
  return iv[3 * iv.size() / 4] - iv[iv.size() / 4];
}

void write_raw_fixture(const fs::path& raw, int subjects, const std::string& valence_col) {
  std::ostringstream labels;
  labels << "Subject;Trial;" << valence_col << ";Arousal\n";
  for (int s = 1; s <= subjects; ++s) {
    for (int t = 1; t <= 4; ++t) {
      const std::string id = "P" + std::to_string(s);
      labels << id << ';' << t << ';' << ((s + t) % 9 + 1) << ';' << (t % 2) << '\n';
      std::ostringstream sig;
      sig << "time,ppg\n";
      for (int i = 0; i < 20; ++i) sig << i * 0.01 << ',' << (s * 100 + t * 10 + i) << '\n';
      write_text(raw / id / ("trial" + std::to_string(t) + ".csv"), sig.str());
    }
  }
  write_text(raw / "labels.csv", labels.str());
}

}  // namespace

TEST_SUITE("data_io") {

TEST_CASE("canonical save and load round-trip exactly") {
  const auto dir = testing::temp_dir("canonical_rt");
  const Dataset ds = two_subject_fixture();
  save_canonical(ds, dir);
  const Dataset back = load_canonical(dir);
  CHECK(back.name == "fixture");
  CHECK(back.trials_per_subject == 2);
  CHECK(back.subjects() == std::vector<std::string>{"alice", "bob"});
  REQUIRE(back.records.size() == ds.records.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& a = ds.records[i];
    const auto& b = back.records[i];
    CHECK(a.subject_id == b.subject_id);
    CHECK(a.trial_id == b.trial_id);
    CHECK(a.fs_hz == b.fs_hz);
    CHECK(a.valence == b.valence);
    CHECK(a.arousal == b.arousal);
    CHECK(a.samples == b.samples);
  }
  CHECK(read_text(dir / kManifestFile).rfind("subject_id,trial_id,fs_hz,valence,arousal,signal_file\n", 0) == 0);
}

TEST_CASE("shortest decimal formatting parses back exactly") {
  Rng rng(1);
  for (int k = 0; k < 2000; ++k) {
    const double v = standard_normal(rng) * std::pow(10.0, uniform(rng, -12, 12));
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("manifest errors name the file and line") {
  const auto dir = testing::temp_dir("manifest_errors");
  write_text(dir / "a.txt", "1\n2\n");
  const std::string header = "subject_id,trial_id,fs_hz,valence,arousal,signal_file\n";

  write_text(dir / kManifestFile, header + "s1,1,100,0,1,a.txt\ns1,2,100,1,0,a.txt\ns1,1,100,1,1,a.txt\n");
  auto msg = error_of([&] { load_canonical(dir); });
  CHECK(msg.find("manifest.csv:4") != std::string::npos);
  CHECK(msg.find("(s1, trial 1)") != std::string::npos);

  write_text(dir / kManifestFile, header + "s1,1,100,7,1,a.txt\n");
  msg = error_of([&] { load_canonical(dir); });
  CHECK(msg.find("manifest.csv:2") != std::string::npos);
  CHECK(msg.find("'7'") != std::string::npos);

  write_text(dir / kManifestFile, header + "s1,1,100,0,1,missing.txt\n");
  CHECK_THROWS_AS(load_canonical(dir), IoError);

  write_text(dir / "bad.txt", "sample\n1.5\nabc\n");
  write_text(dir / kManifestFile, header + "s1,1,100,0,1,bad.txt\n");
  msg = error_of([&] { load_canonical(dir); });
  CHECK(msg.find("bad.txt:3") != std::string::npos);
  CHECK(msg.find("abc") != std::string::npos);

  write_text(dir / kManifestFile, "subject_id,trial_id,valence\n");
  msg = error_of([&] { load_canonical(dir); });
  CHECK(msg.find("manifest.csv:1") != std::string::npos);

  CHECK_THROWS_AS(load_canonical(dir / "nowhere"), IoError);
}

TEST_CASE("signal files tolerate a header line") {
  const auto dir = testing::temp_dir("signal_header");
  write_text(dir / "s.csv", "ppg\n1\n2.5\n-3\n");
  CHECK(read_signal_file(dir / "s.csv") == std::vector<double>{1, 2.5, -3});
  write_text(dir / "n.txt", "1\nnan\n");
  CHECK_THROWS_AS(read_signal_file(dir / "n.txt"), DataError);
}

TEST_CASE("dataset validation") {
  Dataset ds = two_subject_fixture();
  CHECK_NOTHROW(ds.validate());
  ds.records[1].trial_id = 1;
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds = two_subject_fixture();
  ds.records[0].valence = 2;
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds = two_subject_fixture();
  ds.records[0].samples[2] = std::nan("");
  CHECK_THROWS_AS(ds.validate(), DataError);
  ds = two_subject_fixture();
  ds.records[0].trial_id = 3;
  CHECK_THROWS_AS(ds.validate(), DataError);
}

TEST_CASE("synthetic datasets are deterministic and complete") {
  SynthSpec spec;
  const Dataset a = synth_dataset(spec);
  const Dataset b = synth_dataset(spec);
  REQUIRE(a.records.size() == 24);
  std::set<std::pair<std::string, int>> keys;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].samples == b.records[i].samples);
    CHECK(a.records[i].samples.size() == 12000);
    CHECK(keys.insert({a.records[i].subject_id, a.records[i].trial_id}).second);
  }
  CHECK(a.subject_count() == 6);
  for (const auto& subj : a.subjects()) {
    std::set<std::pair<int, int>> combos;
    for (const auto& r : a.records) {
      if (r.subject_id == subj) combos.insert({r.valence, r.arousal});
    }
    CHECK(combos.size() == 4);
  }
  spec.seed = 2;
  CHECK(synth_dataset(spec).records[0].samples != a.records[0].samples);
  spec.duration_s = 30.0;
  CHECK_THROWS_AS(synth_dataset(spec), ConfigError);
}

TEST_CASE("synthetic dominant frequency lies in the heart-rate band") {
  const Dataset ds = synth_dataset(SynthSpec{});
  for (const auto& r : ds.records) {
    const std::vector<double> head(r.samples.begin(), r.samples.begin() + 2000);
    const double f = dominant_frequency(head, r.fs_hz, 0.05, 10.0, 0.05);
    INFO(r.subject_id << " trial " << r.trial_id);
    CHECK(f >= 0.8);
    CHECK(f <= 3.0);
  }
}

TEST_CASE("synthetic valence is learnable from beat-interval variability") {
  const Dataset ds = synth_dataset(SynthSpec{});
  std::vector<double> x;
  std::vector<int> y;
  for (const auto& r : ds.records) {
    x.push_back(beat_interval_iqr(r));
    y.push_back(r.valence);
  }
  double mean = 0, sd = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  for (double v : x) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / static_cast<double>(x.size()));
  for (double& v : x) v = (v - mean) / sd;

  double w = 0, b = 0;
  for (int it = 0; it < 2000; ++it) {
    double gw = 0, gb = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double p = 1.0 / (1.0 + std::exp(-(w * x[i] + b)));
      gw += (p - y[i]) * x[i];
      gb += p - y[i];
    }
    w -= 0.1 * gw / static_cast<double>(x.size());
    b -= 0.1 * gb / static_cast<double>(x.size());
  }
  std::vector<double> scores;
  for (double v : x) scores.push_back(1.0 / (1.0 + std::exp(-(w * v + b))));
  const double a = eval::auc(scores, y);
  INFO("auc " << a << " weight " << w);
  CHECK(a > 0.8);
}

TEST_CASE("rating binarisation") {
  CHECK(binarize_rating(9, 5) == 1);
  CHECK(binarize_rating(1, 5) == 0);
  CHECK(binarize_rating(5, 5) == 1);
  CHECK(binarize_rating(4.5, 5) == 0);
  CHECK(binarize_rating(4.5, 4) == 1);
}

TEST_CASE("importer converts an 18-subject raw layout") {
  const auto root = testing::temp_dir("import_full");
  write_raw_fixture(root / "raw", 18, "Valence");
  ImportOptions opt;
  const auto res = import_ppge_to(root / "raw", root / "out", opt);
  CHECK(res.dataset.records.size() == 72);
  CHECK(res.dataset.subject_count() == 18);
  CHECK_FALSE(res.valence_binary_passthrough);
  CHECK(res.arousal_binary_passthrough);
  for (std::size_t i = 0; i < res.mappings.size(); ++i) {
    const auto& m = res.mappings[i];
    CHECK(m.valence == (m.raw_valence >= 5 ? 1 : 0));
    CHECK(m.arousal == static_cast<int>(m.raw_arousal));
    CHECK(res.dataset.records[i].fs_hz == 100.0);
  }
  const auto& r0 = res.dataset.records[0];
  CHECK(r0.samples.size() == 20);
  CHECK(r0.samples[0] == 110.0);

  const Dataset loaded = load_canonical(root / "out");
  CHECK(loaded.records.size() == 72);
  const std::string log = read_text(root / "out" / "import_log.csv");
  CHECK(log.rfind("subject_id,trial_id,raw_valence,valence,valence_rule,raw_arousal,arousal,arousal_rule\n", 0) == 0);
  CHECK(log.find("P1,1,3,0,rating>=5,1,1,passthrough\n") != std::string::npos);
  std::size_t lines = 0;
  for (char c : log) lines += c == '\n';
  CHECK(lines == 73);
}

TEST_CASE("importer honours the threshold and explicit file column") {
  const auto root = testing::temp_dir("import_opts");
  write_text(root / "raw" / "labels.csv", "participant,trial_id,valence,arousal,file\nx,1,6,2,sig/a.txt\nx,2,4,8,sig/b.txt\n");
  write_text(root / "raw" / "sig" / "a.txt", "1\n2\n3\n");
  write_text(root / "raw" / "sig" / "b.txt", "a\tb\n0\t4\n0\t5\n");
  ImportOptions opt;
  opt.threshold = 7;
  const auto res = import_ppge(root / "raw", opt);
  CHECK(res.mappings[0].valence == 0);
  CHECK(res.mappings[1].arousal == 1);
  CHECK(res.dataset.records[1].samples == std::vector<double>{4, 5});
}

TEST_CASE("importer errors point at the offending file") {
  const auto root = testing::temp_dir("import_errors");
  CHECK_THROWS_AS(import_ppge(root, ImportOptions{}), IoError);

  write_text(root / "labels.csv", "subject,trial,valence,arousal\nA,1,12,3\n");
  write_text(root / "A" / "trial1.csv", "1\n2\n");
  auto msg = error_of([&] { import_ppge(root, ImportOptions{}); });
  CHECK(msg.find("labels.csv:2") != std::string::npos);

  write_text(root / "labels.csv", "subject,trial,valence\nA,1,3\n");
  msg = error_of([&] { import_ppge(root, ImportOptions{}); });
  CHECK(msg.find("labels.csv:1") != std::string::npos);

  write_text(root / "labels.csv", "subject,trial,valence,arousal\nA,1,3,3\nA,2,3,3\n");
  msg = error_of([&] { import_ppge(root, ImportOptions{}); });
  CHECK(msg.find("labels.csv:3") != std::string::npos);
  CHECK(msg.find("trial2.csv") != std::string::npos);

  write_text(root / "labels.csv", "subject,trial,valence,arousal\nA,1,3,3\n");
  write_text(root / "A" / "trial1.csv", "ppg\n1\nx\n");
  msg = error_of([&] { import_ppge(root, ImportOptions{}); });
  CHECK(msg.find("trial1.csv:3") != std::string::npos);
}

}  // TEST_SUITE
