#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "ppgemo/dataset.hpp"
#include "ppgemo/error.hpp"
#include "ppgemo/gradcheck.hpp"
#include "ppgemo/loso.hpp"
#include "ppgemo/ppge_import.hpp"
#include "ppgemo/report.hpp"
#include "ppgemo/run_config.hpp"
#include "ppgemo/signal.hpp"
#include "ppgemo/synth.hpp"

namespace ppgemo::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("write failed for " + file.string());
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Config file, then --set pairs, then dedicated flags.
struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;

  void add_file_options(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override one config key (key=value), repeatable");
  }
  void add_flag(CLI::App* cmd, const std::string& flag, const std::string& key, const std::string& help) {
    cmd->add_option_function<std::string>(
        "--" + flag, [this, key](const std::string& v) { flags[key] = v; }, help);
  }

  RunConfig resolve() const {
    RunConfig rc;
    if (!config_file.empty()) apply_file(rc, config_file);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ppgemo::ConfigError("--set expects key=value, got '" + s + "'");
      set_value(rc, s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : flags) set_value(rc, k, v);
    rc.validate();
    return rc;
  }
};

void add_run_flags(ConfigOptions& opts, CLI::App* cmd) {
  opts.add_file_options(cmd);
  opts.add_flag(cmd, "dataset", "dataset", "canonical dataset directory");
  opts.add_flag(cmd, "out", "out", "output directory");
  opts.add_flag(cmd, "seed", "seed", "run seed");
}

std::vector<dsp::Segment> load_segments(const RunConfig& rc, std::ostream& out) {
  if (rc.dataset.empty()) throw ppgemo::ConfigError("no dataset given (--dataset or the 'dataset' key)");
  const auto ds = data::load_canonical(rc.dataset);
  auto pre = dsp::preprocess_dataset(ds, rc.filter, rc.segmenter);
  for (const auto& w : pre.warnings) out << "warning: " << w << "\n";
  if (pre.segments.empty()) throw DataError("dataset " + rc.dataset + " yields no segments");
  return std::move(pre.segments);
}

void require_single(const std::string& what, std::size_t n) {
  if (n != 1) throw ppgemo::ConfigError("train takes exactly one " + what + ", got " + std::to_string(n));
}

int cmd_synth(const data::SynthSpec& spec, const std::string& out_dir, std::ostream& out) {
  const auto ds = data::synth_dataset(spec);
  data::save_canonical(ds, out_dir);
  out << "wrote " << ds.records.size() << " records for " << ds.subject_count() << " subjects to " << out_dir
      << "\n";
  return 0;
}

int cmd_import(const std::string& raw, const std::string& out_dir, const data::ImportOptions& opt, std::ostream& out) {
  const auto res = data::import_ppge_to(raw, out_dir, opt);
  out << "imported " << res.dataset.records.size() << " records for " << res.dataset.subject_count()
      << " subjects to " << out_dir << " (valence "
      << (res.valence_binary_passthrough ? "passthrough" : "binarized") << ", arousal "
      << (res.arousal_binary_passthrough ? "passthrough" : "binarized") << ")\n";
  return 0;
}

int cmd_preprocess(const RunConfig& rc, std::ostream& out) {
  if (rc.dataset.empty()) throw ppgemo::ConfigError("no dataset given (--dataset or the 'dataset' key)");
  const auto ds = data::load_canonical(rc.dataset);
  const auto pre = dsp::preprocess_dataset(ds, rc.filter, rc.segmenter);
  const fs::path dir = rc.out;
  fs::create_directories(dir / "segments");

  std::ostringstream index;
  index << "subject_id,trial_id,window,start,valence,arousal,file\n";
  std::map<std::pair<std::string, int>, std::size_t> counts;
  for (const auto& r : ds.records) counts[{r.subject_id, r.trial_id}] = 0;
  for (const auto& s : pre.segments) {
    const std::size_t w = counts[{s.subject_id, s.trial_id}]++;
    const std::string rel =
        "segments/" + s.subject_id + "_t" + std::to_string(s.trial_id) + "_w" + std::to_string(w) + ".txt";
    data::write_signal_file(dir / rel, s.samples);
    index << s.subject_id << ',' << s.trial_id << ',' << w << ',' << s.start << ',' << s.valence << ','
          << s.arousal << ',' << rel << "\n";
  }
  write_text(dir / "segments.csv", index.str());

  nlohmann::json summary{{"records", ds.records.size()},
                         {"segments", pre.segments.size()},
                         {"window_samples", rc.segmenter.window_samples()},
                         {"stride_samples", rc.segmenter.stride_samples()},
                         {"warnings", pre.warnings}};
  nlohmann::json per_record = nlohmann::json::array();
  for (const auto& [key, n] : counts) {
    per_record.push_back({{"subject_id", key.first}, {"trial_id", key.second}, {"segments", n}});
  }
  summary["per_record"] = per_record;
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  write_text(dir / "config.txt", to_text(rc));
  for (const auto& w : pre.warnings) out << "warning: " << w << "\n";
  out << "wrote " << pre.segments.size() << " segments from " << ds.records.size() << " records to " << rc.out
      << "\n";
  return 0;
}

int cmd_train(const RunConfig& rc, const std::string& fit_list, const std::string& val_list, std::ostream& out) {
  require_single("variant", rc.variants.size());
  require_single("target", rc.targets.size());
  const auto segments = load_segments(rc, out);
  std::vector<std::string> subjects;
  for (const auto& s : segments) subjects.push_back(s.subject_id);

  std::vector<std::string> fit_subjects = split_list(fit_list);
  std::vector<std::string> val_subjects = split_list(val_list);
  if (fit_subjects.empty() && val_subjects.empty()) {
    std::tie(fit_subjects, val_subjects) =
        train::make_validation_split(subjects, rc.train.val_fraction_subjects, derive_seed(rc.seed, {1}));
  } else if (fit_subjects.empty() || val_subjects.empty()) {
    throw ppgemo::ConfigError("give both --fit-subjects and --val-subjects, or neither");
  }
  const auto fit = train::select_subjects(segments, fit_subjects);
  const auto val = train::select_subjects(segments, val_subjects);
  if (fit.empty()) throw DataError("training subjects select no segments");
  if (val.empty()) throw DataError("validation subjects select no segments");

  model::ModelConfig mc = rc.model;
  mc.variant = rc.variants.front();
  auto m = model::Model::build(mc, derive_seed(rc.seed, {2}));
  train::TrainConfig tc = rc.effective_train();
  tc.target = rc.targets.front();
  tc.seed = derive_seed(rc.seed, {3});
  const auto log = train::train(m, fit, val, tc);

  const fs::path dir = rc.out;
  fs::create_directories(dir);
  write_text(dir / "train_log.jsonl", log.to_jsonl());
  m.save(dir / "model.json");
  write_text(dir / "config.txt", to_text(rc));
  out << "trained " << model::to_string(mc.variant) << " on " << fit.size() << " segments; best epoch "
      << log.best_epoch << " of " << log.stop_epoch << ", val accuracy "
      << log.epochs[static_cast<std::size_t>(log.best_epoch - 1)].val_accuracy << "\n";
  return 0;
}

int cmd_loso(const RunConfig& rc, std::ostream& out) {
  const auto segments = load_segments(rc, out);
  const fs::path dir = rc.out;
  fs::create_directories(dir);
  write_text(dir / "config.txt", to_text(rc));

  eval::LosoConfig lc;
  lc.model = rc.model;
  lc.train = rc.effective_train();
  lc.aggregation = rc.aggregation;
  lc.jobs = rc.jobs;

  std::vector<eval::EvalReport> reports;
  for (const auto variant : rc.variants) {
    const std::string vname = model::to_string(variant);
    auto progress = [&](const eval::FoldOutcome& f) {
      out << vname << " " << train::to_string(f.target) << " fold " << f.fold_index << " (" << f.test_subject
          << "): accuracy " << f.metrics.accuracy << ", auc " << eval::format_metric(f.metrics.auc) << "\n";
      out.flush();
    };
    const auto result = eval::run_loso(segments, variant, rc.targets, lc, progress);
    for (const auto& f : result.folds) {
      char idx[16];
      std::snprintf(idx, sizeof idx, "%02zu", f.fold_index);
      const std::string stem = vname + "_" + train::to_string(f.target) + "_fold" + idx;
      write_text(dir / "folds" / (stem + ".json"), eval::to_json(f).dump(2) + "\n");
      write_text(dir / "logs" / (stem + ".jsonl"), f.log.to_jsonl());
    }
    for (const auto& w : result.report.warnings) out << "warning: " << w << "\n";
    reports.push_back(result.report);
  }

  if (reports.size() == 1) {
    write_text(dir / "report.json", eval::serialize(reports.front()));
  } else {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(eval::to_json(r));
    write_text(dir / "report.json", arr.dump(2) + "\n");
  }
  write_text(dir / "report.csv", eval::render_csv(reports));
  const std::string md = eval::render_markdown(reports);
  write_text(dir / "report.md", md);
  out << md;
  return 0;
}

int cmd_report(const std::string& input, const std::string& out_dir, const std::string& format, std::ostream& out) {
  const auto reports = eval::load_reports(input);
  const std::string csv = eval::render_csv(reports);
  const std::string md = eval::render_markdown(reports);
  if (!out_dir.empty()) {
    write_text(fs::path(out_dir) / "report.csv", csv);
    write_text(fs::path(out_dir) / "report.md", md);
  }
  out << (format == "csv" ? csv : md);
  return 0;
}

int cmd_gradcheck(const nn::GradCheckOptions& opt, std::ostream& out) {
  const auto results = nn::run_gradcheck_suite(opt);
  bool ok = true;
  for (const auto& r : results) {
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %s  cases %d  max rel error %.3e", r.layer.c_str(),
                  r.passed ? "PASS" : "FAIL", r.cases, r.max_rel_error);
    out << line;
    if (!r.passed) out << "  worst: " << r.worst_case;
    out << "\n";
    ok = ok && r.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"PPG emotion classification pipeline", "ppgemo"};
  app.require_subcommand(1);

  data::SynthSpec synth_spec;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "write a synthetic canonical dataset");
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--subjects", synth_spec.n_subjects, "number of subjects");
  synth->add_option("--trials", synth_spec.trials_per_subject, "trials per subject");
  synth->add_option("--duration", synth_spec.duration_s, "seconds per trial");
  synth->add_option("--fs", synth_spec.fs_hz, "sampling rate (Hz)");
  synth->add_option("--seed", synth_spec.seed, "generator seed");
  synth->add_option("--noise", synth_spec.noise_level, "white-noise standard deviation");
  synth->add_option("--wander", synth_spec.baseline_wander, "baseline-wander amplitude");
  synth->add_option("--min-window", synth_spec.min_window_s, "shortest segment window (s) the records must cover");

  std::string raw_dir, import_out;
  data::ImportOptions import_opt;
  auto* import = app.add_subcommand("import-ppge", "convert a raw PPGE download to the canonical format");
  import->add_option("raw", raw_dir, "raw dataset directory (holds labels.csv)")->required();
  import->add_option("--out", import_out, "canonical output directory")->required();
  import->add_option("--threshold", import_opt.threshold, "rating threshold: label 1 when rating >= threshold");
  import->add_option("--fs", import_opt.fs_hz, "sampling rate of the raw signals (Hz)");
  import->add_option("--name", import_opt.name, "dataset name");

  ConfigOptions pre_opts;
  auto* preprocess = app.add_subcommand("preprocess", "filter, segment and standardise a dataset");
  add_run_flags(pre_opts, preprocess);

  ConfigOptions train_opts;
  std::string fit_list, val_list;
  auto* train_cmd = app.add_subcommand("train", "train one variant on an explicit subject split");
  add_run_flags(train_opts, train_cmd);
  train_opts.add_flag(train_cmd, "variant", "variant", "cnn | cnn_lstm | cnn_tcn_lstm");
  train_opts.add_flag(train_cmd, "target", "target", "valence | arousal");
  train_cmd->add_option("--fit-subjects", fit_list, "comma-separated training subjects");
  train_cmd->add_option("--val-subjects", val_list, "comma-separated validation subjects");

  ConfigOptions loso_opts;
  auto* loso = app.add_subcommand("loso", "leave-one-subject-out evaluation");
  add_run_flags(loso_opts, loso);
  loso_opts.add_flag(loso, "variant", "variant", "comma list of variants, or 'all'");
  loso_opts.add_flag(loso, "target", "target", "comma list of targets, or 'both'");
  loso_opts.add_flag(loso, "jobs", "jobs", "concurrent folds");
  loso_opts.add_flag(loso, "aggregation", "aggregation", "segment | trial_vote");

  std::string report_in, report_out, report_format = "markdown";
  auto* report = app.add_subcommand("report", "render a saved report as a table");
  report->add_option("input", report_in, "report.json")->required()->check(CLI::ExistingFile);
  report->add_option("--out", report_out, "directory for report.csv and report.md");
  report->add_option("--format", report_format, "stdout format")->check(CLI::IsMember({"markdown", "csv"}));

  nn::GradCheckOptions grad_opt;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks for every layer");
  gradcheck->add_option("--cases", grad_opt.cases, "random configurations per layer")->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", grad_opt.seed, "case seed");
  gradcheck->add_option("--tolerance", grad_opt.tolerance, "max relative error");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_spec, synth_out, out);
    if (import->parsed()) return cmd_import(raw_dir, import_out, import_opt, out);
    if (preprocess->parsed()) return cmd_preprocess(pre_opts.resolve(), out);
    if (train_cmd->parsed()) return cmd_train(train_opts.resolve(), fit_list, val_list, out);
    if (loso->parsed()) return cmd_loso(loso_opts.resolve(), out);
    if (report->parsed()) return cmd_report(report_in, report_out, report_format, out);
    if (gradcheck->parsed()) return cmd_gradcheck(grad_opt, out);
  } catch (const ppgemo::Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace ppgemo::cli
