#include "ppgemo/ppge_import.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "ppgemo/error.hpp"

namespace ppgemo::data {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n\"");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n\"");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split_fields(const std::string& line) {
  const char sep = line.find(',') != std::string::npos ? ',' : (line.find(';') != std::string::npos ? ';' : '\t');
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(trim(cell));
  return out;
}

bool to_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string where(const fs::path& file, std::size_t line) { return file.string() + ":" + std::to_string(line); }

struct RawLabel {
  std::string subject;
  int trial = 0;
  double valence = 0;
  double arousal = 0;
  std::string file;
  std::size_t line = 0;
};

std::vector<RawLabel> read_labels(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(file.string() + ": cannot open label file");
  const std::map<std::string, std::string> aliases{
      {"subject", "subject"}, {"subject_id", "subject"}, {"participant", "subject"},
      {"trial", "trial"},     {"trial_id", "trial"},     {"valence", "valence"},
      {"arousal", "arousal"}, {"file", "file"},          {"signal_file", "file"}};

  std::map<std::string, std::size_t> col;
  std::vector<RawLabel> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_fields(line);
    if (col.empty()) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (auto it = aliases.find(lower(cells[i])); it != aliases.end()) col[it->second] = i;
      }
      for (const char* need : {"subject", "trial", "valence", "arousal"}) {
        if (!col.count(need)) {
          throw DataError(where(file, line_no) + ": label header lacks a '" + need + "' column");
        }
      }
      continue;
    }
    auto cell = [&](const char* name) -> std::string {
      const std::size_t i = col.at(name);
      if (i >= cells.size()) throw DataError(where(file, line_no) + ": missing '" + name + "' field");
      return cells[i];
    };
    RawLabel r;
    r.line = line_no;
    r.subject = cell("subject");
    if (r.subject.empty()) throw DataError(where(file, line_no) + ": empty subject");
    double trial = 0;
    if (!to_double(cell("trial"), trial) || trial != std::floor(trial) || trial < 1) {
      throw DataError(where(file, line_no) + ": trial '" + cell("trial") + "' is not a positive integer");
    }
    r.trial = static_cast<int>(trial);
    if (!to_double(cell("valence"), r.valence)) {
      throw DataError(where(file, line_no) + ": valence '" + cell("valence") + "' is not numeric");
    }
    if (!to_double(cell("arousal"), r.arousal)) {
      throw DataError(where(file, line_no) + ": arousal '" + cell("arousal") + "' is not numeric");
    }
    if (col.count("file") && col.at("file") < cells.size()) r.file = cells[col.at("file")];
    out.push_back(std::move(r));
  }
  if (out.empty()) throw DataError(file.string() + ": no label rows");
  return out;
}

std::vector<double> read_raw_signal(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(file.string() + ": cannot open raw signal file");
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> column;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_fields(line);
    if (!column) {
      double probe = 0;
      if (!to_double(cells.back(), probe)) {
        // Header row.
        column = cells.size() - 1;
        for (std::size_t i = 0; i < cells.size(); ++i) {
          if (lower(cells[i]) == "ppg") column = i;
        }
        continue;
      }
      column = cells.size() - 1;
    }
    if (*column >= cells.size()) {
      throw DataError(where(file, line_no) + ": expected at least " + std::to_string(*column + 1) + " columns");
    }
    double v = 0;
    if (!to_double(cells[*column], v)) {
      throw DataError(where(file, line_no) + ": non-numeric sample '" + cells[*column] + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw DataError(file.string() + ": no samples");
  return out;
}

bool all_binary(const std::vector<RawLabel>& rows, double RawLabel::*field) {
  return std::all_of(rows.begin(), rows.end(), [&](const RawLabel& r) { return r.*field == 0.0 || r.*field == 1.0; });
}

void check_ratings(const std::vector<RawLabel>& rows, double RawLabel::*field, const char* name,
                   const fs::path& file) {
  for (const auto& r : rows) {
    const double v = r.*field;
    if (v < 1.0 || v > 9.0) {
      throw DataError(where(file, r.line) + ": " + name + " rating " + std::to_string(v) + " outside 1..9");
    }
  }
}

}  // namespace

int binarize_rating(double rating, double threshold) { return rating >= threshold ? 1 : 0; }

ImportResult import_ppge(const fs::path& raw_dir, const ImportOptions& options) {
  if (!(options.fs_hz > 0.0)) throw ConfigError("import: fs_hz must be > 0");
  const fs::path labels_file = raw_dir / "labels.csv";
  if (!fs::exists(labels_file)) throw IoError(labels_file.string() + ": label file not found");
  const auto rows = read_labels(labels_file);

  ImportResult res;
  res.valence_binary_passthrough = all_binary(rows, &RawLabel::valence);
  res.arousal_binary_passthrough = all_binary(rows, &RawLabel::arousal);
  if (!res.valence_binary_passthrough) check_ratings(rows, &RawLabel::valence, "valence", labels_file);
  if (!res.arousal_binary_passthrough) check_ratings(rows, &RawLabel::arousal, "arousal", labels_file);

  res.dataset.name = options.name;
  int max_trial = 1;
  for (const auto& r : rows) {
    LabelMapping m;
    m.subject_id = r.subject;
    m.trial_id = r.trial;
    m.raw_valence = r.valence;
    m.raw_arousal = r.arousal;
    m.valence = res.valence_binary_passthrough ? static_cast<int>(r.valence) : binarize_rating(r.valence, options.threshold);
    m.arousal = res.arousal_binary_passthrough ? static_cast<int>(r.arousal) : binarize_rating(r.arousal, options.threshold);

    const fs::path sig = raw_dir / (r.file.empty() ? r.subject + "/trial" + std::to_string(r.trial) + ".csv" : r.file);
    if (!fs::exists(sig)) {
      throw IoError(where(labels_file, r.line) + ": signal file " + sig.string() + " not found");
    }
    PpgRecord rec;
    rec.subject_id = r.subject;
    rec.trial_id = r.trial;
    rec.fs_hz = options.fs_hz;
    rec.samples = read_raw_signal(sig);
    rec.valence = m.valence;
    rec.arousal = m.arousal;
    res.dataset.records.push_back(std::move(rec));
    res.mappings.push_back(m);
    max_trial = std::max(max_trial, r.trial);
  }
  res.dataset.trials_per_subject = max_trial;
  try {
    res.dataset.validate();
  } catch (const DataError& e) {
    throw DataError(labels_file.string() + ": " + e.what());
  }
  return res;
}

ImportResult import_ppge_to(const fs::path& raw_dir, const fs::path& out_dir, const ImportOptions& options) {
  ImportResult res = import_ppge(raw_dir, options);
  save_canonical(res.dataset, out_dir);
  std::ofstream log(out_dir / "import_log.csv");
  if (!log) throw IoError((out_dir / "import_log.csv").string() + ": cannot write import log");
  log << "subject_id,trial_id,raw_valence,valence,valence_rule,raw_arousal,arousal,arousal_rule\n";
  const std::string thr = format_double(options.threshold);
  const std::string v_rule = res.valence_binary_passthrough ? "passthrough" : "rating>=" + thr;
  const std::string a_rule = res.arousal_binary_passthrough ? "passthrough" : "rating>=" + thr;
  for (const auto& m : res.mappings) {
    log << m.subject_id << ',' << m.trial_id << ',' << format_double(m.raw_valence) << ',' << m.valence << ','
        << v_rule << ',' << format_double(m.raw_arousal) << ',' << m.arousal << ',' << a_rule << '\n';
  }
  return res;
}

}  // namespace ppgemo::data
