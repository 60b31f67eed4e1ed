#include "ppgemo/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "ppgemo/error.hpp"

namespace ppgemo::data {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kColumns{"subject_id", "trial_id", "fs_hz", "valence", "arousal", "signal_file"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

bool parse_int(const std::string& text, int& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

std::string record_name(const PpgRecord& r) { return "(" + r.subject_id + ", trial " + std::to_string(r.trial_id) + ")"; }

std::string signal_file_name(const PpgRecord& r) {
  return "signals/" + r.subject_id + "_t" + std::to_string(r.trial_id) + ".txt";
}

}  // namespace

std::vector<std::string> Dataset::subjects() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (seen.insert(r.subject_id).second) out.push_back(r.subject_id);
  }
  return out;
}

void Dataset::validate() const {
  if (trials_per_subject < 1) throw DataError("dataset: trials_per_subject must be >= 1");
  if (records.empty()) throw DataError("dataset: no records");
  std::set<std::pair<std::string, int>> keys;
  for (const auto& r : records) {
    const std::string name = record_name(r);
    if (r.subject_id.empty()) throw DataError("dataset: record with empty subject_id");
    if (r.subject_id.find_first_of(",/\\\n") != std::string::npos) {
      throw DataError("dataset: subject_id '" + r.subject_id + "' contains a reserved character");
    }
    if (!keys.insert({r.subject_id, r.trial_id}).second) throw DataError("dataset: duplicate record " + name);
    if (r.trial_id < 1 || r.trial_id > trials_per_subject) {
      throw DataError("dataset: record " + name + " has trial_id outside 1.." + std::to_string(trials_per_subject));
    }
    if (!(r.fs_hz > 0.0) || !std::isfinite(r.fs_hz)) throw DataError("dataset: record " + name + " has fs_hz <= 0");
    if (r.samples.empty()) throw DataError("dataset: record " + name + " has no samples");
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
      if (!std::isfinite(r.samples[i])) {
        throw DataError("dataset: record " + name + " has a non-finite sample at index " + std::to_string(i));
      }
    }
    if ((r.valence != 0 && r.valence != 1) || (r.arousal != 0 && r.arousal != 1)) {
      throw DataError("dataset: record " + name + " has a non-binary label");
    }
  }
}

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> read_signal_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError(file.string() + ": cannot open signal file");
  std::vector<double> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    double v = 0.0;
    if (!parse_double(t, v)) {
      if (line_no == 1 && out.empty()) continue;  // header
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": non-numeric sample '" + t + "'");
    }
    if (!std::isfinite(v)) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": non-finite sample '" + t + "'");
    }
    out.push_back(v);
  }
  if (out.empty()) throw DataError(file.string() + ": no samples");
  return out;
}

void write_signal_file(const fs::path& file, const std::vector<double>& samples) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw IoError(file.string() + ": cannot write signal file");
  std::string buf;
  for (double v : samples) {
    buf += format_double(v);
    buf += '\n';
  }
  out << buf;
  if (!out) throw IoError(file.string() + ": write failed");
}

Dataset load_canonical(const fs::path& dir) {
  const fs::path manifest = dir / kManifestFile;
  std::ifstream in(manifest);
  if (!in) throw IoError(manifest.string() + ": cannot open manifest");

  Dataset ds;
  ds.name = dir.filename().string();
  const fs::path meta = dir / kMetadataFile;
  if (fs::exists(meta)) {
    std::ifstream mi(meta);
    try {
      const auto j = nlohmann::json::parse(mi);
      ds.name = j.value("name", ds.name);
      ds.trials_per_subject = j.value("trials_per_subject", ds.trials_per_subject);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(meta.string() + ": " + e.what());
    }
  }

  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> col;
  std::map<std::pair<std::string, int>, std::size_t> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    const std::string where = manifest.string() + ":" + std::to_string(line_no);
    if (col.empty()) {
      for (std::size_t i = 0; i < cells.size(); ++i) col[cells[i]] = i;
      for (const auto& c : kColumns) {
        if (!col.count(c)) throw DataError(where + ": manifest header lacks column '" + c + "'");
      }
      continue;
    }
    if (cells.size() < col.size()) {
      throw DataError(where + ": expected " + std::to_string(col.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    auto cell = [&](const char* name) { return cells[col.at(name)]; };
    auto binary = [&](const char* name) {
      int v = 0;
      if (!parse_int(cell(name), v) || (v != 0 && v != 1)) {
        throw DataError(where + ": " + name + " label '" + cell(name) + "' is not 0 or 1");
      }
      return v;
    };

    PpgRecord r;
    r.subject_id = cell("subject_id");
    if (r.subject_id.empty()) throw DataError(where + ": empty subject_id");
    if (!parse_int(cell("trial_id"), r.trial_id)) {
      throw DataError(where + ": trial_id '" + cell("trial_id") + "' is not an integer");
    }
    if (!parse_double(cell("fs_hz"), r.fs_hz) || !(r.fs_hz > 0.0)) {
      throw DataError(where + ": fs_hz '" + cell("fs_hz") + "' is not a positive number");
    }
    r.valence = binary("valence");
    r.arousal = binary("arousal");
    const auto key = std::make_pair(r.subject_id, r.trial_id);
    if (auto it = seen.find(key); it != seen.end()) {
      throw DataError(where + ": duplicate record (" + r.subject_id + ", trial " + std::to_string(r.trial_id) +
                      "), first seen on line " + std::to_string(it->second));
    }
    seen[key] = line_no;
    if (r.trial_id < 1 || r.trial_id > ds.trials_per_subject) {
      throw DataError(where + ": trial_id " + std::to_string(r.trial_id) + " outside 1.." +
                      std::to_string(ds.trials_per_subject));
    }
    const std::string rel = cell("signal_file");
    if (rel.empty()) throw DataError(where + ": empty signal_file");
    const fs::path sig = dir / rel;
    if (!fs::exists(sig)) throw IoError(where + ": signal file " + sig.string() + " does not exist");
    r.samples = read_signal_file(sig);
    ds.records.push_back(std::move(r));
  }
  if (col.empty()) throw DataError(manifest.string() + ": empty manifest");
  ds.validate();
  return ds;
}

void save_canonical(const Dataset& dataset, const fs::path& dir) {
  dataset.validate();
  fs::create_directories(dir / "signals");
  std::ofstream out(dir / kManifestFile);
  if (!out) throw IoError((dir / kManifestFile).string() + ": cannot write manifest");
  out << "subject_id,trial_id,fs_hz,valence,arousal,signal_file\n";
  for (const auto& r : dataset.records) {
    const std::string rel = signal_file_name(r);
    out << r.subject_id << ',' << r.trial_id << ',' << format_double(r.fs_hz) << ',' << r.valence << ','
        << r.arousal << ',' << rel << '\n';
    write_signal_file(dir / rel, r.samples);
  }
  std::ofstream meta(dir / kMetadataFile);
  meta << nlohmann::json{{"name", dataset.name}, {"trials_per_subject", dataset.trials_per_subject}}.dump(2)
       << '\n';
}

}  // namespace ppgemo::data
