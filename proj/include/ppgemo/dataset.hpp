#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ppgemo::data {

struct PpgRecord {
  std::string subject_id;
  int trial_id = 1;
  double fs_hz = 100.0;
  std::vector<double> samples;
  int valence = 0;
  int arousal = 0;
};

struct Dataset {
  std::string name;
  int trials_per_subject = 4;
  std::vector<PpgRecord> records;

  // Distinct subject ids in first-appearance order.
  std::vector<std::string> subjects() const;
  std::size_t subject_count() const { return subjects().size(); }

  // Throws DataError on any violated record or dataset invariant.
  void validate() const;
};

// Canonical on-disk layout:
//   <dir>/manifest.csv  header: subject_id,trial_id,fs_hz,valence,arousal,signal_file
//   <dir>/dataset.json  optional: {"name": ..., "trials_per_subject": ...}
//   <dir>/<signal_file> one sample per line (a leading non-numeric header line
//                       is tolerated, so single-column CSV also loads)
inline constexpr const char* kManifestFile = "manifest.csv";
inline constexpr const char* kMetadataFile = "dataset.json";

Dataset load_canonical(const std::filesystem::path& dir);

// Signal files are written as signals/<subject>_t<trial>.txt using shortest
// round-trip decimal formatting, so save -> load is exact.
void save_canonical(const Dataset& dataset, const std::filesystem::path& dir);

// Reads a one-value-per-line file; errors name file and line.
std::vector<double> read_signal_file(const std::filesystem::path& file);
void write_signal_file(const std::filesystem::path& file, const std::vector<double>& samples);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

}  // namespace ppgemo::data
