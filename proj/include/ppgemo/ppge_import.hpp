#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ppgemo/dataset.hpp"

namespace ppgemo::data {

// Raw layout accepted by the importer:
//
//   <raw>/labels.csv   columns (any order, case-insensitive):
//                        subject, trial, valence, arousal[, file]
//   <raw>/<file>       per-trial PPG; default path <subject>/trial<trial>.csv
//
// Signal files may carry a header row. With several columns, the column named
// "ppg" is used, otherwise the last one. Ratings on the 1..9 scale binarise as
// rating >= threshold -> 1; a label column whose values are all 0/1 is taken
// as already binary and passed through.
struct ImportOptions {
  double threshold = 5.0;
  double fs_hz = 100.0;
  std::string name = "ppge";
};

struct LabelMapping {
  std::string subject_id;
  int trial_id = 0;
  double raw_valence = 0;
  double raw_arousal = 0;
  int valence = 0;
  int arousal = 0;
};

struct ImportResult {
  Dataset dataset;
  std::vector<LabelMapping> mappings;
  bool valence_binary_passthrough = false;
  bool arousal_binary_passthrough = false;
};

int binarize_rating(double rating, double threshold);

ImportResult import_ppge(const std::filesystem::path& raw_dir, const ImportOptions& options);

// Imports, then writes the canonical dataset plus import_log.csv to out_dir.
ImportResult import_ppge_to(const std::filesystem::path& raw_dir,
                            const std::filesystem::path& out_dir,
                            const ImportOptions& options);

}  // namespace ppgemo::data
