#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ppgemo/metrics.hpp"
#include "ppgemo/model.hpp"
#include "ppgemo/signal.hpp"
#include "ppgemo/training.hpp"

namespace ppgemo::cli {

// Configuration file format: one `key = value` per line, `#` starts a comment,
// blank lines ignored. Keys:
//
//   dataset, out, variant (comma list), target (comma list), seed, jobs,
//   aggregation (segment | trial_vote), fs_hz
//   filter.order, filter.low_hz, filter.high_hz
//   segment.window_s, segment.overlap_s
//   model.conv1.filters, model.conv1.kernel, model.conv1.stride,
//   model.conv2.filters, model.conv2.kernel, model.conv2.stride,
//   model.pool_size, model.dropout, model.bn_momentum, model.bn_epsilon,
//   model.tcn.filters, model.tcn.kernel, model.tcn.dilations (comma list),
//   model.tcn.dropout, model.tcn.skip, model.lstm_units
//   train.batch_size, train.max_epochs, train.patience, train.learning_rate,
//   train.beta1, train.beta2, train.eps, train.val_fraction,
//   train.class_weights (per_fold | per_batch)
//
// The model input length is not a key: it follows segment.window_s * fs_hz.
struct RunConfig {
  dsp::FilterSpec filter;
  dsp::SegmenterSpec segmenter;
  model::ModelConfig model;
  train::TrainConfig train;
  std::string dataset;
  std::string out = "out";
  std::vector<model::Variant> variants{model::Variant::cnn_tcn_lstm};
  std::vector<train::Target> targets{train::Target::valence, train::Target::arousal};
  std::uint64_t seed = 42;
  std::size_t jobs = 1;
  eval::Aggregation aggregation = eval::Aggregation::segment;

  // Training settings with the run seed applied.
  train::TrainConfig effective_train() const;
  void validate() const;
};

// Sets one key. ConfigError on unknown keys or unparseable values.
void set_value(RunConfig& config, const std::string& key, const std::string& value);

// Applies every assignment in `file`; errors name the file and line.
void apply_file(RunConfig& config, const std::filesystem::path& file);
void apply_text(RunConfig& config, const std::string& text, const std::string& source = "<text>");

// Every key with its effective value, in the file format above.
std::string to_text(const RunConfig& config);

}  // namespace ppgemo::cli
