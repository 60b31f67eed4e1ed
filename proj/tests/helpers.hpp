#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "ppgemo/dataset.hpp"
#include "ppgemo/model.hpp"
#include "ppgemo/signal.hpp"
#include "ppgemo/synth.hpp"

namespace testing {

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / ("ppgemo_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Closed-form Butterworth bandpass magnitude after the bilinear map.
inline double butterworth_bandpass_magnitude(int order, double low_hz, double high_hz, double fs_hz, double f_hz) {
  const double pi = std::numbers::pi;
  const double w_lo = 2.0 * fs_hz * std::tan(pi * low_hz / fs_hz);
  const double w_hi = 2.0 * fs_hz * std::tan(pi * high_hz / fs_hz);
  const double w0_sq = w_lo * w_hi;
  const double bw = w_hi - w_lo;
  const double omega = 2.0 * fs_hz * std::tan(pi * f_hz / fs_hz);
  const double ratio = (omega * omega - w0_sq) / (omega * bw);
  return 1.0 / std::sqrt(1.0 + std::pow(ratio, 2.0 * order));
}

inline double to_db(double mag) { return 20.0 * std::log10(mag); }

// Small architecture on 6 s windows so training tests stay fast.
inline ppgemo::model::ModelConfig small_model(ppgemo::model::Variant v = ppgemo::model::Variant::cnn_tcn_lstm) {
  ppgemo::model::ModelConfig c;
  c.input_len = 600;
  c.conv1 = {4, 16, 4};
  c.conv2 = {8, 8, 2};
  c.tcn_filters = 4;
  c.tcn_kernel = 4;
  c.tcn_dilations = {1, 2, 4};
  c.lstm_units = 4;
  c.variant = v;
  return c;
}

inline ppgemo::data::SynthSpec small_synth(int subjects = 4, std::uint64_t seed = 3) {
  ppgemo::data::SynthSpec s;
  s.n_subjects = subjects;
  s.trials_per_subject = 4;
  s.duration_s = 24.0;
  s.min_window_s = 6.0;
  s.seed = seed;
  return s;
}

inline ppgemo::dsp::SegmenterSpec small_segmenter() {
  ppgemo::dsp::SegmenterSpec s;
  s.window_s = 6.0;
  s.overlap_s = 0.0;
  return s;
}

inline std::vector<ppgemo::dsp::Segment> small_segments(int subjects = 4, std::uint64_t seed = 3) {
  const auto ds = ppgemo::data::synth_dataset(small_synth(subjects, seed));
  return ppgemo::dsp::preprocess_dataset(ds, ppgemo::dsp::FilterSpec{}, small_segmenter()).segments;
}

}  // namespace testing
