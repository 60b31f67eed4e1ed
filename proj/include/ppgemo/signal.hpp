#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ppgemo/dataset.hpp"

namespace ppgemo::dsp {

struct FilterSpec {
  int order = 3;
  double low_hz = 0.7;
  double high_hz = 3.7;
  double fs_hz = 100.0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct SegmenterSpec {
  double window_s = 60.0;
  double overlap_s = 5.0;
  double fs_hz = 100.0;

  void validate() const;
  std::size_t window_samples() const;
  std::size_t stride_samples() const;
};

// One biquad: b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
  std::array<double, 3> b{1.0, 0.0, 0.0};
  std::array<double, 2> a{0.0, 0.0};
};

using SosFilter = std::vector<Biquad>;

// Digital Butterworth bandpass via bilinear transform with frequency
// prewarping. Returns `order` second-order sections (2*order poles); the gain
// is normalised to unity at the prewarped geometric centre frequency.
SosFilter design_bandpass(const FilterSpec& spec);

// |H(e^{jw})| of the cascade at `freq_hz`.
double magnitude_at(const SosFilter& sos, double freq_hz, double fs_hz);

// Causal single pass through the cascade (transposed direct form II) starting
// from zero state. Throws DataError on the first non-finite sample.
std::vector<double> apply_filter(std::span<const double> signal, const SosFilter& sos);
std::vector<double> apply_filter(std::span<const double> signal, const FilterSpec& spec);

struct Window {
  std::size_t start = 0;
  std::vector<double> samples;
};

// Sliding windows [i*S, i*S + W). Throws DataError when the signal is shorter
// than one window.
std::vector<Window> segment(std::span<const double> signal, const SegmenterSpec& spec);

inline constexpr double kConstantGuard = 1e-8;

// Z-score with population standard deviation; all zeros when std < 1e-8.
std::vector<double> standardize(std::span<const double> window);

struct Segment {
  std::vector<double> samples;
  std::string subject_id;
  int trial_id = 0;
  int valence = 0;
  int arousal = 0;
  std::size_t start = 0;
};

struct PreprocessResult {
  std::vector<Segment> segments;
  std::vector<std::string> warnings;
};

// filter -> segment -> standardize for one record. Short records yield no
// segments and one warning.
PreprocessResult preprocess_record(const data::PpgRecord& record, const FilterSpec& fspec,
                                   const SegmenterSpec& sspec);

PreprocessResult preprocess_dataset(const data::Dataset& dataset, const FilterSpec& fspec,
                                    const SegmenterSpec& sspec);

}  // namespace ppgemo::dsp
