#pragma once

#include <array>
#include <cstdint>

#include "ppgemo/dataset.hpp"

namespace ppgemo::data {

// Generator for pulse-like signals whose valence class shifts the heart-rate
// mean and variability, and whose arousal class changes pulse morphology
// (second-harmonic strength). Each subject gets every (valence, arousal)
// combination when trials_per_subject is a multiple of 4.
struct SynthSpec {
  int n_subjects = 6;
  int trials_per_subject = 4;
  double duration_s = 120.0;
  double fs_hz = 100.0;
  std::uint64_t seed = 1;

  // Indexed by valence class.
  std::array<double, 2> hr_mean_hz{1.1, 1.5};
  std::array<double, 2> hr_variability_hz{0.02, 0.12};
  // Indexed by arousal class.
  std::array<double, 2> second_harmonic{0.15, 0.5};

  double subject_hr_spread_hz = 0.08;
  double noise_level = 0.1;
  double baseline_wander = 0.3;
  // Minimum duration the caller will segment with; generation rejects
  // shorter records.
  double min_window_s = 60.0;

  void validate() const;
};

Dataset synth_dataset(const SynthSpec& spec);

}  // namespace ppgemo::data
