#include "ppgemo/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "ppgemo/error.hpp"
#include "ppgemo/random.hpp"

namespace ppgemo::data {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kHrMin = 0.8;
constexpr double kHrMax = 3.0;

std::string subject_name(int index, int count) {
  const int width = count >= 100 ? 3 : 2;
  char buf[16];
  std::snprintf(buf, sizeof buf, "s%0*d", width, index + 1);
  return buf;
}

}  // namespace

void SynthSpec::validate() const {
  if (n_subjects < 1) throw ConfigError("synth: n_subjects must be >= 1");
  if (trials_per_subject < 1) throw ConfigError("synth: trials_per_subject must be >= 1");
  if (!(fs_hz > 0.0)) throw ConfigError("synth: fs_hz must be > 0");
  if (!(duration_s > 0.0)) throw ConfigError("synth: duration_s must be > 0");
  if (duration_s * fs_hz < min_window_s * fs_hz) {
    throw ConfigError("synth: duration_s " + std::to_string(duration_s) + " is shorter than one window (" +
                      std::to_string(min_window_s) + " s)");
  }
  for (int c = 0; c < 2; ++c) {
    if (hr_mean_hz[c] < kHrMin || hr_mean_hz[c] > kHrMax) throw ConfigError("synth: hr_mean_hz outside 0.8..3.0");
    if (hr_variability_hz[c] < 0.0) throw ConfigError("synth: hr_variability_hz must be >= 0");
    if (second_harmonic[c] < 0.0) throw ConfigError("synth: second_harmonic must be >= 0");
  }
  if (subject_hr_spread_hz < 0.0 || noise_level < 0.0 || baseline_wander < 0.0) {
    throw ConfigError("synth: spread, noise and wander levels must be >= 0");
  }
}

Dataset synth_dataset(const SynthSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.name = "synthetic";
  ds.trials_per_subject = spec.trials_per_subject;
  const auto n = static_cast<std::size_t>(std::llround(spec.duration_s * spec.fs_hz));
  const double dt = 1.0 / spec.fs_hz;

  for (int s = 0; s < spec.n_subjects; ++s) {
    const auto subj = static_cast<std::uint64_t>(s);
    Rng subject_rng(derive_seed(spec.seed, {subj, 0}));
    const double hr_offset = uniform(subject_rng, -spec.subject_hr_spread_hz, spec.subject_hr_spread_hz);

    // Every (valence, arousal) pair in turn, then shuffled per subject.
    std::vector<std::pair<int, int>> labels;
    for (int t = 0; t < spec.trials_per_subject; ++t) labels.emplace_back((t / 2) % 2, t % 2);
    shuffle_in_place(labels, subject_rng);

    for (int t = 0; t < spec.trials_per_subject; ++t) {
      Rng rng(derive_seed(spec.seed, {subj, static_cast<std::uint64_t>(t) + 1}));
      const auto [v, a] = labels[static_cast<std::size_t>(t)];

      const double f0 = spec.hr_mean_hz[v] + hr_offset;
      const double var = spec.hr_variability_hz[v] * uniform(rng, 0.8, 1.2);
      const double mod1 = uniform(rng, 0.0, kTwoPi);
      const double mod2 = uniform(rng, 0.0, kTwoPi);
      const double h2 = spec.second_harmonic[a];
      const double psi2 = uniform(rng, 0.0, kTwoPi);
      const double psi3 = uniform(rng, 0.0, kTwoPi);
      const double wander_hz = uniform(rng, 0.05, 0.25);
      const double wander_phase = uniform(rng, 0.0, kTwoPi);
      double phase = uniform(rng, 0.0, kTwoPi);

      PpgRecord r;
      r.subject_id = subject_name(s, spec.n_subjects);
      r.trial_id = t + 1;
      r.fs_hz = spec.fs_hz;
      r.valence = v;
      r.arousal = a;
      r.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double time = static_cast<double>(i) * dt;
        const double hr = std::clamp(
            f0 + var * (0.6 * std::sin(kTwoPi * 0.25 * time + mod1) + 0.4 * std::sin(kTwoPi * 0.1 * time + mod2)),
            kHrMin, kHrMax);
        const double pulse = std::sin(phase) + h2 * std::sin(2.0 * phase + psi2) + 0.1 * std::sin(3.0 * phase + psi3);
        const double wander = spec.baseline_wander * std::sin(kTwoPi * wander_hz * time + wander_phase);
        r.samples[i] = pulse + wander + spec.noise_level * standard_normal(rng);
        phase += kTwoPi * hr * dt;
      }
      ds.records.push_back(std::move(r));
    }
  }
  ds.validate();
  return ds;
}

}  // namespace ppgemo::data
