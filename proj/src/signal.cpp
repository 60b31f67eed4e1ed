#include "ppgemo/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "ppgemo/error.hpp"

namespace ppgemo::dsp {

namespace {

using cplx = std::complex<double>;

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

cplx section_response(const Biquad& s, cplx z1) {
  // z1 = e^{-jw}
  const cplx num = s.b[0] + s.b[1] * z1 + s.b[2] * z1 * z1;
  const cplx den = 1.0 + s.a[0] * z1 + s.a[1] * z1 * z1;
  return num / den;
}

cplx cascade_response(const SosFilter& sos, double omega) {
  const cplx z1 = std::polar(1.0, -omega);
  cplx h{1.0, 0.0};
  for (const auto& s : sos) h *= section_response(s, z1);
  return h;
}

}  // namespace

void FilterSpec::validate() const {
  if (order < 1) throw ConfigError("filter.order must be >= 1 (got " + std::to_string(order) + ")");
  if (!(fs_hz > 0.0) || !std::isfinite(fs_hz)) throw ConfigError("filter.fs_hz must be positive (got " + fmt(fs_hz) + ")");
  if (!(low_hz > 0.0)) throw ConfigError("filter.low_hz must be > 0 (got " + fmt(low_hz) + ")");
  if (!(high_hz > low_hz)) {
    throw ConfigError("filter.high_hz must exceed filter.low_hz (got " + fmt(high_hz) + " <= " + fmt(low_hz) + ")");
  }
  if (!(high_hz < fs_hz / 2.0)) {
    throw ConfigError("filter.high_hz must be below Nyquist " + fmt(fs_hz / 2.0) + " (got " + fmt(high_hz) + ")");
  }
}

void SegmenterSpec::validate() const {
  if (!(fs_hz > 0.0)) throw ConfigError("segment.fs_hz must be positive (got " + fmt(fs_hz) + ")");
  if (!(window_s > 0.0)) throw ConfigError("segment.window_s must be positive (got " + fmt(window_s) + ")");
  if (!(overlap_s >= 0.0)) throw ConfigError("segment.overlap_s must be >= 0 (got " + fmt(overlap_s) + ")");
  if (!(overlap_s < window_s)) {
    throw ConfigError("segment.overlap_s must be smaller than segment.window_s (got " + fmt(overlap_s) + ")");
  }
  if (std::llround(window_s * fs_hz) < 1) throw ConfigError("segment.window_s yields an empty window");
  if (std::llround((window_s - overlap_s) * fs_hz) < 1) throw ConfigError("segment.overlap_s yields a zero stride");
}

std::size_t SegmenterSpec::window_samples() const {
  return static_cast<std::size_t>(std::llround(window_s * fs_hz));
}

std::size_t SegmenterSpec::stride_samples() const {
  return static_cast<std::size_t>(std::llround((window_s - overlap_s) * fs_hz));
}

SosFilter design_bandpass(const FilterSpec& spec) {
  spec.validate();
  const int n = spec.order;
  const double fs2 = 2.0 * spec.fs_hz;
  const double pi = std::numbers::pi;

  // Prewarped analog band edges (rad/s).
  const double w_lo = fs2 * std::tan(pi * spec.low_hz / spec.fs_hz);
  const double w_hi = fs2 * std::tan(pi * spec.high_hz / spec.fs_hz);
  const double bw = w_hi - w_lo;
  const double w0 = std::sqrt(w_lo * w_hi);

  // Lowpass prototype poles on the left unit semicircle, mapped to bandpass
  // (two analog poles per prototype pole), then to z by the bilinear map.
  std::vector<cplx> poles;
  poles.reserve(2 * static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const cplx p = std::polar(1.0, pi * (2.0 * k + n + 1) / (2.0 * n));
    const cplx half = p * bw / 2.0;
    const cplx root = std::sqrt(half * half - w0 * w0);
    for (const cplx s : {half + root, half - root}) {
      poles.push_back((fs2 + s) / (fs2 - s));
    }
  }

  // Pair conjugates; leftover real poles pair with each other.
  constexpr double kImagTol = 1e-12;
  std::vector<cplx> upper;
  std::vector<double> reals;
  for (const cplx& p : poles) {
    if (p.imag() > kImagTol) {
      upper.push_back(p);
    } else if (std::abs(p.imag()) <= kImagTol) {
      reals.push_back(p.real());
    }
  }
  std::sort(reals.begin(), reals.end());

  SosFilter sos;
  for (const cplx& p : upper) {
    Biquad s;
    s.b = {1.0, 0.0, -1.0};  // zeros at z = 1 and z = -1
    s.a = {-2.0 * p.real(), std::norm(p)};
    sos.push_back(s);
  }
  for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
    Biquad s;
    s.b = {1.0, 0.0, -1.0};
    s.a = {-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]};
    sos.push_back(s);
  }
  if (sos.size() != static_cast<std::size_t>(n)) {
    throw StateError("design_bandpass: pole pairing produced " + std::to_string(sos.size()) +
                     " sections, expected " + std::to_string(n));
  }

  const double omega_c = 2.0 * std::atan(w0 / fs2);
  const double g = std::abs(cascade_response(sos, omega_c));
  for (double& b : sos.front().b) b /= g;
  return sos;
}

double magnitude_at(const SosFilter& sos, double freq_hz, double fs_hz) {
  return std::abs(cascade_response(sos, 2.0 * std::numbers::pi * freq_hz / fs_hz));
}

std::vector<double> apply_filter(std::span<const double> signal, const SosFilter& sos) {
  if (signal.empty()) throw DataError("apply_filter: empty signal");
  for (std::size_t i = 0; i < signal.size(); ++i) {
    if (!std::isfinite(signal[i])) {
      throw DataError("apply_filter: non-finite sample at index " + std::to_string(i));
    }
  }
  std::vector<double> y(signal.begin(), signal.end());
  for (const Biquad& s : sos) {
    double z1 = 0.0;
    double z2 = 0.0;
    for (double& v : y) {
      const double in = v;
      const double out = s.b[0] * in + z1;
      z1 = s.b[1] * in - s.a[0] * out + z2;
      z2 = s.b[2] * in - s.a[1] * out;
      v = out;
    }
  }
  return y;
}

std::vector<double> apply_filter(std::span<const double> signal, const FilterSpec& spec) {
  return apply_filter(signal, design_bandpass(spec));
}

std::vector<Window> segment(std::span<const double> signal, const SegmenterSpec& spec) {
  spec.validate();
  const std::size_t w = spec.window_samples();
  const std::size_t s = spec.stride_samples();
  if (signal.size() < w) {
    throw DataError("segment: signal has " + std::to_string(signal.size()) +
                    " samples, fewer than one window of " + std::to_string(w));
  }
  const std::size_t count = (signal.size() - w) / s + 1;
  std::vector<Window> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto first = signal.begin() + static_cast<std::ptrdiff_t>(i * s);
    out.push_back({i * s, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(w))});
  }
  return out;
}

std::vector<double> standardize(std::span<const double> window) {
  if (window.size() < 2) {
    throw DataError("standardize: need at least 2 samples, got " + std::to_string(window.size()));
  }
  const double n = static_cast<double>(window.size());
  double mean = 0.0;
  for (const double v : window) mean += v;
  mean /= n;
  double var = 0.0;
  for (const double v : window) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);

  std::vector<double> out(window.size(), 0.0);
  if (sd < kConstantGuard) return out;
  for (std::size_t i = 0; i < window.size(); ++i) out[i] = (window[i] - mean) / sd;
  return out;
}

PreprocessResult preprocess_record(const data::PpgRecord& record, const FilterSpec& fspec,
                                   const SegmenterSpec& sspec) {
  fspec.validate();
  sspec.validate();
  if (record.fs_hz != fspec.fs_hz || record.fs_hz != sspec.fs_hz) {
    throw ConfigError("preprocess: record " + record.subject_id + "/trial " +
                      std::to_string(record.trial_id) + " sampled at " + fmt(record.fs_hz) +
                      " Hz but filter/segmenter expect " + fmt(fspec.fs_hz) + "/" + fmt(sspec.fs_hz) + " Hz");
  }

  PreprocessResult result;
  if (record.samples.size() < sspec.window_samples()) {
    result.warnings.push_back("record " + record.subject_id + "/trial " + std::to_string(record.trial_id) +
                              " has " + std::to_string(record.samples.size()) +
                              " samples, shorter than one window (" +
                              std::to_string(sspec.window_samples()) + "); skipped");
    return result;
  }

  const auto filtered = apply_filter(record.samples, fspec);
  for (auto& w : segment(filtered, sspec)) {
    Segment seg;
    seg.samples = standardize(w.samples);
    seg.subject_id = record.subject_id;
    seg.trial_id = record.trial_id;
    seg.valence = record.valence;
    seg.arousal = record.arousal;
    seg.start = w.start;
    result.segments.push_back(std::move(seg));
  }
  return result;
}

PreprocessResult preprocess_dataset(const data::Dataset& dataset, const FilterSpec& fspec,
                                    const SegmenterSpec& sspec) {
  PreprocessResult all;
  for (const auto& rec : dataset.records) {
    auto r = preprocess_record(rec, fspec, sspec);
    for (auto& s : r.segments) all.segments.push_back(std::move(s));
    for (auto& w : r.warnings) all.warnings.push_back(std::move(w));
  }
  return all;
}

}  // namespace ppgemo::dsp
