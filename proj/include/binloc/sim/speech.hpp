#pragma once

// Speech-like test signal: a harmonic complex with drifting pitch,
// syllable-rate amplitude modulation, irregular silent gaps, and a dash of
// broadband noise, RMS-normalized over the full clip.

#include <cmath>
#include <cstdint>
#include <vector>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"

namespace binloc {

namespace speechdetail {

constexpr double kPi = 3.14159265358979323846264338327950288;

// Piecewise-linear control track, one knot every `knot_s` seconds.
inline std::vector<double> drift_track(int n, int fs, double lo, double hi, double knot_s, Rng& rng) {
  const int knot = std::max(1, static_cast<int>(knot_s * fs));
  const int nknots = n / knot + 2;
  std::vector<double> knots(static_cast<size_t>(nknots));
  for (auto& k : knots) k = rng.uniform(lo, hi);
  std::vector<double> out(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int k = i / knot;
    const double frac = static_cast<double>(i - k * knot) / knot;
    out[static_cast<size_t>(i)] = knots[static_cast<size_t>(k)] * (1.0 - frac) +
                                  knots[static_cast<size_t>(k + 1)] * frac;
  }
  return out;
}

}  // namespace speechdetail

inline std::vector<double> synth_speechlike(double duration_s, uint64_t seed, int fs = 16000) {
  using namespace speechdetail;
  require(duration_s > 0, "speech duration must be positive");
  const int n = static_cast<int>(duration_s * fs);
  Rng rng(seed);

  std::vector<double> f0 = drift_track(n, fs, 100.0, 250.0, 0.25, rng);

  // syllable-rate AM: one modulation frequency per clip
  const double am_hz = rng.uniform(3.0, 6.0);
  const double am_phase = rng.uniform(0.0, 2.0 * kPi);

  // voiced/silent gate: alternating utterances and pauses with 5 ms ramps
  std::vector<double> gate(static_cast<size_t>(n), 0.0);
  {
    const int ramp = fs / 200;
    int pos = 0;
    bool voiced = rng.uniform() < 0.85;
    while (pos < n) {
      const int len = static_cast<int>(fs * (voiced ? rng.uniform(0.4, 1.2) : rng.uniform(0.15, 0.4)));
      if (voiced) {
        for (int i = 0; i < len && pos + i < n; ++i) {
          double g = 1.0;
          if (i < ramp) g = 0.5 - 0.5 * std::cos(kPi * i / ramp);
          const int from_end = len - 1 - i;
          if (from_end < ramp) g = std::min(g, 0.5 - 0.5 * std::cos(kPi * from_end / ramp));
          gate[static_cast<size_t>(pos + i)] = g;
        }
      }
      pos += len;
      voiced = !voiced;
    }
  }

  // harmonic complex, 1/k amplitudes, harmonics kept below 7 kHz
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  double phase = rng.uniform(0.0, 2.0 * kPi);
  for (int i = 0; i < n; ++i) {
    phase += 2.0 * kPi * f0[static_cast<size_t>(i)] / fs;
    if (phase > 2.0 * kPi) phase -= 2.0 * kPi;
    if (gate[static_cast<size_t>(i)] == 0.0) continue;
    const int kmax = static_cast<int>(7000.0 / f0[static_cast<size_t>(i)]);
    double s = 0.0;
    for (int k = 1; k <= kmax; ++k) s += std::sin(k * phase) / k;
    const double am = 0.55 + 0.45 * std::sin(2.0 * kPi * am_hz * i / fs + am_phase);
    x[static_cast<size_t>(i)] = s * am * gate[static_cast<size_t>(i)];
  }

  // 10% broadband noise relative to the voiced level, gated with the voicing
  // so pauses stay genuinely silent and per-frame activity varies
  double pw = 0.0;
  for (double v : x) pw += v * v;
  const double sig_rms = std::sqrt(pw / n);
  const double noise_amp = 0.1 * (sig_rms > 0 ? sig_rms : 1.0);
  for (int i = 0; i < n; ++i) x[static_cast<size_t>(i)] += noise_amp * rng.normal() * gate[static_cast<size_t>(i)];

  // exact full-clip RMS normalization
  pw = 0.0;
  for (double v : x) pw += v * v;
  const double rms = std::sqrt(pw / n);
  require(rms > 0, "synthesized signal is silent");
  for (auto& v : x) v /= rms;
  return x;
}

}  // namespace binloc
