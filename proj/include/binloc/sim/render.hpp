#pragma once

// Source rendering: windowed-sinc fractional delays per channel, head-shadow
// band gains applied in the frequency domain, optional exponential-decay
// noise reverberation, and frequency-domain diffuse noise synthesis.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/sim/head.hpp"
#include "binloc/util/bands.hpp"
#include "binloc/util/fft.hpp"

namespace binloc {

using Channels = std::vector<std::vector<double>>;  // [3][n]: LF, LR, CF

namespace renderdetail {

constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr int kSincTaps = 32;

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = kPi * x;
  return std::sin(px) / px;
}

// y[i] = x[i - delay] via a Hann-windowed 32-tap sinc; out-of-range reads
// are zero. delay must be nonnegative.
inline std::vector<double> fractional_delay(const std::vector<double>& x, double delay_samples) {
  require(delay_samples >= 0.0, "fractional delay must be nonnegative");
  const int n = static_cast<int>(x.size());
  const int whole = static_cast<int>(std::floor(delay_samples));
  const double frac = delay_samples - whole;

  double taps[kSincTaps];
  double norm = 0.0;
  for (int k = 0; k < kSincTaps; ++k) {
    const int j = k - (kSincTaps / 2 - 1);  // j in [-15, 16]
    const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * (k + 0.5) / kSincTaps);
    taps[k] = sinc(static_cast<double>(j) - frac) * w;
    norm += taps[k];
  }
  for (double& t : taps) t /= norm;  // exact unit DC gain

  std::vector<double> y(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = 0; k < kSincTaps; ++k) {
      const int src = i - whole - (k - (kSincTaps / 2 - 1));
      if (src >= 0 && src < n) acc += x[static_cast<size_t>(src)] * taps[k];
    }
    y[static_cast<size_t>(i)] = acc;
  }
  return y;
}

// Multiplies a real signal's spectrum by per-band amplitude gains and an
// optional kernel spectrum, in one FFT round trip.
inline double interp_band_gain(double f, const double band_gains[kNumBands]) {
  const double lo = band_center(0);
  const double hi = band_center(kNumBands - 1);
  if (f <= lo) return band_gains[0];
  if (f >= hi) return band_gains[kNumBands - 1];
  const double pos = (f - lo) / band_width();
  const int k = std::min(kNumBands - 2, static_cast<int>(pos));
  const double frac = pos - k;
  return band_gains[k] * (1.0 - frac) + band_gains[k + 1] * frac;
}

inline std::vector<double> apply_spectral(const std::vector<double>& x, int fs,
                                          const double band_gains[kNumBands],
                                          const std::vector<double>* kernel) {
  const int n = static_cast<int>(x.size());
  const int total = n + (kernel ? static_cast<int>(kernel->size()) : 1) - 1;
  const int m = fftdetail::next_pow2(total);
  Fft fft(m);

  std::vector<double> padded(static_cast<size_t>(m), 0.0);
  std::copy(x.begin(), x.end(), padded.begin());
  std::vector<cplx> spec = fft.forward_real(padded);

  if (kernel) {
    std::vector<double> kp(static_cast<size_t>(m), 0.0);
    std::copy(kernel->begin(), kernel->end(), kp.begin());
    const std::vector<cplx> kspec = fft.forward_real(kp);
    for (size_t i = 0; i < spec.size(); ++i) spec[i] *= kspec[i];
  }
  // gains interpolate linearly between band centers; a continuous spectral
  // shape keeps the equivalent filter kernel compact, so gated sources do
  // not smear audible energy into their silent stretches
  for (int k = 0; k < static_cast<int>(spec.size()); ++k) {
    const double f = static_cast<double>(k) * fs / m;
    spec[static_cast<size_t>(k)] *= interp_band_gain(f, band_gains);
  }
  std::vector<double> y = fft.inverse_real(spec);
  y.resize(static_cast<size_t>(n));
  return y;
}

// delta + exponentially decaying noise tail whose energy relative to the
// direct path scales with T60.
inline std::vector<double> reverb_kernel(double t60_s, int fs, int pre_delay, Rng& rng) {
  const int len = pre_delay + static_cast<int>(t60_s * fs);
  std::vector<double> k(static_cast<size_t>(len), 0.0);
  k[0] = 1.0;
  const double gain = std::sqrt(2.0 * 6.9078 / fs);  // tail/direct energy == t60 seconds
  const double decay = 6.9078 / (t60_s * fs);        // ln(10^3): -60 dB over t60
  for (int i = pre_delay; i < len; ++i)
    k[static_cast<size_t>(i)] = gain * rng.normal() * std::exp(-decay * (i - pre_delay));
  return k;
}

}  // namespace renderdetail

// Renders a mono signal into the 3 device channels at a device-local
// azimuth. t60_s = 0 disables reverberation; the reverb tail noise derives
// from `seed` per channel.
inline Channels render_source(const std::vector<double>& signal, double local_deg,
                              const MicLayout& layout, double t60_s, uint64_t seed, int fs) {
  using namespace renderdetail;
  layout.validate();
  require(t60_s == 0.0 || (t60_s >= 0.05 && t60_s <= 2.0), "t60 must be 0 or in [0.05, 2] s");
  const ArrivalTimes at = arrival_times(local_deg, layout);
  const double delays[3] = {at.local_front * fs, at.local_rear * fs, at.contra_front * fs};

  // ipsilateral/contralateral split of the head-shadow level difference
  double gains_local[kNumBands], gains_contra[kNumBands];
  for (int b = 0; b < kNumBands; ++b) {
    const double ild_db = head_shadow_ild(local_deg, band_center(b), layout);
    gains_local[b] = std::pow(10.0, ild_db / 2.0 / 20.0);
    gains_contra[b] = std::pow(10.0, -ild_db / 2.0 / 20.0);
  }

  Channels out(3);
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> delayed = fractional_delay(signal, delays[ch]);
    const double* gains = (ch == 2) ? gains_contra : gains_local;
    if (t60_s > 0.0) {
      Rng krng(Rng::derive(seed, "reverb-tail", static_cast<uint64_t>(ch)));
      const std::vector<double> kernel = reverb_kernel(t60_s, fs, fs / 125, krng);
      out[static_cast<size_t>(ch)] = apply_spectral(delayed, fs, gains, &kernel);
    } else {
      out[static_cast<size_t>(ch)] = apply_spectral(delayed, fs, gains, nullptr);
    }
  }
  return out;
}

// Diffuse noise as 36 independent sources on a 10-degree ring, synthesized
// in the frequency domain and normalized to unit mean channel RMS.
inline Channels diffuse_noise(int64_t n_samples, const MicLayout& layout, uint64_t seed, int fs) {
  using namespace renderdetail;
  layout.validate();
  require(n_samples > 0, "noise length must be positive");
  const int m = fftdetail::next_pow2(static_cast<int>(n_samples));
  const int half = m / 2 + 1;
  Fft fft(m);

  std::vector<std::vector<cplx>> spec(3, std::vector<cplx>(static_cast<size_t>(half), cplx(0, 0)));
  std::vector<int> bin_band(static_cast<size_t>(half));
  for (int k = 0; k < half; ++k) bin_band[static_cast<size_t>(k)] = band_of(static_cast<double>(k) * fs / m);

  const int n_src = 36;
  for (int s = 0; s < n_src; ++s) {
    const double az = -180.0 + 360.0 * s / n_src;
    Rng rng(Rng::derive(seed, "diffuse-src", static_cast<uint64_t>(s)));
    const ArrivalTimes at = arrival_times(az, layout);
    const double t_ch[3] = {at.local_front, at.local_rear, at.contra_front};

    double g_local[kNumBands], g_contra[kNumBands];
    for (int b = 0; b < kNumBands; ++b) {
      const double ild_db = head_shadow_ild(az, band_center(b), layout);
      g_local[b] = std::pow(10.0, ild_db / 2.0 / 20.0);
      g_contra[b] = std::pow(10.0, -ild_db / 2.0 / 20.0);
    }

    // per-channel steering phasors advance by one bin per step
    cplx rot[3], cur[3];
    for (int ch = 0; ch < 3; ++ch) {
      const double ang = -2.0 * kPi * fs * t_ch[ch] / m;
      rot[ch] = cplx(std::cos(ang), std::sin(ang));
      cur[ch] = cplx(1.0, 0.0);
    }
    for (int k = 0; k < half; ++k) {
      const cplx w(rng.normal(), rng.normal());
      const int b = bin_band[static_cast<size_t>(k)];
      for (int ch = 0; ch < 3; ++ch) {
        const double g = (ch == 2) ? g_contra[b] : g_local[b];
        spec[static_cast<size_t>(ch)][static_cast<size_t>(k)] += w * cur[ch] * g;
        cur[ch] *= rot[ch];
      }
    }
  }

  Channels out(3);
  double mean_power = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> x = fft.inverse_real(spec[static_cast<size_t>(ch)]);
    x.resize(static_cast<size_t>(n_samples));
    double p = 0.0;
    for (double v : x) p += v * v;
    mean_power += p / static_cast<double>(n_samples) / 3.0;
    out[static_cast<size_t>(ch)] = std::move(x);
  }
  const double scale = 1.0 / std::sqrt(mean_power);
  for (auto& ch : out)
    for (double& v : ch) v *= scale;
  return out;
}

}  // namespace binloc
