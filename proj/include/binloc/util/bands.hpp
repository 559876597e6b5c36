#pragma once

// The 11 analysis bands partition (0, 5000] Hz linearly. Band b covers
// (b*5000/11, (b+1)*5000/11]; frequencies outside the range clamp to the
// nearest band (used when shaping full-bandwidth spectra).

#include <cmath>

namespace binloc {

constexpr int kNumBands = 11;
constexpr double kBandTop = 5000.0;

inline double band_width() { return kBandTop / kNumBands; }

inline double band_center(int b) { return (b + 0.5) * band_width(); }

inline double band_lower(int b) { return b * band_width(); }
inline double band_upper(int b) { return (b + 1) * band_width(); }

inline int band_of(double freq_hz) {
  if (freq_hz <= band_width()) return 0;
  if (freq_hz >= kBandTop) return kNumBands - 1;
  const int b = static_cast<int>(std::ceil(freq_hz / band_width())) - 1;
  return b < 0 ? 0 : (b >= kNumBands ? kNumBands - 1 : b);
}

}  // namespace binloc
