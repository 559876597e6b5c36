#pragma once

// Parametric spherical-head binaural geometry. All azimuths here are in the
// device-local frame: 0 degrees dead ahead, positive toward the device's own
// side, normalized to [-180, 180).

#include <cmath>
#include <string>

#include "binloc/core/error.hpp"

namespace binloc {

enum class Side { left, right };

inline const char* side_name(Side s) { return s == Side::left ? "left" : "right"; }

struct MicLayout {
  double head_radius = 0.0875;  // meters
  double speed_of_sound = 343.0;
  double mic_spacing = 0.012;  // front-to-rear on one device
  Side side = Side::right;

  void validate() const {
    require(head_radius > 0 && speed_of_sound > 0 && mic_spacing > 0,
            "mic layout dimensions must be positive");
  }
};

inline double normalize_azimuth(double deg) {
  double a = std::fmod(deg + 180.0, 360.0);
  if (a < 0) a += 360.0;
  return a - 180.0;
}

// Maps a global azimuth (positive toward the listener's right) into the
// device-local frame where positive means ipsilateral.
inline double local_azimuth(double global_deg, Side side) {
  const double a = normalize_azimuth(global_deg);
  return side == Side::right ? a : normalize_azimuth(-a);
}

namespace headdetail {

constexpr double kPi = 3.14159265358979323846264338327950288;

// Rear sources mirror onto the front hemisphere: the interaural geometry of
// 180-|a| matches |a| under the spherical model.
inline double fold_front(double local_deg) {
  const double a = std::abs(normalize_azimuth(local_deg));
  return a <= 90.0 ? a : 180.0 - a;
}

}  // namespace headdetail

// Interaural delay, contralateral arrival minus ipsilateral, in seconds.
// Positive when the source sits on the device's own side.
inline double woodworth_itd(double local_deg, const MicLayout& layout) {
  layout.validate();
  const double folded = headdetail::fold_front(local_deg);
  const double theta = folded * headdetail::kPi / 180.0;
  const double mag = layout.head_radius / layout.speed_of_sound * (theta + std::sin(theta));
  const double a = normalize_azimuth(local_deg);
  return a >= 0.0 ? mag : -mag;
}

// Level advantage of the ipsilateral over the contralateral front mic, dB.
// Grows with the sine of the folded azimuth and with frequency, capped so
// the hardest shadow (90 degrees at 5 kHz) is 20 dB.
inline double head_shadow_ild(double local_deg, double band_center_hz, const MicLayout& layout) {
  layout.validate();
  require(band_center_hz > 0 && band_center_hz <= 5000.0, "band center must be in (0, 5000] Hz");
  const double strength = std::min(20.0, 20.0 * std::pow(band_center_hz / 5000.0, 0.8));
  const double folded = headdetail::fold_front(local_deg);
  const double mag = strength * std::sin(folded * headdetail::kPi / 180.0);
  return normalize_azimuth(local_deg) >= 0.0 ? mag : -mag;
}

// Arrival times in seconds for the three channels (local-front, local-rear,
// contra-front), offset by a fixed bulk delay so all are causal.
struct ArrivalTimes {
  double local_front;
  double local_rear;
  double contra_front;
};

inline ArrivalTimes arrival_times(double local_deg, const MicLayout& layout,
                                  double bulk_delay_s = 1e-3) {
  const double itd = woodworth_itd(local_deg, layout);
  const double theta = normalize_azimuth(local_deg) * headdetail::kPi / 180.0;
  ArrivalTimes t;
  t.local_front = bulk_delay_s - itd / 2.0;
  t.contra_front = bulk_delay_s + itd / 2.0;
  // a plane wave from the front reaches the rear mic spacing/c later
  t.local_rear = t.local_front + layout.mic_spacing / layout.speed_of_sound * std::cos(theta);
  return t;
}

}  // namespace binloc
