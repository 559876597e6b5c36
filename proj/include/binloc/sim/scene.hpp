#pragma once

// Scene assembly: speech-like sources rendered through the head model,
// diffuse noise mixed at a prescribed SNR, and per-frame labels derived from
// the rendered stems.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/features/framing.hpp"
#include "binloc/model/grid.hpp"
#include "binloc/sim/head.hpp"
#include "binloc/sim/render.hpp"
#include "binloc/sim/speech.hpp"

namespace binloc {

struct SourceSpec {
  double azimuth_deg = 0.0;  // global frame
  double onset_s = 0.0;
  double offset_s = 0.0;
  double level_db = 0.0;
};

struct SceneSpec {
  std::vector<SourceSpec> sources;
  std::optional<double> snr_db;  // empty = no noise
  double t60_s = 0.0;
  double duration_s = 6.0;
  int sample_rate = 16000;
  uint64_t seed = 0;

  void validate() const {
    require(duration_s > 0 && sample_rate > 0, "scene duration and sample rate must be positive");
    for (const auto& s : sources) {
      require(s.azimuth_deg >= -180.0 && s.azimuth_deg < 180.0, "azimuth must lie in [-180, 180)");
      require(s.onset_s >= 0 && s.onset_s < s.offset_s && s.offset_s <= duration_s,
              "need 0 <= onset < offset <= duration");
    }
    if (snr_db) require(*snr_db == 5.0 || *snr_db == 10.0 || *snr_db == 15.0, "snr must be 5, 10, or 15 dB");
    require(t60_s == 0.0 || (t60_s >= 0.1 && t60_s <= 0.6), "t60 must be 0 or in [0.1, 0.6] s");
  }

  nlohmann::json to_json() const {
    nlohmann::json srcs = nlohmann::json::array();
    for (const auto& s : sources)
      srcs.push_back({{"azimuth_deg", s.azimuth_deg},
                      {"onset_s", s.onset_s},
                      {"offset_s", s.offset_s},
                      {"level_db", s.level_db}});
    return {{"sources", srcs},
            {"snr_db", snr_db ? nlohmann::json(*snr_db) : nlohmann::json(nullptr)},
            {"t60_s", t60_s},
            {"duration_s", duration_s},
            {"sample_rate", sample_rate},
            {"seed", seed}};
  }

  static SceneSpec from_json(const nlohmann::json& j) {
    SceneSpec spec;
    for (const auto& s : j.at("sources"))
      spec.sources.push_back({s.at("azimuth_deg").get<double>(), s.at("onset_s").get<double>(),
                              s.at("offset_s").get<double>(), s.at("level_db").get<double>()});
    if (!j.at("snr_db").is_null()) spec.snr_db = j.at("snr_db").get<double>();
    spec.t60_s = j.at("t60_s").get<double>();
    spec.duration_s = j.at("duration_s").get<double>();
    spec.sample_rate = j.at("sample_rate").get<int>();
    spec.seed = j.at("seed").get<uint64_t>();
    return spec;
  }
};

struct LabeledClip {
  Channels audio;                           // 3 x N
  std::vector<std::vector<uint8_t>> y_doa;  // T x D multi-hot
  std::vector<int> y_csd;                   // T, values 0/1/2
  SceneSpec spec;
  Side side = Side::right;
};

namespace scenedetail {

// Frame-wise activity of one rendered stem: channel-averaged frame power
// above -40 dB relative to the stem's own clip power.
inline std::vector<uint8_t> stem_activity(const Channels& stem, const Framing& framing) {
  const int64_t n = static_cast<int64_t>(stem[0].size());
  const int t_total = framing.count(n);
  std::vector<uint8_t> active(static_cast<size_t>(t_total), 0);
  double clip_power = 0.0;
  for (const auto& ch : stem)
    for (double v : ch) clip_power += v * v;
  clip_power /= static_cast<double>(3 * n);
  if (clip_power <= 0.0) return active;

  for (int t = 0; t < t_total; ++t) {
    double p = 0.0;
    for (const auto& ch : stem)
      for (int64_t i = framing.start(t); i < framing.end(t); ++i) p += ch[static_cast<size_t>(i)] * ch[static_cast<size_t>(i)];
    p /= static_cast<double>(3 * framing.frame_len);
    active[static_cast<size_t>(t)] = (p > clip_power * 1e-4) ? 1 : 0;
  }
  return active;
}

inline void gate_window(std::vector<double>& x, double onset_s, double offset_s, int fs) {
  constexpr double kPi = 3.14159265358979323846264338327950288;
  const int64_t n = static_cast<int64_t>(x.size());
  const int64_t a = static_cast<int64_t>(onset_s * fs);
  const int64_t b = std::min<int64_t>(n, static_cast<int64_t>(offset_s * fs));
  const int64_t ramp = fs / 200;  // 5 ms
  for (int64_t i = 0; i < n; ++i) {
    double g = 0.0;
    if (i >= a && i < b) {
      g = 1.0;
      if (i - a < ramp) g = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(i - a) / ramp);
      if (b - 1 - i < ramp) g = std::min(g, 0.5 - 0.5 * std::cos(kPi * static_cast<double>(b - 1 - i) / ramp));
    }
    x[static_cast<size_t>(i)] *= g;
  }
}

}  // namespace scenedetail

// Frame labels from per-stem activity: each active in-ROI source marks its
// nearest class; the count class is the number of distinct marked classes,
// saturated at 2. Out-of-ROI sources contribute nothing.
inline void label_frames(const std::vector<std::vector<uint8_t>>& activity,
                         const std::vector<double>& local_az, const ClassGrid& grid, int t_total,
                         std::vector<std::vector<uint8_t>>& y_doa, std::vector<int>& y_csd) {
  require(activity.size() == local_az.size(), "one activity track per source");
  y_doa.assign(static_cast<size_t>(t_total), std::vector<uint8_t>(static_cast<size_t>(grid.d), 0));
  y_csd.assign(static_cast<size_t>(t_total), 0);
  for (int t = 0; t < t_total; ++t) {
    for (size_t i = 0; i < activity.size(); ++i) {
      if (!activity[i][static_cast<size_t>(t)]) continue;
      if (!grid.in_roi(local_az[i])) continue;
      y_doa[static_cast<size_t>(t)][static_cast<size_t>(grid.nearest_class(local_az[i]))] = 1;
    }
    int distinct = 0;
    for (uint8_t v : y_doa[static_cast<size_t>(t)]) distinct += v;
    y_csd[static_cast<size_t>(t)] = distinct >= 2 ? 2 : distinct;
  }
}

// Renders a scene for one device. Labels live in the device-local frame.
// Optional outputs expose the per-source stems and the scaled noise so tests
// can audit power bookkeeping without re-deriving internals.
inline LabeledClip mix_scene(const SceneSpec& spec, const MicLayout& layout, const ClassGrid& grid,
                             const Framing& framing, std::vector<Channels>* stems_out = nullptr,
                             Channels* noise_out = nullptr) {
  using namespace scenedetail;
  spec.validate();
  layout.validate();
  const int fs = spec.sample_rate;
  const int64_t n = static_cast<int64_t>(spec.duration_s * fs);
  const int t_total = framing.count(n);

  LabeledClip clip;
  clip.spec = spec;
  clip.side = layout.side;
  clip.audio.assign(3, std::vector<double>(static_cast<size_t>(n), 0.0));

  std::vector<std::vector<uint8_t>> activity;
  std::vector<double> local_az;
  for (size_t i = 0; i < spec.sources.size(); ++i) {
    const SourceSpec& src = spec.sources[i];
    std::vector<double> sig = synth_speechlike(spec.duration_s, Rng::derive(spec.seed, "speech", i), fs);
    gate_window(sig, src.onset_s, src.offset_s, fs);
    const double amp = std::pow(10.0, src.level_db / 20.0);
    for (double& v : sig) v *= amp;

    const double az = local_azimuth(src.azimuth_deg, layout.side);
    Channels stem = render_source(sig, az, layout, spec.t60_s, Rng::derive(spec.seed, "reverb", i), fs);
    activity.push_back(stem_activity(stem, framing));
    local_az.push_back(az);
    for (int ch = 0; ch < 3; ++ch)
      for (int64_t s = 0; s < n; ++s)
        clip.audio[static_cast<size_t>(ch)][static_cast<size_t>(s)] += stem[static_cast<size_t>(ch)][static_cast<size_t>(s)];
    if (stems_out) stems_out->push_back(std::move(stem));
  }

  label_frames(activity, local_az, grid, t_total, clip.y_doa, clip.y_csd);

  if (spec.snr_db) {
    Channels noise = diffuse_noise(n, layout, Rng::derive(spec.seed, "noise"), fs);
    // speech power over frames where any source is active, channel-averaged
    double speech_power = 1.0;  // unit reference when no sources are present
    if (!spec.sources.empty()) {
      int64_t active_samples = 0;
      double p = 0.0;
      for (int t = 0; t < t_total; ++t) {
        bool any = false;
        for (const auto& act : activity) any = any || act[static_cast<size_t>(t)];
        if (!any) continue;
        // overlapping frames double-count consistently on both sides of the
        // ratio; use disjoint hops to keep the bookkeeping exact
        const int64_t lo = framing.start(t);
        const int64_t hi = (t + 1 < t_total) ? framing.start(t + 1) : framing.end(t);
        for (const auto& ch : clip.audio)
          for (int64_t s = lo; s < hi; ++s) p += ch[static_cast<size_t>(s)] * ch[static_cast<size_t>(s)];
        active_samples += hi - lo;
      }
      if (active_samples > 0) speech_power = p / static_cast<double>(3 * active_samples);
    }
    double noise_power = 0.0;
    for (const auto& ch : noise)
      for (double v : ch) noise_power += v * v;
    noise_power /= static_cast<double>(3 * n);
    const double gain = std::sqrt(speech_power / noise_power * std::pow(10.0, -*spec.snr_db / 10.0));
    for (int ch = 0; ch < 3; ++ch)
      for (int64_t s = 0; s < n; ++s)
        clip.audio[static_cast<size_t>(ch)][static_cast<size_t>(s)] += gain * noise[static_cast<size_t>(ch)][static_cast<size_t>(s)];
    if (noise_out) {
      for (auto& ch : noise)
        for (double& v : ch) v *= gain;
      *noise_out = std::move(noise);
    }
  }
  return clip;
}

}  // namespace binloc
