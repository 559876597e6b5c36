#pragma once

// Glue between dataset artifacts and tensors: features (via the on-disk
// cache when it matches the manifest's feature hash) plus frame labels for
// one clip.

#include <filesystem>
#include <string>
#include <vector>

#include "binloc/core/error.hpp"
#include "binloc/features/features.hpp"
#include "binloc/io/wav.hpp"
#include "binloc/sim/dataset.hpp"

namespace binloc {

struct ClipData {
  FeatureTensor feat;
  std::vector<std::vector<uint8_t>> y_doa;  // per frame, multi-hot over D
  std::vector<int> y_csd;                   // per frame, in {0, 1, 2}
};

// Features for one clip, extracted at most once per dataset: a cache file
// keyed by the manifest feature hash sits beside the audio and any stale or
// missing entry is rebuilt from the WAV.
inline FeatureTensor clip_features(const std::filesystem::path& root, const ClipRecord& rec,
                                   const FeatureExtractor& fx, const std::string& feature_hash,
                                   bool cache = true) {
  const std::filesystem::path cache_path = root / "features" / (rec.id + ".feat");
  if (cache) {
    if (auto hit = read_feature_cache(cache_path, feature_hash)) return std::move(*hit);
  }
  const WavData wav = read_wav(root / rec.wav_path);
  require_data(wav.sample_rate == fx.config().sample_rate,
               "clip " + rec.id + " sample rate does not match the feature config");
  FeatureTensor feat = fx.build(wav.channels);
  if (cache) {
    std::filesystem::create_directories(cache_path.parent_path());
    write_feature_cache(cache_path, feature_hash, feat);
  }
  return feat;
}

inline ClipData load_clip_data(const std::filesystem::path& root, const ClipRecord& rec,
                               const FeatureExtractor& fx, const std::string& feature_hash,
                               bool cache = true) {
  ClipData d;
  d.feat = clip_features(root, rec, fx, feature_hash, cache);
  load_sidecar_labels(root / rec.sidecar_path, d.y_doa, d.y_csd);
  require_data(static_cast<int>(d.y_csd.size()) == d.feat.t,
               "clip " + rec.id + " labels and features disagree on frame count");
  return d;
}

}  // namespace binloc
