#pragma once

// Training sequence sampling: every stride-1 window of each clip, labeled by
// its final frame, plus per-epoch rebalancing of the count classes. The 2+
// windows are the scarce ones, so rebalancing keeps all of them and resamples
// the 0 and 1 classes to a 2:1:1 ratio (inside the allowed 1:1:1 to 3:1:1
// band).

#include <algorithm>
#include <vector>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"

namespace binloc {

struct SeqSample {
  int clip = 0;
  int start = 0;
  int count = 0;  // final-frame source count, saturated at 2
};

// counts_per_clip: the per-frame count label stream of each clip. Clips
// shorter than seq_len yield nothing and are tallied in skipped_clips.
inline std::vector<SeqSample> enumerate_sequences(const std::vector<std::vector<int>>& counts_per_clip,
                                                  int seq_len, int* skipped_clips = nullptr) {
  require(seq_len >= 1, "sequence length must be at least 1");
  std::vector<SeqSample> out;
  int skipped = 0;
  for (size_t c = 0; c < counts_per_clip.size(); ++c) {
    const auto& counts = counts_per_clip[c];
    const int t_total = static_cast<int>(counts.size());
    if (t_total < seq_len) {
      ++skipped;
      continue;
    }
    for (int start = 0; start + seq_len <= t_total; ++start) {
      const int label = counts[static_cast<size_t>(start + seq_len - 1)];
      out.push_back({static_cast<int>(c), start, label > 2 ? 2 : label});
    }
  }
  if (skipped_clips) *skipped_clips = skipped;
  return out;
}

namespace samplerdetail {

inline void shuffle(std::vector<SeqSample>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
}

// target items from pool: a shuffled prefix when the pool is large enough,
// otherwise everything plus draws with replacement.
inline void take(const std::vector<SeqSample>& pool, size_t target, Rng& rng, std::vector<SeqSample>& out) {
  if (pool.empty() || target == 0) return;
  if (pool.size() >= target) {
    std::vector<SeqSample> copy = pool;
    shuffle(copy, rng);
    out.insert(out.end(), copy.begin(), copy.begin() + static_cast<int64_t>(target));
    return;
  }
  out.insert(out.end(), pool.begin(), pool.end());
  for (size_t i = pool.size(); i < target; ++i)
    out.push_back(pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(pool.size())))]);
}

}  // namespace samplerdetail

// One epoch's worth of windows. Every 2+ window survives; the 0 and 1 classes
// are drawn to twice and once the 2+ population. Without any 2+ windows there
// is nothing to balance against, so the epoch is just a shuffle.
inline std::vector<SeqSample> rebalance_epoch(const std::vector<SeqSample>& all, Rng& rng) {
  std::vector<SeqSample> c0, c1, c2;
  for (const SeqSample& s : all) (s.count == 0 ? c0 : (s.count == 1 ? c1 : c2)).push_back(s);

  std::vector<SeqSample> epoch;
  if (c2.empty()) {
    epoch = all;
  } else {
    epoch = c2;
    samplerdetail::take(c1, c2.size(), rng, epoch);
    samplerdetail::take(c0, 2 * c2.size(), rng, epoch);
  }
  samplerdetail::shuffle(epoch, rng);
  return epoch;
}

}  // namespace binloc
