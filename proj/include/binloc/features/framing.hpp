#pragma once

// Frame geometry shared by feature extraction and labeling: 200 ms frames
// with 50% overlap. The trailing partial hop is dropped, never padded.

#include <cstdint>

#include "binloc/core/error.hpp"

namespace binloc {

struct Framing {
  int frame_len = 3200;  // 200 ms at 16 kHz
  int hop = 1600;

  int count(int64_t samples) const {
    require(hop > 0 && frame_len > 0 && frame_len % hop == 0 && frame_len / hop == 2,
            "framing requires hop = frame/2");
    if (samples < frame_len) return 0;
    return static_cast<int>((samples - frame_len) / hop) + 1;
  }

  int64_t start(int frame) const { return static_cast<int64_t>(frame) * hop; }
  int64_t end(int frame) const { return start(frame) + frame_len; }
};

}  // namespace binloc
