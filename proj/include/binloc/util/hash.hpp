#pragma once

// Stable config hashing: FNV-1a over the canonical (key-sorted) JSON dump.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "binloc/core/rng.hpp"

namespace binloc {

inline std::string hash_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

inline std::string config_hash(const nlohmann::json& j) {
  return hash_hex(detail::fnv1a64(j.dump()));
}

}  // namespace binloc
