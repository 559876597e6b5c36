#pragma once

// Deterministic random streams. Everything derives from one root seed via
// named sub-streams so components stay independently reproducible.

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace binloc {

namespace detail {

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Named sub-stream seeds. derive(root, tag, i) != derive(root, tag, j).
  static uint64_t derive(uint64_t root, std::string_view tag) {
    return detail::splitmix64(root ^ detail::fnv1a64(tag));
  }
  static uint64_t derive(uint64_t root, std::string_view tag, uint64_t index) {
    return detail::splitmix64(derive(root, tag) + 0x9e3779b97f4a7c15ull * (index + 1));
  }

  uint64_t next_u64() { return eng_(); }

  // [0, 1) with 53 random bits; identical across platforms.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n) without relying on std::uniform_int_distribution (not portable).
  int uniform_int(int n) {
    return static_cast<int>((static_cast<unsigned __int128>(eng_()) * static_cast<uint64_t>(n)) >> 64);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace binloc
