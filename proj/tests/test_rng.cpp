#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "binloc/core/rng.hpp"

using binloc::Rng;

TEST_CASE("same seed reproduces every stream exactly", "[rng]") {
  Rng a(12345), b(12345);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(a.next_u64() == b.next_u64());
  }
  Rng c(7), d(7);
  for (int i = 0; i < 1000; ++i) {
    REQUIRE(c.uniform() == d.uniform());
    REQUIRE(c.normal() == d.normal());
  }
}

TEST_CASE("uniform stays in [0,1) with a sane mean", "[rng]") {
  Rng r(99);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  REQUIRE(sum / n == Catch::Approx(0.5).margin(0.005));
}

TEST_CASE("uniform range maps to [lo,hi)", "[rng]") {
  Rng r(4);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform(-3.0, 2.5);
    REQUIRE(u >= -3.0);
    REQUIRE(u < 2.5);
  }
}

TEST_CASE("uniform_int covers [0,n) roughly evenly", "[rng]") {
  Rng r(2024);
  const int n = 7;
  std::vector<int> counts(n, 0);
  const int draws = 70000;
  for (int i = 0; i < draws; ++i) {
    const int v = r.uniform_int(n);
    REQUIRE(v >= 0);
    REQUIRE(v < n);
    counts[static_cast<size_t>(v)]++;
  }
  // each bucket expects 10000; allow 5% slack
  for (int c : counts) REQUIRE(std::abs(c - draws / n) < draws / n / 20);
}

TEST_CASE("normal has unit variance and zero mean", "[rng]") {
  Rng r(55);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  REQUIRE(mean == Catch::Approx(0.0).margin(0.02));
  REQUIRE(var == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("derived sub-stream seeds are distinct and stable", "[rng]") {
  const uint64_t root = 42;
  REQUIRE(Rng::derive(root, "scene") == Rng::derive(root, "scene"));
  REQUIRE(Rng::derive(root, "scene") != Rng::derive(root, "init"));
  REQUIRE(Rng::derive(root, "scene") != Rng::derive(root + 1, "scene"));

  std::set<uint64_t> seen;
  seen.insert(Rng::derive(root, "clip"));
  for (uint64_t i = 0; i < 200; ++i) seen.insert(Rng::derive(root, "clip", i));
  REQUIRE(seen.size() == 201);
}

TEST_CASE("streams from different tags decorrelate", "[rng]") {
  Rng a(Rng::derive(9, "dropout"));
  Rng b(Rng::derive(9, "sampler"));
  int agree = 0;
  for (int i = 0; i < 64; ++i)
    if (a.next_u64() == b.next_u64()) ++agree;
  REQUIRE(agree == 0);
}
