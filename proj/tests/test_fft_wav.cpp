#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/io/wav.hpp"
#include "binloc/util/fft.hpp"

using binloc::cplx;
using binloc::Fft;
using binloc::Rng;
using binloc::WavData;

namespace {

std::vector<cplx> naive_dft(const std::vector<cplx>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<cplx> out(static_cast<size_t>(n));
  const double pi = 3.14159265358979323846264338327950288;
  for (int k = 0; k < n; ++k) {
    cplx acc(0.0, 0.0);
    for (int t = 0; t < n; ++t) {
      const double ang = -2.0 * pi * k * t / n;
      acc += x[static_cast<size_t>(t)] * cplx(std::cos(ang), std::sin(ang));
    }
    out[static_cast<size_t>(k)] = acc;
  }
  return out;
}

std::vector<cplx> random_signal(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<cplx> x(static_cast<size_t>(n));
  for (auto& v : x) v = cplx(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  return x;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("forward transform matches a naive DFT", "[fftwav]") {
  for (int n : {1, 2, 8, 16, 37, 100, 400}) {
    auto x = random_signal(n, 1000 + static_cast<uint64_t>(n));
    auto got = Fft(n).forward(x);
    auto want = naive_dft(x);
    double scale = 0.0;
    for (const auto& v : want) scale = std::max(scale, std::abs(v));
    for (int k = 0; k < n; ++k) {
      INFO("n=" << n << " k=" << k);
      REQUIRE(std::abs(got[static_cast<size_t>(k)] - want[static_cast<size_t>(k)]) < 1e-9 * std::max(scale, 1.0));
    }
  }
}

TEST_CASE("inverse undoes forward", "[fftwav]") {
  for (int n : {16, 37, 400}) {
    auto x = random_signal(n, 7 + static_cast<uint64_t>(n));
    Fft fft(n);
    auto back = fft.inverse(fft.forward(x));
    for (int k = 0; k < n; ++k)
      REQUIRE(std::abs(back[static_cast<size_t>(k)] - x[static_cast<size_t>(k)]) < 1e-10);
  }
}

TEST_CASE("impulse and cosine have analytic spectra", "[fftwav]") {
  SECTION("impulse is flat") {
    const int n = 64;
    std::vector<cplx> x(n, cplx(0.0, 0.0));
    x[0] = cplx(1.0, 0.0);
    auto spec = Fft(n).forward(x);
    for (const auto& v : spec) REQUIRE(std::abs(v - cplx(1.0, 0.0)) < 1e-12);
  }
  SECTION("cosine concentrates at its bin pair") {
    const int n = 128, f = 5;
    const double pi = 3.14159265358979323846264338327950288;
    std::vector<cplx> x(n);
    for (int t = 0; t < n; ++t) x[static_cast<size_t>(t)] = cplx(std::cos(2.0 * pi * f * t / n), 0.0);
    auto spec = Fft(n).forward(x);
    for (int k = 0; k < n; ++k) {
      const double mag = std::abs(spec[static_cast<size_t>(k)]);
      if (k == f || k == n - f) {
        REQUIRE(mag == Catch::Approx(n / 2.0).epsilon(1e-9));
      } else {
        REQUIRE(mag < 1e-9);
      }
    }
  }
}

TEST_CASE("transforms conserve energy", "[fftwav]") {
  for (int n : {32, 400}) {
    auto x = random_signal(n, 555 + static_cast<uint64_t>(n));
    auto spec = Fft(n).forward(x);
    double tx = 0.0, ts = 0.0;
    for (const auto& v : x) tx += std::norm(v);
    for (const auto& v : spec) ts += std::norm(v);
    REQUIRE(tx == Catch::Approx(ts / n).epsilon(1e-9));
  }
}

TEST_CASE("real transforms agree with the complex path", "[fftwav]") {
  for (int n : {400, 1024}) {
    Rng rng(31 + static_cast<uint64_t>(n));
    std::vector<double> x(static_cast<size_t>(n));
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    Fft fft(n);

    auto half = fft.forward_real(x);
    REQUIRE(static_cast<int>(half.size()) == n / 2 + 1);
    std::vector<cplx> xc(x.begin(), x.end());
    auto full = fft.forward(xc);
    for (int k = 0; k <= n / 2; ++k)
      REQUIRE(std::abs(half[static_cast<size_t>(k)] - full[static_cast<size_t>(k)]) < 1e-10);

    auto back = fft.inverse_real(half);
    for (int k = 0; k < n; ++k) REQUIRE(std::abs(back[static_cast<size_t>(k)] - x[static_cast<size_t>(k)]) < 1e-10);
  }
}

TEST_CASE("fft rejects bad sizes and lengths", "[fftwav]") {
  REQUIRE_THROWS_AS(Fft(0), binloc::contract_error);
  Fft fft(16);
  REQUIRE_THROWS_AS(fft.forward(std::vector<cplx>(8)), binloc::contract_error);
}

TEST_CASE("wav files round-trip through float32", "[fftwav]") {
  Rng rng(777);
  WavData wav;
  wav.sample_rate = 16000;
  wav.channels.resize(3);
  for (auto& ch : wav.channels) {
    ch.resize(500);
    for (auto& v : ch) v = rng.uniform(-1.0, 1.0);
  }

  const auto path = temp_file("binloc_wav_test.wav");
  binloc::write_wav(path, wav);
  WavData back = binloc::read_wav(path);

  REQUIRE(back.sample_rate == 16000);
  REQUIRE(back.channels.size() == 3);
  REQUIRE(back.frames() == 500);
  for (size_t c = 0; c < 3; ++c)
    for (size_t i = 0; i < 500; ++i) {
      // storage is float32: the read value is the float-rounded original
      const double expect = static_cast<double>(static_cast<float>(wav.channels[c][i]));
      REQUIRE(back.channels[c][i] == expect);
    }

  SECTION("rewrite is byte-identical") {
    const auto path2 = temp_file("binloc_wav_test2.wav");
    binloc::write_wav(path2, wav);
    REQUIRE(slurp(path) == slurp(path2));
    std::filesystem::remove(path2);
  }
  std::filesystem::remove(path);
}

TEST_CASE("wav reader rejects junk", "[fftwav]") {
  SECTION("missing file") {
    REQUIRE_THROWS_AS(binloc::read_wav("/nonexistent/x.wav"), binloc::data_error);
  }
  SECTION("not a wav") {
    const auto path = temp_file("binloc_wav_junk.wav");
    std::ofstream(path, std::ios::binary) << "this is not audio";
    REQUIRE_THROWS_AS(binloc::read_wav(path), binloc::data_error);
    std::filesystem::remove(path);
  }
}

TEST_CASE("wav writer validates channel lengths", "[fftwav]") {
  WavData wav;
  wav.sample_rate = 16000;
  wav.channels = {std::vector<double>(10, 0.0), std::vector<double>(11, 0.0)};
  REQUIRE_THROWS_AS(binloc::write_wav(temp_file("binloc_wav_bad.wav"), wav), binloc::contract_error);
}
