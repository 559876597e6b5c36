#pragma once

// IPD/ILR feature extraction. Each 200 ms frame is analyzed with Welch-style
// 25 ms Hann sub-windows (50% overlap); cross-power spectra are pooled into
// 11 linear bands up to 5 kHz and reduced to a phase and a level-ratio value
// per band and channel pair.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "binloc/core/error.hpp"
#include "binloc/features/framing.hpp"
#include "binloc/util/bands.hpp"

namespace binloc {

constexpr int kNumPairs = 3;

// channel indices per pair: (local-front, local-rear), (local-front,
// contra-front), (local-rear, contra-front); local-front is the reference
constexpr int kPairChannels[kNumPairs][2] = {{0, 1}, {0, 2}, {1, 2}};

struct FeatureConfig {
  int sample_rate = 16000;

  int frame_len() const { return sample_rate / 5; }  // 200 ms
  int frame_hop() const { return frame_len() / 2; }
  int sub_len() const { return sample_rate / 40; }  // 25 ms
  int sub_hop() const { return sub_len() / 2; }
  int n_bins() const { return sub_len() / 2 + 1; }
  Framing framing() const { return Framing{frame_len(), frame_hop()}; }

  void validate() const {
    require_data(sample_rate > 0 && sample_rate % 80 == 0,
                 "sample rate must be a positive multiple of 80 for even analysis windows");
  }

  nlohmann::json to_json() const {
    return {{"sample_rate", sample_rate}, {"frame_ms", 200}, {"sub_window_ms", 25},
            {"bands", kNumBands},         {"pairs", kNumPairs}};
  }

  static FeatureConfig from_json(const nlohmann::json& j) {
    FeatureConfig fc;
    fc.sample_rate = j.at("sample_rate").get<int>();
    fc.validate();
    return fc;
  }
};

struct FeatureTensor {
  int t = 0;
  std::vector<float> v;  // row-major [t][band][pair][ipd, ilr]

  static constexpr int bands = kNumBands;
  static constexpr int pairs = kNumPairs;
  static constexpr int comps = 2;

  size_t index(int ti, int band, int pair, int comp) const {
    return ((static_cast<size_t>(ti) * bands + static_cast<size_t>(band)) * pairs + static_cast<size_t>(pair)) *
               comps +
           static_cast<size_t>(comp);
  }
  float at(int ti, int band, int pair, int comp) const { return v[index(ti, band, pair, comp)]; }
  float& at(int ti, int band, int pair, int comp) { return v[index(ti, band, pair, comp)]; }
};

inline std::vector<std::vector<double>> frame_signal(const std::vector<double>& x, const FeatureConfig& fc) {
  fc.validate();
  const Framing fr = fc.framing();
  const int t_total = fr.count(static_cast<int64_t>(x.size()));
  require_data(t_total >= 1, "audio shorter than one analysis frame yields no features");
  std::vector<std::vector<double>> frames(static_cast<size_t>(t_total));
  for (int t = 0; t < t_total; ++t)
    frames[static_cast<size_t>(t)].assign(x.begin() + fr.start(t), x.begin() + fr.end(t));
  return frames;
}

// Per-band IPD: principal-value angle, with near-zero cross power mapped to 0.
inline std::array<double, kNumBands> ipd(const std::array<std::complex<double>, kNumBands>& banded) {
  std::array<double, kNumBands> out{};
  for (int b = 0; b < kNumBands; ++b)
    out[static_cast<size_t>(b)] =
        std::abs(banded[static_cast<size_t>(b)]) < 1e-12 ? 0.0 : std::arg(banded[static_cast<size_t>(b)]);
  return out;
}

// Per-band ILR from banded auto spectra, clamped to +-30 dB; the epsilon
// keeps silence at exactly 0 dB.
inline std::array<double, kNumBands> ilr_banded(const std::array<double, kNumBands>& p_ii,
                                                const std::array<double, kNumBands>& p_jj) {
  std::array<double, kNumBands> out{};
  for (int b = 0; b < kNumBands; ++b) {
    const double r = 10.0 * std::log10((p_ii[static_cast<size_t>(b)] + 1e-12) / (p_jj[static_cast<size_t>(b)] + 1e-12));
    out[static_cast<size_t>(b)] = std::clamp(r, -30.0, 30.0);
  }
  return out;
}

// Precomputes the Hann window and the trig tables of a direct partial DFT.
// The sub-window length (400 samples at 16 kHz) has no power-of-two
// structure, and only 201 bins exist; a table-driven direct transform beats
// a general FFT here and keeps the extractor allocation-free per frame.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(const FeatureConfig& fc) : fc_(fc) {
    fc_.validate();
    const int n = fc_.sub_len();
    const int bins = fc_.n_bins();
    window_.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
      window_[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * i / n);
    cos_.resize(static_cast<size_t>(bins) * n);
    sin_.resize(static_cast<size_t>(bins) * n);
    for (int k = 0; k < bins; ++k)
      for (int i = 0; i < n; ++i) {
        const double a = 2.0 * kPi * k * i / n;
        cos_[static_cast<size_t>(k) * n + i] = std::cos(a);
        sin_[static_cast<size_t>(k) * n + i] = std::sin(a);
      }
    // band membership of each bin by its center frequency; DC and anything
    // above the band range stay unpooled
    bin_band_.assign(static_cast<size_t>(bins), -1);
    band_sizes_.fill(0);
    for (int k = 1; k < bins; ++k) {
      const double f = static_cast<double>(k) * fc_.sample_rate / n;
      if (f > kBandTop) continue;
      for (int b = 0; b < kNumBands; ++b)
        if (f > band_lower(b) && f <= band_upper(b)) {
          bin_band_[static_cast<size_t>(k)] = b;
          ++band_sizes_[static_cast<size_t>(b)];
          break;
        }
    }
    for (int b = 0; b < kNumBands; ++b) require(band_sizes_[static_cast<size_t>(b)] > 0, "every band needs bins");
  }

  const FeatureConfig& config() const { return fc_; }

  // Hann-windowed spectra of all Welch sub-windows of one frame.
  std::vector<std::vector<std::complex<double>>> sub_spectra(const std::vector<double>& frame) const {
    const int n = fc_.sub_len();
    require(static_cast<int>(frame.size()) == fc_.frame_len(), "frame has the configured length");
    const int n_sub = (fc_.frame_len() - n) / fc_.sub_hop() + 1;
    const int bins = fc_.n_bins();
    std::vector<std::vector<std::complex<double>>> spectra(static_cast<size_t>(n_sub));
    std::vector<double> buf(static_cast<size_t>(n));
    for (int w = 0; w < n_sub; ++w) {
      const int off = w * fc_.sub_hop();
      for (int i = 0; i < n; ++i) buf[static_cast<size_t>(i)] = frame[static_cast<size_t>(off + i)] * window_[static_cast<size_t>(i)];
      auto& spec = spectra[static_cast<size_t>(w)];
      spec.resize(static_cast<size_t>(bins));
      for (int k = 0; k < bins; ++k) {
        const double* ct = &cos_[static_cast<size_t>(k) * n];
        const double* st = &sin_[static_cast<size_t>(k) * n];
        double re = 0.0, im = 0.0;
        for (int i = 0; i < n; ++i) {
          re += buf[static_cast<size_t>(i)] * ct[i];
          im -= buf[static_cast<size_t>(i)] * st[i];
        }
        spec[static_cast<size_t>(k)] = {re, im};
      }
    }
    return spectra;
  }

  // Welch CPSD: mean over sub-windows of conj(X_i) * X_j. With this
  // orientation a pure delay of channel j by n samples puts -2*pi*k*n/N of
  // phase at bin k.
  std::vector<std::complex<double>> cpsd_welch(const std::vector<double>& frame_i,
                                               const std::vector<double>& frame_j) const {
    require(frame_i.size() == frame_j.size(), "cross spectrum needs equal-length frames");
    return combine(sub_spectra(frame_i), sub_spectra(frame_j));
  }

  // Complex mean of the CPSD bins whose center frequency falls inside each
  // band; DC is excluded by construction.
  std::array<std::complex<double>, kNumBands> band_pool(const std::vector<std::complex<double>>& spectrum) const {
    require(static_cast<int>(spectrum.size()) == fc_.n_bins(), "spectrum has one value per bin");
    std::array<std::complex<double>, kNumBands> sums{};
    for (int k = 1; k < fc_.n_bins(); ++k) {
      const int b = bin_band_[static_cast<size_t>(k)];
      if (b >= 0) sums[static_cast<size_t>(b)] += spectrum[static_cast<size_t>(k)];
    }
    for (int b = 0; b < kNumBands; ++b) sums[static_cast<size_t>(b)] /= static_cast<double>(band_sizes_[static_cast<size_t>(b)]);
    return sums;
  }

  // Full feature map of a 3-channel clip, already scaled: IPD / pi and
  // ILR / 30 both land in [-1, 1].
  FeatureTensor build(const std::vector<std::vector<double>>& audio) const {
    require_data(audio.size() == 3, "feature extraction expects 3 channels");
    require_data(audio[1].size() == audio[0].size() && audio[2].size() == audio[0].size(),
                 "channels must share a length");
    const Framing fr = fc_.framing();
    const int t_total = fr.count(static_cast<int64_t>(audio[0].size()));
    require_data(t_total >= 1, "audio shorter than one analysis frame yields no features");

    FeatureTensor out;
    out.t = t_total;
    out.v.resize(static_cast<size_t>(t_total) * kNumBands * kNumPairs * 2);
    std::vector<double> frame(static_cast<size_t>(fc_.frame_len()));
    for (int t = 0; t < t_total; ++t) {
      std::array<std::vector<std::vector<std::complex<double>>>, 3> spectra;
      for (int ch = 0; ch < 3; ++ch) {
        frame.assign(audio[static_cast<size_t>(ch)].begin() + fr.start(t),
                     audio[static_cast<size_t>(ch)].begin() + fr.end(t));
        spectra[static_cast<size_t>(ch)] = sub_spectra(frame);
      }
      std::array<std::array<double, kNumBands>, 3> auto_banded;
      for (int ch = 0; ch < 3; ++ch) {
        const auto banded = band_pool(combine(spectra[static_cast<size_t>(ch)], spectra[static_cast<size_t>(ch)]));
        for (int b = 0; b < kNumBands; ++b) auto_banded[static_cast<size_t>(ch)][static_cast<size_t>(b)] = banded[static_cast<size_t>(b)].real();
      }
      for (int p = 0; p < kNumPairs; ++p) {
        const int ci = kPairChannels[p][0];
        const int cj = kPairChannels[p][1];
        const auto banded = band_pool(combine(spectra[static_cast<size_t>(ci)], spectra[static_cast<size_t>(cj)]));
        const auto phases = ipd(banded);
        const auto levels = ilr_banded(auto_banded[static_cast<size_t>(ci)], auto_banded[static_cast<size_t>(cj)]);
        for (int b = 0; b < kNumBands; ++b) {
          out.at(t, b, p, 0) = static_cast<float>(phases[static_cast<size_t>(b)] / kPi);
          out.at(t, b, p, 1) = static_cast<float>(levels[static_cast<size_t>(b)] / 30.0);
        }
      }
    }
    return out;
  }

 private:
  static constexpr double kPi = 3.14159265358979323846264338327950288;

  std::vector<std::complex<double>> combine(const std::vector<std::vector<std::complex<double>>>& si,
                                            const std::vector<std::vector<std::complex<double>>>& sj) const {
    require(si.size() == sj.size() && !si.empty(), "matching sub-window counts");
    std::vector<std::complex<double>> acc(si[0].size(), {0.0, 0.0});
    for (size_t w = 0; w < si.size(); ++w)
      for (size_t k = 0; k < acc.size(); ++k) acc[k] += std::conj(si[w][k]) * sj[w][k];
    for (auto& v : acc) v /= static_cast<double>(si.size());
    return acc;
  }

  FeatureConfig fc_;
  std::vector<double> window_;
  std::vector<double> cos_, sin_;
  std::vector<int> bin_band_;
  std::array<int, kNumBands> band_sizes_{};
};

// Per-clip feature cache: magic, version, the config hash it was built
// under, the tensor shape, then raw little-endian floats.
inline void write_feature_cache(const std::filesystem::path& path, const std::string& hash,
                                const FeatureTensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  require_data(out.good(), "cannot write feature cache");
  out.write("BNLCFEAT", 8);
  const uint8_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 1);
  auto put_u32 = [&](uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
  };
  put_u32(static_cast<uint32_t>(hash.size()));
  out.write(hash.data(), static_cast<std::streamsize>(hash.size()));
  put_u32(static_cast<uint32_t>(tensor.t));
  put_u32(FeatureTensor::bands);
  put_u32(FeatureTensor::pairs);
  put_u32(FeatureTensor::comps);
  for (float f : tensor.v) put_u32(std::bit_cast<uint32_t>(f));
  require_data(out.good(), "feature cache write failed");
}

// Missing file or a different config hash return nothing (caller rebuilds);
// a structurally broken file is an error.
inline std::optional<FeatureTensor> read_feature_cache(const std::filesystem::path& path,
                                                       const std::string& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in.good()) return std::nullopt;
  char magic[8];
  in.read(magic, 8);
  require_data(in.good() && std::string(magic, 8) == "BNLCFEAT", "not a feature cache file");
  uint8_t version = 0;
  in.read(reinterpret_cast<char*>(&version), 1);
  require_data(in.good() && version == 1, "unsupported feature cache version");
  auto get_u32 = [&]() {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require_data(in.good(), "truncated feature cache");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) | (static_cast<uint32_t>(b[2]) << 16) |
           (static_cast<uint32_t>(b[3]) << 24);
  };
  const uint32_t hash_len = get_u32();
  require_data(hash_len < 4096, "feature cache hash length is implausible");
  std::string hash(hash_len, '\0');
  in.read(hash.data(), hash_len);
  require_data(in.good(), "truncated feature cache");
  const uint32_t t = get_u32();
  const uint32_t bands = get_u32();
  const uint32_t pairs = get_u32();
  const uint32_t comps = get_u32();
  require_data(bands == FeatureTensor::bands && pairs == FeatureTensor::pairs && comps == FeatureTensor::comps,
               "feature cache shape mismatch");
  FeatureTensor tensor;
  tensor.t = static_cast<int>(t);
  tensor.v.resize(static_cast<size_t>(t) * bands * pairs * comps);
  for (auto& f : tensor.v) f = std::bit_cast<float>(get_u32());
  if (hash != expected_hash) return std::nullopt;
  return tensor;
}

}  // namespace binloc
