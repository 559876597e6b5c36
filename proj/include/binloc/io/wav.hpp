#pragma once

// Multichannel 32-bit float WAV (RIFF format tag 3). Samples are stored
// interleaved; the in-memory representation is one double vector per channel.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "binloc/core/error.hpp"

namespace binloc {

struct WavData {
  int sample_rate = 0;
  std::vector<std::vector<double>> channels;

  int64_t frames() const { return channels.empty() ? 0 : static_cast<int64_t>(channels[0].size()); }
};

namespace wavdetail {

inline void put_u32(std::string& s, uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u16(std::string& s, uint16_t v) {
  for (int i = 0; i < 2; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}
inline uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace wavdetail

inline void write_wav(const std::filesystem::path& path, const WavData& wav) {
  require(!wav.channels.empty(), "wav must have at least one channel");
  const uint16_t nch = static_cast<uint16_t>(wav.channels.size());
  const uint32_t nframes = static_cast<uint32_t>(wav.frames());
  for (const auto& c : wav.channels)
    require(static_cast<uint32_t>(c.size()) == nframes, "wav channels must have equal length");

  const uint32_t data_bytes = nframes * nch * 4u;
  std::string hdr;
  hdr.reserve(58);
  hdr += "RIFF";
  wavdetail::put_u32(hdr, 4 + 26 + 12 + 8 + data_bytes);
  hdr += "WAVE";
  hdr += "fmt ";
  wavdetail::put_u32(hdr, 18);
  wavdetail::put_u16(hdr, 3);  // IEEE float
  wavdetail::put_u16(hdr, nch);
  wavdetail::put_u32(hdr, static_cast<uint32_t>(wav.sample_rate));
  wavdetail::put_u32(hdr, static_cast<uint32_t>(wav.sample_rate) * nch * 4u);
  wavdetail::put_u16(hdr, static_cast<uint16_t>(nch * 4));
  wavdetail::put_u16(hdr, 32);
  wavdetail::put_u16(hdr, 0);  // no extension
  hdr += "fact";
  wavdetail::put_u32(hdr, 4);
  wavdetail::put_u32(hdr, nframes);
  hdr += "data";
  wavdetail::put_u32(hdr, data_bytes);

  std::ofstream f(path, std::ios::binary);
  require_data(f.good(), "cannot open for write: " + path.string());
  f.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));

  std::vector<float> inter(static_cast<size_t>(nframes) * nch);
  for (uint32_t i = 0; i < nframes; ++i)
    for (uint16_t c = 0; c < nch; ++c)
      inter[static_cast<size_t>(i) * nch + c] = static_cast<float>(wav.channels[c][i]);
  f.write(reinterpret_cast<const char*>(inter.data()), static_cast<std::streamsize>(inter.size() * 4));
  require_data(f.good(), "short write: " + path.string());
}

inline WavData read_wav(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  require_data(f.good(), "cannot open wav: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  require_data(buf.size() >= 44, "wav too short: " + path.string());
  require_data(std::memcmp(buf.data(), "RIFF", 4) == 0 && std::memcmp(buf.data() + 8, "WAVE", 4) == 0,
               "not a RIFF/WAVE file: " + path.string());

  WavData wav;
  uint16_t nch = 0, fmt = 0, bits = 0;
  size_t pos = 12;
  size_t data_pos = 0, data_len = 0;
  while (pos + 8 <= buf.size()) {
    const uint32_t chunk_len = wavdetail::get_u32(buf.data() + pos + 4);
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
      require_data(chunk_len >= 16, "bad fmt chunk");
      fmt = wavdetail::get_u16(buf.data() + pos + 8);
      nch = wavdetail::get_u16(buf.data() + pos + 10);
      wav.sample_rate = static_cast<int>(wavdetail::get_u32(buf.data() + pos + 12));
      bits = wavdetail::get_u16(buf.data() + pos + 22);
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      data_pos = pos + 8;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  require_data(fmt == 3 && bits == 32, "expected 32-bit float wav: " + path.string());
  require_data(nch > 0 && data_pos > 0 && data_pos + data_len <= buf.size(), "bad wav data chunk");

  const size_t nframes = data_len / (static_cast<size_t>(nch) * 4);
  wav.channels.assign(nch, std::vector<double>(nframes));
  const unsigned char* p = buf.data() + data_pos;
  for (size_t i = 0; i < nframes; ++i)
    for (uint16_t c = 0; c < nch; ++c) {
      float v;
      std::memcpy(&v, p + (i * nch + c) * 4, 4);
      wav.channels[c][i] = static_cast<double>(v);
    }
  return wav;
}

}  // namespace binloc
