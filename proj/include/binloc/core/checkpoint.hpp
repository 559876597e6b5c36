#pragma once

// Checkpoint container: JSON metadata + ordered named f64 arrays + optional
// optimizer state, in a little-endian binary layout that round-trips
// bit-exactly. Magic "BNLCCKPT", version 1.

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "binloc/core/adam.hpp"
#include "binloc/core/array.hpp"
#include "binloc/core/error.hpp"

namespace binloc {

namespace ckptdetail {

inline void put_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }

inline void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<uint64_t>(v)); }

inline uint8_t get_u8(std::istream& is) {
  int c = is.get();
  require_data(c != EOF, "checkpoint: truncated file");
  return static_cast<uint8_t>(c);
}

inline uint32_t get_u32(std::istream& is) {
  char b[4];
  is.read(b, 4);
  require_data(is.gcount() == 4, "checkpoint: truncated file");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  return v;
}

inline uint64_t get_u64(std::istream& is) {
  char b[8];
  is.read(b, 8);
  require_data(is.gcount() == 8, "checkpoint: truncated file");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(b[i])) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

inline void put_array(std::ostream& os, const Array& a) {
  put_u8(os, static_cast<uint8_t>(a.shape.size()));
  for (int d : a.shape) put_u32(os, static_cast<uint32_t>(d));
  for (double v : a.data) put_f64(os, v);
}

inline Array get_array(std::istream& is) {
  const int ndim = get_u8(is);
  std::vector<int> shape(static_cast<size_t>(ndim));
  for (int i = 0; i < ndim; ++i) {
    const uint32_t d = get_u32(is);
    require_data(d > 0 && d < (1u << 28), "checkpoint: implausible array dimension");
    shape[static_cast<size_t>(i)] = static_cast<int>(d);
  }
  const int64_t n = numel(shape);
  require_data(n < (int64_t{1} << 28), "checkpoint: implausible array size");
  std::vector<double> data(static_cast<size_t>(n));
  for (auto& v : data) v = get_f64(is);
  return Array(std::move(shape), std::move(data));
}

}  // namespace ckptdetail

struct Checkpoint {
  nlohmann::json meta;
  std::vector<std::pair<std::string, Array>> arrays;
  bool has_optimizer = false;
  AdamConfig adam_cfg;
  uint64_t adam_t = 0;
  std::vector<Array> adam_m;
  std::vector<Array> adam_v;

  const Array* find(const std::string& name) const {
    for (const auto& [n, a] : arrays)
      if (n == name) return &a;
    return nullptr;
  }
};

inline constexpr char kCheckpointMagic[8] = {'B', 'N', 'L', 'C', 'C', 'K', 'P', 'T'};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  using namespace ckptdetail;
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require_data(os.good(), "checkpoint: cannot open for writing: " + path);
  os.write(kCheckpointMagic, 8);
  put_u8(os, 1);
  const std::string meta = ck.meta.dump();
  put_u32(os, static_cast<uint32_t>(meta.size()));
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_u32(os, static_cast<uint32_t>(ck.arrays.size()));
  for (const auto& [name, a] : ck.arrays) {
    require(name.size() < 65536, "checkpoint: array name too long");
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_array(os, a);
  }
  put_u8(os, ck.has_optimizer ? 1 : 0);
  if (ck.has_optimizer) {
    require(ck.adam_m.size() == ck.arrays.size() && ck.adam_v.size() == ck.arrays.size(),
            "checkpoint: optimizer state count must match parameter count");
    put_f64(os, ck.adam_cfg.lr);
    put_f64(os, ck.adam_cfg.beta1);
    put_f64(os, ck.adam_cfg.beta2);
    put_f64(os, ck.adam_cfg.eps);
    put_f64(os, ck.adam_cfg.clip_norm);
    put_u64(os, ck.adam_t);
    for (const Array& a : ck.adam_m) put_array(os, a);
    for (const Array& a : ck.adam_v) put_array(os, a);
  }
  os.flush();
  require_data(os.good(), "checkpoint: write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace ckptdetail;
  std::ifstream is(path, std::ios::binary);
  require_data(is.good(), "checkpoint: cannot open: " + path);
  char magic[8];
  is.read(magic, 8);
  require_data(is.gcount() == 8 && std::equal(magic, magic + 8, kCheckpointMagic),
               "checkpoint: bad magic in " + path);
  const int version = get_u8(is);
  require_data(version == 1, "checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  const uint32_t meta_len = get_u32(is);
  require_data(meta_len < (1u << 24), "checkpoint: implausible metadata length");
  std::string meta(meta_len, '\0');
  is.read(meta.data(), meta_len);
  require_data(is.gcount() == static_cast<std::streamsize>(meta_len), "checkpoint: truncated metadata");
  try {
    ck.meta = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("checkpoint: corrupt metadata: ") + e.what());
  }

  const uint32_t n_arrays = get_u32(is);
  require_data(n_arrays < (1u << 16), "checkpoint: implausible array count");
  ck.arrays.reserve(n_arrays);
  for (uint32_t i = 0; i < n_arrays; ++i) {
    const uint32_t name_len = get_u32(is);
    require_data(name_len < 65536, "checkpoint: implausible name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    require_data(is.gcount() == static_cast<std::streamsize>(name_len), "checkpoint: truncated name");
    Array a = get_array(is);
    ck.arrays.emplace_back(std::move(name), std::move(a));
  }

  ck.has_optimizer = get_u8(is) != 0;
  if (ck.has_optimizer) {
    ck.adam_cfg.lr = get_f64(is);
    ck.adam_cfg.beta1 = get_f64(is);
    ck.adam_cfg.beta2 = get_f64(is);
    ck.adam_cfg.eps = get_f64(is);
    ck.adam_cfg.clip_norm = get_f64(is);
    ck.adam_t = get_u64(is);
    ck.adam_m.reserve(n_arrays);
    ck.adam_v.reserve(n_arrays);
    for (uint32_t i = 0; i < n_arrays; ++i) ck.adam_m.push_back(get_array(is));
    for (uint32_t i = 0; i < n_arrays; ++i) ck.adam_v.push_back(get_array(is));
    for (uint32_t i = 0; i < n_arrays; ++i) {
      require_data(ck.adam_m[i].shape == ck.arrays[i].second.shape &&
                       ck.adam_v[i].shape == ck.arrays[i].second.shape,
                   "checkpoint: optimizer state shape mismatch");
    }
  }
  return ck;
}

}  // namespace binloc
