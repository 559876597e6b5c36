#pragma once

// Compact CRNN for multi-label direction-of-arrival classification: two 3x3
// convolutions over the band/pair feature planes, a linear projection, a GRU
// over ten frames, and a sigmoid head per DOA class. Optional extras share
// the trunk: a 3-way speaker-count head, and a one-hot count embedding that
// can be injected at the input (constant planes), after the projection, or
// after the recurrence.

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "binloc/core/array.hpp"
#include "binloc/core/checkpoint.hpp"
#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/core/tape.hpp"
#include "binloc/features/features.hpp"
#include "binloc/model/grid.hpp"

namespace binloc {

using Ref = Tape::Ref;

enum class FusionMode { none = 0, early, mid, late };

inline const char* fusion_name(FusionMode m) {
  switch (m) {
    case FusionMode::none: return "none";
    case FusionMode::early: return "early";
    case FusionMode::mid: return "mid";
    default: return "late";
  }
}

inline FusionMode fusion_from_name(const std::string& s) {
  if (s == "none") return FusionMode::none;
  if (s == "early") return FusionMode::early;
  if (s == "mid") return FusionMode::mid;
  if (s == "late") return FusionMode::late;
  throw data_error("unknown fusion mode: " + s);
}

// One-hot source count over {0, 1, 2+}.
using CountEmbedding = std::array<double, 3>;

inline CountEmbedding count_embedding(int count) {
  require(count >= 0, "count embedding needs a non-negative count");
  CountEmbedding s{};
  s[static_cast<size_t>(count > 2 ? 2 : count)] = 1.0;
  return s;
}

inline bool is_one_hot(const CountEmbedding& s) {
  int ones = 0;
  for (double v : s) {
    if (v == 1.0)
      ++ones;
    else if (v != 0.0)
      return false;
  }
  return ones == 1;
}

struct ModelConfig {
  ClassGrid grid{};
  FusionMode fusion = FusionMode::none;
  bool csd_head = false;
  int conv1 = 16;
  int conv2 = 24;
  int proj = 24;
  int rnn = 56;
  double dropout = 0.1;
  int seq_len = 10;

  int in_channels() const { return fusion == FusionMode::early ? 2 + 3 : 2; }
  int flat_width() const { return conv2 * kNumBands * kNumPairs; }
  int rnn_in() const { return proj + (fusion == FusionMode::mid ? 3 : 0); }
  int head_in() const { return rnn + (fusion == FusionMode::late ? 3 : 0); }

  void validate() const {
    require(grid.d == 16 || grid.d == 24, "model grid must have 16 or 24 classes");
    require(conv1 > 0 && conv2 > 0 && proj > 0 && rnn > 0, "model widths must be positive");
    require(dropout >= 0.0 && dropout < 1.0, "dropout must be in [0, 1)");
    require(seq_len >= 1, "sequence length must be at least 1");
  }

  nlohmann::json to_json() const {
    return {{"grid", grid.to_json()}, {"fusion", fusion_name(fusion)},
            {"csd_head", csd_head},   {"conv1", conv1},
            {"conv2", conv2},         {"proj", proj},
            {"rnn", rnn},             {"dropout", dropout},
            {"seq_len", seq_len}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.grid = ClassGrid::from_json(j.at("grid"));
    c.fusion = fusion_from_name(j.at("fusion").get<std::string>());
    c.csd_head = j.at("csd_head").get<bool>();
    c.conv1 = j.at("conv1").get<int>();
    c.conv2 = j.at("conv2").get<int>();
    c.proj = j.at("proj").get<int>();
    c.rnn = j.at("rnn").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.seq_len = j.at("seq_len").get<int>();
    c.validate();
    return c;
  }
};

// One trainable tensor: its checkpoint name, shape, and the fan-in that sets
// the init range.
struct ParamSpec {
  std::string name;
  std::vector<int> shape;
  int fan_in;
};

inline std::vector<ParamSpec> param_specs(const ModelConfig& c) {
  const int in_ch = c.in_channels();
  std::vector<ParamSpec> s = {
      {"conv1_w", {c.conv1, in_ch, 3, 3}, in_ch * 9},
      {"conv1_b", {c.conv1}, in_ch * 9},
      {"conv2_w", {c.conv2, c.conv1, 3, 3}, c.conv1 * 9},
      {"conv2_b", {c.conv2}, c.conv1 * 9},
      {"proj_w", {c.proj, c.flat_width()}, c.flat_width()},
      {"proj_b", {c.proj}, c.flat_width()},
      {"gru_wx", {3 * c.rnn, c.rnn_in()}, c.rnn_in()},
      {"gru_wh", {3 * c.rnn, c.rnn}, c.rnn},
      {"gru_bx", {3 * c.rnn}, c.rnn_in()},
      {"gru_bh", {3 * c.rnn}, c.rnn},
      {"doa_w", {c.grid.d, c.head_in()}, c.head_in()},
      {"doa_b", {c.grid.d}, c.head_in()},
  };
  if (c.csd_head) {
    s.push_back({"csd_w", {3, c.head_in()}, c.head_in()});
    s.push_back({"csd_b", {3}, c.head_in()});
  }
  return s;
}

inline int64_t param_count(const ModelConfig& c) {
  int64_t n = 0;
  for (const auto& sp : param_specs(c)) n += numel(sp.shape);
  return n;
}

// Every shipped configuration must stay a small model.
inline constexpr int64_t kMinParams = 30000;
inline constexpr int64_t kMaxParams = 46000;

inline const std::array<const char*, 5> kPresetModes = {"baseline", "dual", "early", "mid", "late"};

// Shipped configurations: "baseline" is the plain DOA model, "dual" adds the
// count head, and the fusion modes consume an externally supplied count.
inline ModelConfig preset_config(int grid_d, const std::string& mode) {
  ModelConfig c;
  c.grid = ClassGrid(grid_d);
  if (mode == "dual") {
    c.csd_head = true;
  } else if (mode == "early" || mode == "mid" || mode == "late") {
    c.fusion = fusion_from_name(mode);
  } else if (mode != "baseline") {
    throw data_error("unknown model preset: " + mode);
  }
  const int64_t n = param_count(c);
  require(n >= kMinParams && n <= kMaxParams,
          "preset parameter count " + std::to_string(n) + " is outside the model budget");
  return c;
}

// Parameter values, ordered exactly like param_specs(config).
struct ParamSet {
  ModelConfig config;
  std::vector<Array> values;
};

// Weights uniform in +-sqrt(1/fan_in), biases zero.
inline ParamSet init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamSet ps{cfg, {}};
  Rng rng(Rng::derive(seed, "init"));
  for (const auto& sp : param_specs(cfg)) {
    Array a = Array::zeros(sp.shape);
    if (sp.shape.size() > 1) {
      const double bound = std::sqrt(1.0 / sp.fan_in);
      for (auto& v : a.data) v = rng.uniform(-bound, bound);
    }
    ps.values.push_back(std::move(a));
  }
  return ps;
}

// Count injection. Early tiles s over the band/pair grid as constant channel
// planes so the convolution kernels can condition on it; mid and late append
// s to the running vector.
inline Array fuse(FusionMode stage, const Array& h, const CountEmbedding& s) {
  require(is_one_hot(s), "count embedding must be one-hot");
  if (stage == FusionMode::early) {
    require(h.shape.size() == 3, "early fusion expects channel planes");
    const int c = h.dim(0);
    const int plane = h.dim(1) * h.dim(2);
    Array out = Array::zeros({c + 3, h.dim(1), h.dim(2)});
    std::copy(h.data.begin(), h.data.end(), out.data.begin());
    for (int k = 0; k < 3; ++k)
      std::fill_n(out.data.begin() + static_cast<int64_t>(c + k) * plane, plane, s[static_cast<size_t>(k)]);
    return out;
  }
  require(stage == FusionMode::mid || stage == FusionMode::late, "fusion stage must be early, mid, or late");
  require(h.shape.size() == 1, "mid/late fusion expects a vector");
  Array out = Array::zeros({h.dim(0) + 3});
  std::copy(h.data.begin(), h.data.end(), out.data.begin());
  for (int k = 0; k < 3; ++k) out.data[static_cast<size_t>(h.dim(0) + k)] = s[static_cast<size_t>(k)];
  return out;
}

// Frames [start, start+count) of a feature tensor as channels-first
// [ipd, ilr] x band x pair planes.
inline std::vector<Array> sequence_input(const FeatureTensor& feat, int start, int count) {
  require(start >= 0 && count >= 1 && start + count <= feat.t, "sequence window out of range");
  std::vector<Array> frames;
  frames.reserve(static_cast<size_t>(count));
  for (int t = start; t < start + count; ++t) {
    Array f = Array::zeros({2, kNumBands, kNumPairs});
    size_t k = 0;
    for (int comp = 0; comp < 2; ++comp)
      for (int b = 0; b < kNumBands; ++b)
        for (int p = 0; p < kNumPairs; ++p) f.data[k++] = static_cast<double>(feat.at(t, b, p, comp));
    frames.push_back(std::move(f));
  }
  return frames;
}

// Tape handles for one staged copy of the parameters, in param_specs order.
struct ParamRefs {
  std::vector<Ref> ordered;
  Ref conv1_w = -1, conv1_b = -1, conv2_w = -1, conv2_b = -1;
  Ref proj_w = -1, proj_b = -1;
  Ref gru_wx = -1, gru_wh = -1, gru_bx = -1, gru_bh = -1;
  Ref doa_w = -1, doa_b = -1;
  Ref csd_w = -1, csd_b = -1;
};

inline ParamRefs stage_params(Tape& tape, const ParamSet& ps, bool trainable) {
  require(ps.values.size() == param_specs(ps.config).size(), "parameter set does not match its config");
  ParamRefs r;
  r.ordered.reserve(ps.values.size());
  for (const Array& a : ps.values) r.ordered.push_back(tape.leaf(a, trainable));
  size_t k = 0;
  auto next = [&] { return r.ordered[k++]; };
  r.conv1_w = next();
  r.conv1_b = next();
  r.conv2_w = next();
  r.conv2_b = next();
  r.proj_w = next();
  r.proj_b = next();
  r.gru_wx = next();
  r.gru_wh = next();
  r.gru_bx = next();
  r.gru_bh = next();
  r.doa_w = next();
  r.doa_b = next();
  if (ps.config.csd_head) {
    r.csd_w = next();
    r.csd_b = next();
  }
  return r;
}

struct ForwardOut {
  Ref doa_logits = -1;
  Ref csd_logits = -1;  // -1 when the count head is off
};

// Convolution stack and projection for one raw frame. Early fusion bakes the
// count planes into the input here, so the result is count-specific; every
// other mode gets a count-independent embedding.
inline Ref frame_embedding_ref(Tape& tape, const ModelConfig& cfg, const ParamRefs& p, const Array& frame,
                               const CountEmbedding* count) {
  require(frame.shape == (std::vector<int>{2, kNumBands, kNumPairs}),
          "frame must be [ipd, ilr] x bands x pairs, got " + shape_str(frame.shape));
  require(cfg.fusion != FusionMode::early || count != nullptr, "early fusion needs a count embedding");
  Ref x = tape.constant(cfg.fusion == FusionMode::early ? fuse(FusionMode::early, frame, *count) : frame);
  x = tape.relu(tape.conv2d(x, p.conv1_w, p.conv1_b));
  x = tape.relu(tape.conv2d(x, p.conv2_w, p.conv2_b));
  x = tape.reshape(x, {cfg.flat_width()});
  return tape.linear(x, p.proj_w, p.proj_b);
}

// Recurrent trunk over per-frame embeddings, then the heads on the final
// state. Factored out of forward() so evaluation can reuse embeddings cached
// across overlapping windows with identical arithmetic.
inline ForwardOut gru_trunk(Tape& tape, const ModelConfig& cfg, const ParamRefs& p, const std::vector<Ref>& embeds,
                            const CountEmbedding* count, Rng* dropout_rng, bool training) {
  require(static_cast<int>(embeds.size()) == cfg.seq_len, "embedding count must match the sequence length");
  require((count != nullptr) == (cfg.fusion != FusionMode::none),
          "count embedding is required exactly when fusion is on");
  if (count) require(is_one_hot(*count), "count embedding must be one-hot");
  const bool drop = training && cfg.dropout > 0.0;
  require(!drop || dropout_rng != nullptr, "training with dropout needs a random stream");

  Ref s_ref = -1;
  if (cfg.fusion == FusionMode::mid || cfg.fusion == FusionMode::late)
    s_ref = tape.constant(Array({3}, {(*count)[0], (*count)[1], (*count)[2]}));

  Ref h = tape.constant(Array::zeros({cfg.rnn}));
  for (Ref e : embeds) {
    Ref x = cfg.fusion == FusionMode::mid ? tape.concat(e, s_ref) : e;
    if (drop) x = tape.dropout(x, cfg.dropout, *dropout_rng, true);
    h = tape.gru_step(x, h, p.gru_wx, p.gru_wh, p.gru_bx, p.gru_bh);
  }
  Ref pre = cfg.fusion == FusionMode::late ? tape.concat(h, s_ref) : h;
  ForwardOut out;
  out.doa_logits = tape.linear(pre, p.doa_w, p.doa_b);
  if (cfg.csd_head) out.csd_logits = tape.linear(pre, p.csd_w, p.csd_b);
  return out;
}

// Full forward pass over one sequence of raw frames.
inline ForwardOut forward(Tape& tape, const ModelConfig& cfg, const ParamRefs& p, const std::vector<Array>& frames,
                          const CountEmbedding* count, Rng* dropout_rng, bool training) {
  require(static_cast<int>(frames.size()) == cfg.seq_len,
          "forward expects " + std::to_string(cfg.seq_len) + " frames, got " + std::to_string(frames.size()));
  require((count != nullptr) == (cfg.fusion != FusionMode::none),
          "count embedding is required exactly when fusion is on");
  std::vector<Ref> embeds;
  embeds.reserve(frames.size());
  for (const Array& f : frames) embeds.push_back(frame_embedding_ref(tape, cfg, p, f, count));
  return gru_trunk(tape, cfg, p, embeds, count, dropout_rng, training);
}

// Elementwise logistic, the multi-label class posterior.
inline Array posterior(const Array& logits) {
  Array out = logits;
  for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

// Softmax over count logits, max-shifted like the training graph.
inline Array count_posterior(const Array& logits) {
  Array out = logits;
  double mx = out.data[0];
  for (double v : out.data) mx = std::max(mx, v);
  double tot = 0.0;
  for (auto& v : out.data) {
    v = std::exp(v - mx);
    tot += v;
  }
  for (auto& v : out.data) v /= tot;
  return out;
}

struct Prediction {
  Array doa_posterior;  // D values
  Array csd_posterior;  // 3 values when the count head is on, else empty
};

inline Prediction predict(const ModelConfig& cfg, const ParamSet& ps, const std::vector<Array>& frames,
                          const CountEmbedding* count) {
  Tape tape(false);
  ParamRefs p = stage_params(tape, ps, false);
  ForwardOut f = forward(tape, cfg, p, frames, count, nullptr, false);
  Prediction pr;
  pr.doa_posterior = tape.value(tape.sigmoid(f.doa_logits));
  if (cfg.csd_head) pr.csd_posterior = tape.value(tape.softmax(f.csd_logits));
  return pr;
}

// Per-frame embeddings for a whole clip, computed once and shared by every
// window that contains the frame. Early fusion needs the count here instead.
inline std::vector<Array> clip_embeddings(const ModelConfig& cfg, const ParamSet& ps, const FeatureTensor& feat,
                                          const CountEmbedding* count = nullptr) {
  Tape tape(false);
  ParamRefs p = stage_params(tape, ps, false);
  std::vector<Array> out;
  out.reserve(static_cast<size_t>(feat.t));
  for (int t = 0; t < feat.t; ++t) {
    const Array frame = sequence_input(feat, t, 1)[0];
    out.push_back(tape.value(frame_embedding_ref(tape, cfg, p, frame, count)));
  }
  return out;
}

inline Prediction predict_from_embeddings(const ModelConfig& cfg, const ParamSet& ps,
                                          const std::vector<Array>& embeds, const CountEmbedding* count) {
  Tape tape(false);
  ParamRefs p = stage_params(tape, ps, false);
  std::vector<Ref> erefs;
  erefs.reserve(embeds.size());
  for (const Array& e : embeds) erefs.push_back(tape.constant(e));
  ForwardOut f = gru_trunk(tape, cfg, p, erefs, count, nullptr, false);
  Prediction pr;
  pr.doa_posterior = tape.value(tape.sigmoid(f.doa_logits));
  if (cfg.csd_head) pr.csd_posterior = tape.value(tape.softmax(f.csd_logits));
  return pr;
}

struct ForwardValues {
  Array doa_logits;
  Array csd_logits;  // empty when the count head is off
};

// Inference logits for many windows of one clip, staging the parameters once
// and sharing per-frame embeddings across overlapping windows. For fusion
// models counts[i] is the count fed with window starts[i]; early fusion needs
// one embedding set per distinct count, so those are built lazily.
inline std::vector<ForwardValues> window_logits(const ModelConfig& cfg, const ParamSet& ps,
                                                const FeatureTensor& feat, const std::vector<int>& starts,
                                                const std::vector<CountEmbedding>& counts) {
  const bool fused = cfg.fusion != FusionMode::none;
  require(!fused || counts.size() == starts.size(), "fusion needs one count per window");
  require(fused || counts.empty(), "counts are only accepted for fusion models");

  Tape tape(false);
  ParamRefs p = stage_params(tape, ps, false);
  auto embed_clip = [&](const CountEmbedding* s) {
    std::vector<Ref> e;
    e.reserve(static_cast<size_t>(feat.t));
    for (int t = 0; t < feat.t; ++t)
      e.push_back(frame_embedding_ref(tape, cfg, p, sequence_input(feat, t, 1)[0], s));
    return e;
  };

  std::vector<Ref> shared;
  std::vector<std::vector<Ref>> by_count(3);
  if (cfg.fusion != FusionMode::early) shared = embed_clip(nullptr);

  std::vector<ForwardValues> out;
  out.reserve(starts.size());
  for (size_t w = 0; w < starts.size(); ++w) {
    const CountEmbedding* s = fused ? &counts[w] : nullptr;
    if (s) require(is_one_hot(*s), "count embedding must be one-hot");
    const std::vector<Ref>* emb = &shared;
    if (cfg.fusion == FusionMode::early) {
      size_t slot = 0;
      while (counts[w][slot] != 1.0) ++slot;
      if (by_count[slot].empty()) by_count[slot] = embed_clip(s);
      emb = &by_count[slot];
    }
    const int start = starts[w];
    require(start >= 0 && start + cfg.seq_len <= feat.t, "window out of range");
    const std::vector<Ref> window(emb->begin() + start, emb->begin() + start + cfg.seq_len);
    const ForwardOut f = gru_trunk(tape, cfg, p, window, s, nullptr, false);
    ForwardValues v;
    v.doa_logits = tape.value(f.doa_logits);
    if (cfg.csd_head) v.csd_logits = tape.value(f.csd_logits);
    out.push_back(std::move(v));
  }
  return out;
}

// --- checkpoints ----------------------------------------------------------

inline constexpr const char* kModelMetaKey = "model";

// The checkpoint is self-describing: the config rides in the metadata and the
// arrays carry their spec names, so a file can be validated before use.
inline Checkpoint to_checkpoint(const ParamSet& ps, nlohmann::json meta = nlohmann::json::object()) {
  const auto specs = param_specs(ps.config);
  require(specs.size() == ps.values.size(), "parameter set does not match its config");
  Checkpoint ck;
  meta[kModelMetaKey] = ps.config.to_json();
  ck.meta = std::move(meta);
  ck.arrays.reserve(specs.size());
  for (size_t i = 0; i < specs.size(); ++i) {
    require(ps.values[i].shape == specs[i].shape, "parameter " + specs[i].name + " drifted from its spec shape");
    ck.arrays.emplace_back(specs[i].name, ps.values[i]);
  }
  return ck;
}

inline ParamSet params_from_checkpoint(const Checkpoint& ck) {
  require_data(ck.meta.contains(kModelMetaKey), "checkpoint carries no model description");
  ModelConfig cfg = ModelConfig::from_json(ck.meta.at(kModelMetaKey));
  const auto specs = param_specs(cfg);
  require_data(ck.arrays.size() == specs.size(), "checkpoint tensor count does not match its declared model");
  ParamSet ps{cfg, {}};
  ps.values.reserve(specs.size());
  for (size_t i = 0; i < specs.size(); ++i) {
    const auto& [name, a] = ck.arrays[i];
    require_data(name == specs[i].name && a.shape == specs[i].shape,
                 "checkpoint tensor " + name + " does not match the declared model");
    ps.values.push_back(a);
  }
  return ps;
}

inline void save_params(const std::string& path, const ParamSet& ps, nlohmann::json meta = nlohmann::json::object()) {
  save_checkpoint(path, to_checkpoint(ps, std::move(meta)));
}

// When expect is given, the stored architecture must be able to stand in for
// it: same fusion mode and grid, and identical tensor layout. Training-only
// knobs (dropout, sequence length) may differ.
inline ParamSet load_params(const std::string& path, const ModelConfig* expect = nullptr) {
  ParamSet ps = params_from_checkpoint(load_checkpoint(path));
  if (expect) {
    require_data(ps.config.fusion == expect->fusion, "checkpoint fusion mode does not match the requested model");
    require_data(ps.config.grid.d == expect->grid.d, "checkpoint class grid does not match the requested model");
    const auto want = param_specs(*expect);
    const auto got = param_specs(ps.config);
    bool same = want.size() == got.size();
    for (size_t i = 0; same && i < want.size(); ++i)
      same = want[i].name == got[i].name && want[i].shape == got[i].shape;
    require_data(same, "checkpoint tensor layout does not match the requested model");
  }
  return ps;
}

}  // namespace binloc
