#pragma once

// Dataset recipe and on-disk layout. Every scene is rendered twice, once per
// device side, and both views share a split so no acoustic scene leaks across
// train/val/test. Scene composition follows fixed cycles rather than draws,
// which pins the source-count quota exactly and guarantees every
// (noise, reverb) condition appears in every split of every count stratum.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/features/framing.hpp"
#include "binloc/io/wav.hpp"
#include "binloc/model/grid.hpp"
#include "binloc/sim/scene.hpp"
#include "binloc/util/hash.hpp"

namespace binloc {

struct DatasetRecipe {
  int n_clips = 600;
  double duration_s = 6.0;
  int sample_rate = 16000;
  uint64_t seed = 0;

  void validate() const {
    require_data(n_clips > 0, "need a positive clip count");
    require_data(duration_s >= 1.0, "clips must be at least 1 s");
    require_data(sample_rate > 0, "sample rate must be positive");
  }

  nlohmann::json to_json() const {
    return {{"n_clips", n_clips}, {"duration_s", duration_s}, {"sample_rate", sample_rate}, {"seed", seed}};
  }

  static DatasetRecipe from_json(const nlohmann::json& j) {
    DatasetRecipe r;
    r.n_clips = j.at("n_clips").get<int>();
    r.duration_s = j.at("duration_s").get<double>();
    r.sample_rate = j.at("sample_rate").get<int>();
    r.seed = j.at("seed").get<uint64_t>();
    return r;
  }
};

enum class Split { train, val, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

struct PlannedScene {
  int index = 0;
  Split split = Split::train;
  SceneSpec spec;
};

namespace datasetdetail {

// Each block of ten scenes carries the 20/40/40 source-count mix.
constexpr int kCountCycle[10] = {1, 2, 0, 1, 2, 1, 2, 0, 1, 2};

// Noise/reverb conditions per count stratum, indexed by 11*decade + offset
// of the scene's position inside its stratum. 11 is coprime to both cycle
// lengths, so every tenth position (the val and test slots) sweeps the whole
// condition table instead of locking onto one residue.
struct Condition {
  std::optional<double> snr_db;
  bool reverberant = false;
};

inline Condition condition_for(int count, int stratum_pos) {
  const int key = stratum_pos + stratum_pos / 10;
  if (count == 0) {
    // silent-plus-nothing clips teach nothing; zero-source scenes always
    // carry noise
    static const double snrs[3] = {5.0, 10.0, 15.0};
    return {snrs[key % 3], false};
  }
  static const Condition table[8] = {
      {std::nullopt, false}, {5.0, true},  {10.0, false}, {15.0, true},
      {std::nullopt, true},  {5.0, false}, {10.0, true},  {15.0, false},
  };
  return table[key % 8];
}

inline double circular_distance_deg(double a, double b) {
  double d = std::fabs(a - b);
  d = std::fmod(d, 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

}  // namespace datasetdetail

// Deterministic scene plan: count from a fixed cycle, condition from a fixed
// per-stratum cycle, continuous parameters from a per-scene substream. The
// split is positional within each count stratum (8th of ten to val, 9th to
// test), keeping the 80/10/10 fractions exact whenever strata are multiples
// of ten.
inline std::vector<PlannedScene> plan_scenes(const DatasetRecipe& recipe) {
  using namespace datasetdetail;
  recipe.validate();
  const int n_scenes = (recipe.n_clips + 1) / 2;
  std::vector<PlannedScene> plan;
  int stratum_pos[3] = {0, 0, 0};
  for (int s = 0; s < n_scenes; ++s) {
    const int count = kCountCycle[s % 10];
    const int pos = stratum_pos[count]++;
    PlannedScene p;
    p.index = s;
    p.split = (pos % 10 == 8) ? Split::val : (pos % 10 == 9) ? Split::test : Split::train;

    const Condition cond = condition_for(count, pos);
    Rng rng(Rng::derive(recipe.seed, "scene", static_cast<uint64_t>(s)));
    SceneSpec& spec = p.spec;
    spec.duration_s = recipe.duration_s;
    spec.sample_rate = recipe.sample_rate;
    spec.seed = Rng::derive(recipe.seed, "clip", static_cast<uint64_t>(s));
    spec.snr_db = cond.snr_db;
    spec.t60_s = cond.reverberant ? rng.uniform(0.1, 0.6) : 0.0;
    for (int i = 0; i < count; ++i) {
      SourceSpec src;
      src.azimuth_deg = rng.uniform(-180.0, 180.0);
      if (i == 1) {
        // keep concurrent sources at least one grid step apart so the frame
        // count class always equals the scene's source count
        while (circular_distance_deg(src.azimuth_deg, spec.sources[0].azimuth_deg) < 5.0)
          src.azimuth_deg = rng.uniform(-180.0, 180.0);
      }
      src.onset_s = rng.uniform(0.0, 0.6);
      src.offset_s = recipe.duration_s - rng.uniform(0.0, 0.6);
      src.level_db = rng.uniform(-3.0, 0.0);
      spec.sources.push_back(src);
    }
    plan.push_back(std::move(p));
  }
  return plan;
}

struct ClipRecord {
  std::string id;
  std::string wav_path;      // relative to the dataset root
  std::string sidecar_path;  // relative to the dataset root
  Split split = Split::train;
  int scene = 0;
  Side side = Side::right;
  int n_sources = 0;
  std::optional<double> snr_db;
  double t60_s = 0.0;
};

struct DatasetManifest {
  DatasetRecipe recipe;
  ClassGrid grid;
  Framing framing;
  std::string config_hash;   // hash of the full generation config
  std::string feature_hash;  // hash of the feature/grid sections; checked at eval
  std::vector<ClipRecord> clips;

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : clips)
      arr.push_back({{"id", c.id},
                     {"wav", c.wav_path},
                     {"sidecar", c.sidecar_path},
                     {"split", split_name(c.split)},
                     {"scene", c.scene},
                     {"side", side_name(c.side)},
                     {"n_sources", c.n_sources},
                     {"snr_db", c.snr_db ? nlohmann::json(*c.snr_db) : nlohmann::json(nullptr)},
                     {"t60_s", c.t60_s}});
    return {{"recipe", recipe.to_json()},
            {"grid", grid.to_json()},
            {"framing", {{"frame_len", framing.frame_len}, {"hop", framing.hop}}},
            {"config_hash", config_hash},
            {"feature_hash", feature_hash},
            {"clips", arr}};
  }

  static DatasetManifest from_json(const nlohmann::json& j) {
    DatasetManifest m;
    m.recipe = DatasetRecipe::from_json(j.at("recipe"));
    m.grid = ClassGrid::from_json(j.at("grid"));
    m.framing.frame_len = j.at("framing").at("frame_len").get<int>();
    m.framing.hop = j.at("framing").at("hop").get<int>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.feature_hash = j.at("feature_hash").get<std::string>();
    for (const auto& c : j.at("clips")) {
      ClipRecord rec;
      rec.id = c.at("id").get<std::string>();
      rec.wav_path = c.at("wav").get<std::string>();
      rec.sidecar_path = c.at("sidecar").get<std::string>();
      const std::string sp = c.at("split").get<std::string>();
      require_data(sp == "train" || sp == "val" || sp == "test", "unknown split name in manifest");
      rec.split = sp == "train" ? Split::train : sp == "val" ? Split::val : Split::test;
      rec.scene = c.at("scene").get<int>();
      const std::string side = c.at("side").get<std::string>();
      require_data(side == "left" || side == "right", "unknown device side in manifest");
      rec.side = side == "left" ? Side::left : Side::right;
      rec.n_sources = c.at("n_sources").get<int>();
      if (!c.at("snr_db").is_null()) rec.snr_db = c.at("snr_db").get<double>();
      rec.t60_s = c.at("t60_s").get<double>();
      m.clips.push_back(std::move(rec));
    }
    return m;
  }
};

inline nlohmann::json sidecar_json(const LabeledClip& clip, const ClassGrid& grid) {
  nlohmann::json doa = nlohmann::json::array();
  for (const auto& row : clip.y_doa) {
    nlohmann::json r = nlohmann::json::array();
    for (uint8_t v : row) r.push_back(static_cast<int>(v));
    doa.push_back(std::move(r));
  }
  return {{"scene", clip.spec.to_json()},
          {"side", side_name(clip.side)},
          {"grid", grid.to_json()},
          {"y_doa", doa},
          {"y_csd", clip.y_csd}};
}

inline void load_sidecar_labels(const std::filesystem::path& path, std::vector<std::vector<uint8_t>>& y_doa,
                                std::vector<int>& y_csd) {
  std::ifstream in(path);
  require_data(in.good(), "cannot open label sidecar");
  nlohmann::json j;
  try {
    in >> j;
    y_doa.clear();
    for (const auto& row : j.at("y_doa")) {
      std::vector<uint8_t> r;
      for (const auto& v : row) r.push_back(static_cast<uint8_t>(v.get<int>()));
      y_doa.push_back(std::move(r));
    }
    y_csd = j.at("y_csd").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed label sidecar: ") + e.what());
  }
  require_data(y_doa.size() == y_csd.size(), "label sidecar frame counts disagree");
}

// Renders the full dataset to out_dir: one WAV + one JSON sidecar per clip
// plus manifest.json. Rendering fans out across `jobs` threads; files are
// written in index order by the caller thread, so the artifacts are
// byte-identical regardless of the job count.
inline DatasetManifest generate_dataset(const DatasetRecipe& recipe, const std::filesystem::path& out_dir,
                                        const ClassGrid& grid, const Framing& framing,
                                        const std::string& config_hash, const std::string& feature_hash,
                                        int jobs = 1) {
  recipe.validate();
  require_data(jobs >= 1, "need at least one job");
  std::filesystem::create_directories(out_dir / "clips");

  const std::vector<PlannedScene> plan = plan_scenes(recipe);
  struct RenderedView {
    LabeledClip clip;
    ClipRecord record;
  };
  std::vector<RenderedView> views(static_cast<size_t>(recipe.n_clips));

  std::atomic<int> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&]() {
    try {
      for (;;) {
        const int v = next.fetch_add(1);
        if (v >= recipe.n_clips) return;
        const PlannedScene& scene = plan[static_cast<size_t>(v / 2)];
        MicLayout layout;
        layout.side = (v % 2 == 0) ? Side::right : Side::left;
        RenderedView& out = views[static_cast<size_t>(v)];
        out.clip = mix_scene(scene.spec, layout, grid, framing);

        char id[32];
        std::snprintf(id, sizeof id, "clip_%05d_%c", scene.index, layout.side == Side::right ? 'R' : 'L');
        out.record.id = id;
        out.record.wav_path = std::string("clips/") + id + ".wav";
        out.record.sidecar_path = std::string("clips/") + id + ".json";
        out.record.split = scene.split;
        out.record.scene = scene.index;
        out.record.side = layout.side;
        out.record.n_sources = static_cast<int>(scene.spec.sources.size());
        out.record.snr_db = scene.spec.snr_db;
        out.record.t60_s = scene.spec.t60_s;
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!first_error) first_error = std::current_exception();
    }
  };
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  DatasetManifest manifest;
  manifest.recipe = recipe;
  manifest.grid = grid;
  manifest.framing = framing;
  manifest.config_hash = config_hash;
  manifest.feature_hash = feature_hash;
  for (auto& v : views) {
    WavData wav;
    wav.sample_rate = recipe.sample_rate;
    wav.channels = std::move(v.clip.audio);
    write_wav(out_dir / v.record.wav_path, wav);
    v.clip.audio = std::move(wav.channels);

    std::ofstream side(out_dir / v.record.sidecar_path, std::ios::binary);
    require_data(side.good(), "cannot write label sidecar");
    side << sidecar_json(v.clip, grid).dump(2) << "\n";
    manifest.clips.push_back(std::move(v.record));
  }

  std::ofstream mf(out_dir / "manifest.json", std::ios::binary);
  require_data(mf.good(), "cannot write dataset manifest");
  mf << manifest.to_json().dump(2) << "\n";
  return manifest;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require_data(in.good(), "cannot open dataset manifest");
  nlohmann::json j;
  try {
    in >> j;
    return DatasetManifest::from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("malformed dataset manifest: ") + e.what());
  }
}

}  // namespace binloc
