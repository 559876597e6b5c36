#pragma once

// Experiment plumbing shared by the command-line driver and the test
// harnesses: the JSON config file, the content hashes stamped into every
// artifact, and the mapping from run modes to model presets. One root seed
// feeds every named substream, so a config file plus a seed pins the whole
// pipeline.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/eval/eval.hpp"
#include "binloc/features/features.hpp"
#include "binloc/model/model.hpp"
#include "binloc/sim/dataset.hpp"
#include "binloc/train/loss.hpp"
#include "binloc/train/trainer.hpp"

namespace binloc {

// Run modes as spelled on the command line. The oracle- prefix names the
// fusion stage fed with ground-truth counts.
inline const char* kRunModes[] = {"baseline", "dual", "oracle-early", "oracle-mid", "oracle-late"};

inline std::string preset_for_mode(const std::string& mode) {
  if (mode == "baseline" || mode == "dual") return mode;
  if (mode == "oracle-early" || mode == "early") return "early";
  if (mode == "oracle-mid" || mode == "mid") return "mid";
  if (mode == "oracle-late" || mode == "late") return "late";
  throw data_error("unknown run mode: " + mode);
}

inline std::string hex_hash(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct ExperimentConfig {
  uint64_t seed = 1;
  int grid_d = 24;
  int n_clips = 600;
  double duration_s = 6.0;
  int sample_rate = 16000;
  std::string mode = "baseline";
  double alpha = 0.97;
  TrainConfig training;
  DetectionConfig detection;

  void validate() const {
    require_data(grid_d == 16 || grid_d == 24, "grid must have 16 or 24 classes");
    preset_for_mode(mode);
    training.validate();
    detection.validate();
    loss_config().validate();
  }

  DatasetRecipe recipe() const {
    DatasetRecipe r;
    r.n_clips = n_clips;
    r.duration_s = duration_s;
    r.sample_rate = sample_rate;
    r.seed = seed;
    return r;
  }

  FeatureConfig features() const {
    FeatureConfig fc;
    fc.sample_rate = sample_rate;
    return fc;
  }

  ModelConfig model_config() const { return preset_config(grid_d, preset_for_mode(mode)); }

  LossConfig loss_config() const {
    LossConfig lc;
    lc.alpha = alpha;
    lc.dual_task = mode == "dual";
    return lc;
  }

  TrainConfig train_config() const {
    TrainConfig tc = training;
    tc.seed = seed;
    return tc;
  }

  // Everything that shapes the rendered dataset, hashed into the manifest
  // and checked by downstream commands.
  std::string config_hash() const {
    const nlohmann::json j = {{"grid_d", grid_d}, {"recipe", recipe().to_json()}};
    return "cfg-" + hex_hash(detail::fnv1a64(j.dump()));
  }

  std::string feature_hash() const { return "feat-" + hex_hash(detail::fnv1a64(features().to_json().dump())); }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    if (j.contains("seed")) c.seed = j.at("seed").get<uint64_t>();
    if (j.contains("grid_d")) c.grid_d = j.at("grid_d").get<int>();
    if (j.contains("mode")) c.mode = j.at("mode").get<std::string>();
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("dataset")) {
      const nlohmann::json& d = j.at("dataset");
      if (d.contains("n_clips")) c.n_clips = d.at("n_clips").get<int>();
      if (d.contains("duration_s")) c.duration_s = d.at("duration_s").get<double>();
      if (d.contains("sample_rate")) c.sample_rate = d.at("sample_rate").get<int>();
    }
    if (j.contains("training")) {
      const nlohmann::json& t = j.at("training");
      if (t.contains("batch_size")) c.training.batch_size = t.at("batch_size").get<int>();
      if (t.contains("small_batch_size")) c.training.small_batch_size = t.at("small_batch_size").get<int>();
      if (t.contains("small_dataset_threshold"))
        c.training.small_dataset_threshold = t.at("small_dataset_threshold").get<int>();
      if (t.contains("lr")) c.training.lr = t.at("lr").get<double>();
      if (t.contains("milestones")) c.training.milestones = t.at("milestones").get<std::vector<int>>();
      if (t.contains("decay")) c.training.decay = t.at("decay").get<double>();
      if (t.contains("max_epochs")) c.training.max_epochs = t.at("max_epochs").get<int>();
      if (t.contains("patience")) c.training.patience = t.at("patience").get<int>();
    }
    if (j.contains("evaluation")) {
      const nlohmann::json& e = j.at("evaluation");
      if (e.contains("tau")) c.detection.tau = e.at("tau").get<double>();
    }
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    require_data(in.good(), "cannot open config file: " + path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("config file is not valid JSON: " + std::string(e.what()));
    }
    try {
      return from_json(j);
    } catch (const nlohmann::json::exception& e) {
      throw data_error("config field has the wrong type: " + std::string(e.what()));
    }
  }

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"grid_d", grid_d},
            {"mode", mode},
            {"alpha", alpha},
            {"dataset", {{"n_clips", n_clips}, {"duration_s", duration_s}, {"sample_rate", sample_rate}}},
            {"training", training.to_json()},
            {"evaluation", {{"tau", detection.tau}}}};
  }
};

inline std::filesystem::path out_root() {
  if (const char* env = std::getenv("BINLOC_OUT_ROOT"); env && *env) return env;
  return "runs";
}

// Checkpoint metadata written by training and verified before evaluation and
// inference. Deliberately timestamp-free: identical runs must produce
// identical bytes.
inline nlohmann::json checkpoint_meta(const ExperimentConfig& cfg, const DatasetManifest& manifest,
                                      const TrainResult& result) {
  return {{"mode", cfg.mode},
          {"seed", cfg.seed},
          {"alpha", cfg.loss_config().effective_alpha()},
          {"dataset", manifest.config_hash},
          {"feature_hash", manifest.feature_hash},
          {"sample_rate", manifest.recipe.sample_rate},
          {"best_epoch", result.best_epoch},
          {"best_val_loss", result.best_val_loss},
          {"epochs_run", result.epochs_run},
          {"train_sequences", result.train_sequences},
          {"batch_size", result.batch_size_used},
          {"loss", cfg.loss_config().to_json()},
          {"training", cfg.train_config().to_json()}};
}

}  // namespace binloc
