#pragma once

// The training loop: Adam over mini-batches of stride-1 windows, a
// piecewise-constant learning rate with fixed decay milestones, early
// stopping on validation loss, and a per-epoch JSON history. Fusion models
// consume ground-truth counts, one per window, taken from the label stream.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "binloc/core/adam.hpp"
#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/core/tape.hpp"
#include "binloc/model/model.hpp"
#include "binloc/sim/dataset.hpp"
#include "binloc/train/data.hpp"
#include "binloc/train/loss.hpp"
#include "binloc/train/sampler.hpp"

namespace binloc {

struct TrainConfig {
  int batch_size = 512;
  int small_batch_size = 64;          // used below the sequence threshold
  int small_dataset_threshold = 5000;
  double lr = 1e-2;
  std::vector<int> milestones = {10, 18};
  double decay = 0.1;
  int max_epochs = 25;
  int patience = 5;
  uint64_t seed = 1;

  void validate() const {
    require(batch_size > 0 && small_batch_size > 0, "batch sizes must be positive");
    require(small_dataset_threshold >= 0, "sequence threshold must be non-negative");
    require(lr > 0.0, "learning rate must be positive");
    require(decay > 0.0 && decay <= 1.0, "decay must be in (0, 1]");
    require(max_epochs >= 1, "need at least one epoch");
    require(patience >= 1, "patience must be at least one epoch");
    for (size_t i = 0; i < milestones.size(); ++i) {
      require(milestones[i] > 0 && milestones[i] < max_epochs, "milestones must fall inside the epoch range");
      require(i == 0 || milestones[i] > milestones[i - 1], "milestones must be strictly increasing");
    }
  }

  nlohmann::json to_json() const {
    return {{"batch_size", batch_size},
            {"small_batch_size", small_batch_size},
            {"small_dataset_threshold", small_dataset_threshold},
            {"lr", lr},
            {"milestones", milestones},
            {"decay", decay},
            {"max_epochs", max_epochs},
            {"patience", patience},
            {"seed", seed}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.batch_size = j.at("batch_size").get<int>();
    c.small_batch_size = j.at("small_batch_size").get<int>();
    c.small_dataset_threshold = j.at("small_dataset_threshold").get<int>();
    c.lr = j.at("lr").get<double>();
    c.milestones = j.at("milestones").get<std::vector<int>>();
    c.decay = j.at("decay").get<double>();
    c.max_epochs = j.at("max_epochs").get<int>();
    c.patience = j.at("patience").get<int>();
    c.seed = j.at("seed").get<uint64_t>();
    c.validate();
    return c;
  }
};

inline double lr_schedule(int epoch, const TrainConfig& c) {
  require(epoch >= 0, "epoch must be non-negative");
  double lr = c.lr;
  for (int m : c.milestones)
    if (epoch >= m) lr *= c.decay;
  return lr;
}

struct TrainResult {
  ParamSet params;  // best epoch by validation loss
  int best_epoch = 0;
  double best_val_loss = std::numeric_limits<double>::infinity();
  nlohmann::json history = nlohmann::json::array();
  int epochs_run = 0;
  int train_sequences = 0;  // stride-1 windows before rebalancing
  int batch_size_used = 0;
  int skipped_clips = 0;
};

namespace traindetail {

inline Array multi_hot(const std::vector<uint8_t>& row) {
  Array y = Array::zeros({static_cast<int>(row.size())});
  for (size_t i = 0; i < row.size(); ++i) y.data[i] = row[i] ? 1.0 : 0.0;
  return y;
}

inline Array count_one_hot(int count) {
  const CountEmbedding s = count_embedding(count);
  return Array({3}, {s[0], s[1], s[2]});
}

struct RegionTally {
  int64_t tp = 0, fp = 0, fn = 0;
  double f1() const {
    const int64_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
};

// Validation pass: mean combined loss over every window of every clip, plus
// frame-level per-region F1 at threshold 0.5.
struct ValResult {
  double loss = 0.0;
  std::map<std::string, double> f1;
};

inline ValResult validate_pass(const ModelConfig& mcfg, const ParamSet& params, const LossConfig& lcfg,
                               const std::vector<ClipData>& clips) {
  const bool fused = mcfg.fusion != FusionMode::none;
  const double alpha = lcfg.effective_alpha();
  double loss_sum = 0.0;
  int64_t n_windows = 0;
  RegionTally tally[3];

  for (const ClipData& clip : clips) {
    if (clip.feat.t < mcfg.seq_len) continue;
    std::vector<int> starts;
    std::vector<CountEmbedding> counts;
    for (int s = 0; s + mcfg.seq_len <= clip.feat.t; ++s) {
      starts.push_back(s);
      if (fused) counts.push_back(count_embedding(clip.y_csd[static_cast<size_t>(s + mcfg.seq_len - 1)]));
    }
    const auto values = window_logits(mcfg, params, clip.feat, starts, counts);
    for (size_t w = 0; w < values.size(); ++w) {
      const int last = starts[w] + mcfg.seq_len - 1;
      const Array y = multi_hot(clip.y_doa[static_cast<size_t>(last)]);
      const Array p = posterior(values[w].doa_logits);
      double l = doa_loss(p, y);
      if (lcfg.dual_task && mcfg.csd_head)
        l = combined_loss(l, csd_loss(count_posterior(values[w].csd_logits),
                                      count_one_hot(clip.y_csd[static_cast<size_t>(last)])),
                          alpha);
      loss_sum += l;
      ++n_windows;
      for (int d = 0; d < mcfg.grid.d; ++d) {
        const bool pred = p.data[static_cast<size_t>(d)] >= 0.5;
        const bool truth = y.data[static_cast<size_t>(d)] != 0.0;
        RegionTally& t = tally[static_cast<int>(mcfg.grid.region(d))];
        if (pred && truth)
          ++t.tp;
        else if (pred)
          ++t.fp;
        else if (truth)
          ++t.fn;
      }
    }
  }
  require_data(n_windows > 0, "validation split has no full-length windows");

  ValResult out;
  out.loss = loss_sum / static_cast<double>(n_windows);
  for (Region r : {Region::frontal, Region::diagonal, Region::lateral})
    if (mcfg.grid.has_region(r)) out.f1[region_name(r)] = tally[static_cast<int>(r)].f1();
  return out;
}

}  // namespace traindetail

// Runs the optimization against a generated dataset. `init` overrides the
// seeded initialization (used by tests; production runs leave it null).
inline TrainResult train(const DatasetManifest& manifest, const std::filesystem::path& root,
                         const ModelConfig& mcfg, const TrainConfig& tcfg, const LossConfig& lcfg,
                         std::ostream* log = nullptr, const ParamSet* init = nullptr) {
  using traindetail::count_one_hot;
  using traindetail::multi_hot;

  mcfg.validate();
  tcfg.validate();
  lcfg.validate();
  require(mcfg.csd_head || !lcfg.dual_task, "dual-task training needs the count head");
  const bool fused = mcfg.fusion != FusionMode::none;

  FeatureConfig fc;
  fc.sample_rate = manifest.recipe.sample_rate;
  fc.validate();
  require_data(fc.framing().frame_len == manifest.framing.frame_len && fc.framing().hop == manifest.framing.hop,
               "manifest framing does not match the feature configuration");
  const FeatureExtractor fx(fc);

  std::vector<ClipData> train_clips, val_clips;
  for (const ClipRecord& rec : manifest.clips) {
    if (rec.split == Split::train)
      train_clips.push_back(load_clip_data(root, rec, fx, manifest.feature_hash));
    else if (rec.split == Split::val)
      val_clips.push_back(load_clip_data(root, rec, fx, manifest.feature_hash));
  }
  require_data(!train_clips.empty() && !val_clips.empty(), "manifest needs train and val splits");

  std::vector<std::vector<int>> count_streams;
  count_streams.reserve(train_clips.size());
  for (const ClipData& c : train_clips) count_streams.push_back(c.y_csd);
  TrainResult result;
  const std::vector<SeqSample> all_windows = enumerate_sequences(count_streams, mcfg.seq_len, &result.skipped_clips);
  require_data(!all_windows.empty(), "training split has no full-length windows");
  if (result.skipped_clips > 0 && log)
    (*log) << "warning: " << result.skipped_clips << " training clips are shorter than one window and were skipped\n";

  result.train_sequences = static_cast<int>(all_windows.size());
  const int batch_size =
      result.train_sequences < tcfg.small_dataset_threshold ? tcfg.small_batch_size : tcfg.batch_size;
  result.batch_size_used = batch_size;

  ParamSet params = init ? *init : init_params(mcfg, tcfg.seed);
  require(params.config.to_json() == mcfg.to_json(), "initial parameters were built for a different model");
  Adam adam;
  adam.config().lr = tcfg.lr;

  const double alpha = lcfg.effective_alpha();
  int since_best = 0;

  for (int epoch = 0; epoch < tcfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, tcfg);
    adam.config().lr = lr;

    Rng erng(Rng::derive(tcfg.seed, "epoch", static_cast<uint64_t>(epoch)));
    Rng drop_rng(Rng::derive(tcfg.seed, "dropout", static_cast<uint64_t>(epoch)));
    const std::vector<SeqSample> epoch_windows = rebalance_epoch(all_windows, erng);

    double loss_sum = 0.0;
    const int n_epoch = static_cast<int>(epoch_windows.size());
    for (int b0 = 0, batch_index = 0; b0 < n_epoch; b0 += batch_size, ++batch_index) {
      const int n_batch = std::min(batch_size, n_epoch - b0);
      try {
        Tape tape;
        ParamRefs p = stage_params(tape, params, true);
        Ref total = -1;
        for (int k = 0; k < n_batch; ++k) {
          const SeqSample& w = epoch_windows[static_cast<size_t>(b0 + k)];
          const ClipData& clip = train_clips[static_cast<size_t>(w.clip)];
          const int last = w.start + mcfg.seq_len - 1;
          const CountEmbedding s = count_embedding(w.count);
          const ForwardOut out = forward(tape, mcfg, p, sequence_input(clip.feat, w.start, mcfg.seq_len),
                                         fused ? &s : nullptr, &drop_rng, true);
          Ref l = doa_loss_ref(tape, out.doa_logits, multi_hot(clip.y_doa[static_cast<size_t>(last)]));
          if (lcfg.dual_task && alpha < 1.0)
            l = combined_loss_ref(tape, l, csd_loss_ref(tape, out.csd_logits, count_one_hot(w.count)), alpha);
          total = total < 0 ? l : tape.add(total, l);
        }
        const Ref mean = tape.scale(total, 1.0 / n_batch);
        const double batch_loss = tape.value(mean).data[0];
        if (!std::isfinite(batch_loss)) throw numeric_error("non-finite batch loss");
        tape.backward(mean);

        std::vector<Array> grads;
        std::vector<Array*> slots;
        grads.reserve(p.ordered.size());
        slots.reserve(p.ordered.size());
        for (size_t i = 0; i < p.ordered.size(); ++i) {
          grads.push_back(tape.grad(p.ordered[i]));
          slots.push_back(&params.values[i]);
        }
        adam.step(slots, grads);
        loss_sum += batch_loss * n_batch;
      } catch (const numeric_error& e) {
        throw numeric_error("training aborted: " + std::string(e.what()) + " at epoch " + std::to_string(epoch) +
                            " batch " + std::to_string(batch_index) + " (seed " + std::to_string(tcfg.seed) + ")");
      }
    }
    const double train_loss = loss_sum / n_epoch;

    const traindetail::ValResult val = traindetail::validate_pass(mcfg, params, lcfg, val_clips);
    const double wall =
        std::chrono::duration_cast<std::chrono::duration<double>>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::json f1 = nlohmann::json::object();
    for (const auto& [name, v] : val.f1) f1[name] = v;
    result.history.push_back({{"epoch", epoch},
                              {"lr", lr},
                              {"train_loss", train_loss},
                              {"val_loss", val.loss},
                              {"val_F1_per_region", f1},
                              {"wall_time_s", wall}});
    result.epochs_run = epoch + 1;

    if (val.loss < result.best_val_loss) {
      result.best_val_loss = val.loss;
      result.best_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (log)
      (*log) << "epoch " << epoch << " lr " << lr << " train " << train_loss << " val " << val.loss << " ("
             << wall << " s)" << (since_best == 0 ? " *" : "") << "\n";
    if (since_best >= tcfg.patience) break;
  }
  return result;
}

// The on-disk history is part of the reproducibility contract: the same seed
// must give the same bytes, so the one measured quantity is normalized out.
// Per-epoch timing streams on the training log instead.
inline void write_history(const std::filesystem::path& path, nlohmann::json history) {
  for (auto& rec : history)
    if (rec.contains("wall_time_s")) rec["wall_time_s"] = 0.0;
  std::ofstream os(path);
  require_data(os.good(), "cannot write history: " + path.string());
  os << history.dump(2) << "\n";
  require_data(os.good(), "history write failed: " + path.string());
}

}  // namespace binloc
