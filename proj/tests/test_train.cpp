#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "binloc/core/error.hpp"
#include "binloc/core/rng.hpp"
#include "binloc/core/tape.hpp"
#include "binloc/model/model.hpp"
#include "binloc/sim/dataset.hpp"
#include "binloc/train/data.hpp"
#include "binloc/train/loss.hpp"
#include "binloc/train/sampler.hpp"
#include "binloc/train/trainer.hpp"
#include "tiny_dataset.hpp"

using namespace binloc;
using binloc::testutil::tiny_set;

namespace {

std::vector<Array> random_frames(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<Array> frames;
  for (int t = 0; t < n; ++t) {
    Array f = Array::zeros({2, kNumBands, kNumPairs});
    for (auto& v : f.data) v = rng.uniform(-1.0, 1.0);
    frames.push_back(std::move(f));
  }
  return frames;
}

bool same_bits(const Array& a, const Array& b) {
  if (a.shape != b.shape) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (std::bit_cast<uint64_t>(a.data[i]) != std::bit_cast<uint64_t>(b.data[i])) return false;
  return true;
}

TrainConfig tiny_train_config(uint64_t seed) {
  TrainConfig tc;
  tc.max_epochs = 3;
  tc.milestones = {1, 2};
  tc.patience = 3;
  tc.seed = seed;
  return tc;
}

nlohmann::json strip_wall_time(nlohmann::json history) {
  for (auto& rec : history) rec["wall_time_s"] = 0.0;
  return history;
}

}  // namespace

TEST_CASE("DOA loss matches summed binary cross-entropy", "[train]") {
  const int d = 24;
  Array p = Array::full({d}, 0.5);
  Array y = Array::zeros({d});
  y.data[3] = 1.0;
  REQUIRE(doa_loss(p, y) == Catch::Approx(24.0 * std::log(2.0)).margin(1e-9));

  // Perfect prediction survives only the clamp.
  REQUIRE(doa_loss(y, y) <= d * 1e-6);
  REQUIRE(doa_loss(y, y) > 0.0);

  // Scalar oracle written out longhand on an independent path.
  Rng rng(17);
  Array p5 = Array::zeros({5});
  Array y5 = Array::zeros({5});
  for (auto& v : p5.data) v = rng.uniform(0.01, 0.99);
  for (auto& v : y5.data) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
  double oracle = 0.0;
  for (int i = 0; i < 5; ++i) {
    const double pi = std::min(1.0 - 1e-7, std::max(1e-7, p5.data[static_cast<size_t>(i)]));
    if (y5.data[static_cast<size_t>(i)] != 0.0)
      oracle += -std::log(pi);
    else
      oracle += -std::log(1.0 - pi);
  }
  REQUIRE(doa_loss(p5, y5) == Catch::Approx(oracle).margin(1e-12));

  REQUIRE_THROWS_AS(doa_loss(p5, y), contract_error);

  // Tape value agrees with the plain function on the same logits.
  Rng zr(4);
  Array z = Array::zeros({d});
  for (auto& v : z.data) v = zr.uniform(-3.0, 3.0);
  Tape tape;
  const Ref zp = tape.leaf(z, true);
  const Ref l = doa_loss_ref(tape, zp, y);
  REQUIRE(tape.value(l).data[0] == Catch::Approx(doa_loss(posterior(z), y)).margin(1e-12));
}

TEST_CASE("count loss matches cross-entropy against a one-hot label", "[train]") {
  const Array uniform = Array::full({3}, 1.0 / 3.0);
  const Array one = Array({3}, {0.0, 1.0, 0.0});
  REQUIRE(csd_loss(uniform, one) == Catch::Approx(std::log(3.0)).margin(1e-9));
  REQUIRE(csd_loss(one, one) <= 1e-6);

  Rng rng(5);
  Array q = Array::zeros({3});
  double tot = 0.0;
  for (auto& v : q.data) {
    v = rng.uniform(0.05, 1.0);
    tot += v;
  }
  for (auto& v : q.data) v /= tot;
  REQUIRE(csd_loss(q, one) == Catch::Approx(-std::log(q.data[1])).margin(1e-12));

  REQUIRE_THROWS_AS(csd_loss(q, Array({3}, {0.5, 0.5, 0.0})), contract_error);
  REQUIRE_THROWS_AS(csd_loss(q, Array({3}, {1.0, 1.0, 0.0})), contract_error);

  Array z = Array({3}, {0.4, -1.2, 0.9});
  Tape tape;
  const Ref zp = tape.leaf(z, true);
  REQUIRE(tape.value(csd_loss_ref(tape, zp, one)).data[0] ==
          Catch::Approx(csd_loss(count_posterior(z), one)).margin(1e-12));
}

TEST_CASE("combined loss is the affine mixture", "[train]") {
  REQUIRE(combined_loss(2.0, 1.0, 0.97) == Catch::Approx(1.97).margin(1e-12));
  REQUIRE(combined_loss(2.0, 1.0, 1.0) == 2.0);
  REQUIRE(combined_loss(2.0, 1.0, 0.0) == 1.0);
  REQUIRE_THROWS_AS(combined_loss(1.0, 1.0, 1.5), contract_error);
  REQUIRE_THROWS_AS(combined_loss(1.0, 1.0, -0.1), contract_error);

  LossConfig doa_only;
  doa_only.alpha = 0.5;
  doa_only.dual_task = false;
  REQUIRE(doa_only.effective_alpha() == 1.0);
  LossConfig dual = LossConfig::from_json(nlohmann::json{{"alpha", 0.97}, {"mode", "dual_task"}});
  REQUIRE(dual.effective_alpha() == 0.97);
  REQUIRE_THROWS_AS(LossConfig::from_json(nlohmann::json{{"alpha", 2.0}, {"mode", "dual_task"}}), contract_error);
}

TEST_CASE("alpha one leaves the shared encoder gradients untouched", "[train]") {
  const auto frames = random_frames(10, 88);
  Array y = Array::zeros({24});
  y.data[5] = 1.0;
  y.data[11] = 1.0;
  const Array q = Array({3}, {0.0, 0.0, 1.0});

  const ModelConfig dual_cfg = preset_config(24, "dual");
  const ParamSet dual_ps = init_params(dual_cfg, 13);

  ModelConfig base_cfg = dual_cfg;
  base_cfg.csd_head = false;
  ParamSet base_ps{base_cfg, {dual_ps.values.begin(), dual_ps.values.begin() + 12}};

  Tape td;
  const ParamRefs pd = stage_params(td, dual_ps, true);
  const ForwardOut od = forward(td, dual_cfg, pd, frames, nullptr, nullptr, false);
  const Ref ld = doa_loss_ref(td, od.doa_logits, y);
  const Ref lc = csd_loss_ref(td, od.csd_logits, q);
  td.backward(combined_loss_ref(td, ld, lc, 1.0));

  Tape tb;
  const ParamRefs pb = stage_params(tb, base_ps, true);
  const ForwardOut ob = forward(tb, base_cfg, pb, frames, nullptr, nullptr, false);
  tb.backward(doa_loss_ref(tb, ob.doa_logits, y));

  for (size_t i = 0; i < 12; ++i) REQUIRE(same_bits(td.grad(pd.ordered[i]), tb.grad(pb.ordered[i])));
  // The count head stays out of the graph entirely at alpha one.
  for (double g : td.grad(pd.csd_w).data) REQUIRE(g == 0.0);

  // At alpha just below one the count head does train.
  Tape tm;
  const ParamRefs pm = stage_params(tm, dual_ps, true);
  const ForwardOut om = forward(tm, dual_cfg, pm, frames, nullptr, nullptr, false);
  tm.backward(combined_loss_ref(tm, doa_loss_ref(tm, om.doa_logits, y), csd_loss_ref(tm, om.csd_logits, q), 0.97));
  double head_norm = 0.0;
  for (double g : tm.grad(pm.csd_w).data) head_norm += g * g;
  REQUIRE(head_norm > 0.0);
}

TEST_CASE("learning rate decays at the milestones", "[train]") {
  TrainConfig tc;
  REQUIRE(lr_schedule(0, tc) == 1e-2);
  REQUIRE(lr_schedule(9, tc) == 1e-2);
  REQUIRE(lr_schedule(10, tc) == Catch::Approx(1e-3).epsilon(1e-12));
  REQUIRE(lr_schedule(17, tc) == Catch::Approx(1e-3).epsilon(1e-12));
  REQUIRE(lr_schedule(18, tc) == Catch::Approx(1e-4).epsilon(1e-12));
  REQUIRE(lr_schedule(24, tc) == Catch::Approx(1e-4).epsilon(1e-12));
  REQUIRE_THROWS_AS(lr_schedule(-1, tc), contract_error);

  TrainConfig bad = tc;
  bad.milestones = {10, 10};
  REQUIRE_THROWS_AS(bad.validate(), contract_error);
  bad.milestones = {10, 25};
  REQUIRE_THROWS_AS(bad.validate(), contract_error);
  bad.milestones = {};
  REQUIRE_NOTHROW(bad.validate());

  const TrainConfig back = TrainConfig::from_json(tc.to_json());
  REQUIRE(back.to_json() == tc.to_json());
}

TEST_CASE("window enumeration labels by the final frame", "[train]") {
  std::vector<std::vector<int>> streams;
  streams.push_back(std::vector<int>(9, 1));  // too short
  std::vector<int> s2(19, 0);
  for (int i = 12; i < 19; ++i) s2[static_cast<size_t>(i)] = i % 2 ? 1 : 3;
  streams.push_back(s2);

  int skipped = 0;
  const auto windows = enumerate_sequences(streams, 10, &skipped);
  REQUIRE(skipped == 1);
  REQUIRE(windows.size() == 10);
  for (const SeqSample& w : windows) {
    REQUIRE(w.clip == 1);
    const int raw = s2[static_cast<size_t>(w.start + 9)];
    REQUIRE(w.count == std::min(raw, 2));
  }
  std::set<int> starts;
  for (const SeqSample& w : windows) starts.insert(w.start);
  REQUIRE(starts.size() == 10);
  REQUIRE(*starts.begin() == 0);
  REQUIRE(*starts.rbegin() == 9);

  REQUIRE(enumerate_sequences({std::vector<int>(9, 0)}, 10).empty());
}

TEST_CASE("epoch rebalancing keeps every 2+ window at a 2:1:1 ratio", "[train]") {
  std::vector<SeqSample> pool;
  for (int i = 0; i < 700; ++i) pool.push_back({0, i, 0});
  for (int i = 0; i < 250; ++i) pool.push_back({1, i, 1});
  for (int i = 0; i < 60; ++i) pool.push_back({2, i, 2});

  Rng rng(3);
  const auto epoch = rebalance_epoch(pool, rng);
  int n[3] = {0, 0, 0};
  std::set<int> two_starts;
  for (const SeqSample& s : epoch) {
    ++n[s.count];
    if (s.count == 2) two_starts.insert(s.start);
  }
  REQUIRE(n[2] == 60);
  REQUIRE(two_starts.size() == 60);  // every 2+ window survives, none duplicated
  REQUIRE(n[1] == 60);
  REQUIRE(n[0] == 120);

  // Scarce classes are upsampled to keep the ratio.
  std::vector<SeqSample> scarce;
  for (int i = 0; i < 10; ++i) scarce.push_back({0, i, 0});
  for (int i = 0; i < 4; ++i) scarce.push_back({1, i, 1});
  for (int i = 0; i < 30; ++i) scarce.push_back({2, i, 2});
  Rng rng2(4);
  const auto ep2 = rebalance_epoch(scarce, rng2);
  int m[3] = {0, 0, 0};
  for (const SeqSample& s : ep2) ++m[s.count];
  REQUIRE(m[2] == 30);
  REQUIRE(m[1] == 30);
  REQUIRE(m[0] == 60);

  // No 2+ windows: the epoch is everything, shuffled.
  std::vector<SeqSample> flat;
  for (int i = 0; i < 50; ++i) flat.push_back({0, i, i % 2});
  Rng rng3(5);
  REQUIRE(rebalance_epoch(flat, rng3).size() == 50);

  Rng a(9), b(9);
  const auto e1 = rebalance_epoch(pool, a);
  const auto e2 = rebalance_epoch(pool, b);
  REQUIRE(e1.size() == e2.size());
  for (size_t i = 0; i < e1.size(); ++i) {
    REQUIRE(e1[i].clip == e2[i].clip);
    REQUIRE(e1[i].start == e2[i].start);
  }
}

TEST_CASE("a single optimizer step lowers the batch loss on most seeds", "[train]") {
  ModelConfig cfg = preset_config(24, "baseline");
  cfg.dropout = 0.0;  // the decrease check needs a deterministic objective

  // One fixed synthetic batch.
  const int batch = 8;
  std::vector<std::vector<Array>> seqs;
  std::vector<Array> targets;
  Rng brng(1234);
  for (int k = 0; k < batch; ++k) {
    seqs.push_back(random_frames(10, brng.next_u64()));
    Array y = Array::zeros({24});
    for (int d = 0; d < 24; ++d)
      if (brng.uniform() < 0.1) y.data[static_cast<size_t>(d)] = 1.0;
    targets.push_back(std::move(y));
  }

  auto batch_loss = [&](const ParamSet& ps) {
    double tot = 0.0;
    for (int k = 0; k < batch; ++k) {
      const Prediction pr = predict(cfg, ps, seqs[static_cast<size_t>(k)], nullptr);
      tot += doa_loss(pr.doa_posterior, targets[static_cast<size_t>(k)]);
    }
    return tot / batch;
  };

  int decreased = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    ParamSet ps = init_params(cfg, seed);
    const double before = batch_loss(ps);

    Tape tape;
    ParamRefs p = stage_params(tape, ps, true);
    Ref total = -1;
    for (int k = 0; k < batch; ++k) {
      const ForwardOut out = forward(tape, cfg, p, seqs[static_cast<size_t>(k)], nullptr, nullptr, true);
      const Ref l = doa_loss_ref(tape, out.doa_logits, targets[static_cast<size_t>(k)]);
      total = total < 0 ? l : tape.add(total, l);
    }
    tape.backward(tape.scale(total, 1.0 / batch));

    Adam adam;
    adam.config().lr = 1e-3;
    std::vector<Array> grads;
    std::vector<Array*> slots;
    for (size_t i = 0; i < p.ordered.size(); ++i) {
      grads.push_back(tape.grad(p.ordered[i]));
      slots.push_back(&ps.values[i]);
    }
    adam.step(slots, grads);
    if (batch_loss(ps) < before) ++decreased;
  }
  REQUIRE(decreased >= 18);
}

TEST_CASE("training on a rendered set is seeded end to end", "[train]") {
  const auto& tiny = tiny_set();
  const ModelConfig mcfg = preset_config(24, "baseline");
  LossConfig lcfg;
  lcfg.dual_task = false;

  std::ostringstream log;
  const TrainResult a = train(tiny.manifest, tiny.root, mcfg, tiny_train_config(5), lcfg, &log);
  const TrainResult b = train(tiny.manifest, tiny.root, mcfg, tiny_train_config(5), lcfg);

  REQUIRE(a.epochs_run == 3);
  REQUIRE(a.batch_size_used == 64);  // tiny sets shrink the batch
  REQUIRE(a.train_sequences > 100);
  REQUIRE(a.train_sequences < 5000);
  REQUIRE(a.history.size() == 3);

  for (int e = 0; e < 3; ++e) {
    const auto& rec = a.history.at(static_cast<size_t>(e));
    REQUIRE(rec.at("epoch").get<int>() == e);
    REQUIRE(rec.at("lr").get<double>() == Catch::Approx(1e-2 * std::pow(0.1, e)).epsilon(1e-12));
    REQUIRE(std::isfinite(rec.at("train_loss").get<double>()));
    REQUIRE(std::isfinite(rec.at("val_loss").get<double>()));
    REQUIRE(rec.at("wall_time_s").get<double>() >= 0.0);
    const auto& f1 = rec.at("val_F1_per_region");
    for (const char* region : {"frontal", "diagonal", "lateral"}) {
      REQUIRE(f1.contains(region));
      const double v = f1.at(region).get<double>();
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }

  // Best tracking is the running minimum of the recorded validation losses.
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  for (const auto& rec : a.history) {
    const double v = rec.at("val_loss").get<double>();
    if (v < best) {
      best = v;
      best_epoch = rec.at("epoch").get<int>();
    }
  }
  REQUIRE(a.best_val_loss == best);
  REQUIRE(a.best_epoch == best_epoch);

  // Same seed, same artifacts: history identical up to wall time, parameters
  // identical to the bit.
  REQUIRE(strip_wall_time(a.history) == strip_wall_time(b.history));

  // The written history normalizes the measured wall time away, so files
  // from equal seeds are byte-identical.
  const auto hist_path = std::filesystem::temp_directory_path() / "binloc_hist_test.json";
  write_history(hist_path, a.history);
  std::ifstream hin(hist_path);
  const nlohmann::json disk = nlohmann::json::parse(hin);
  REQUIRE(disk == strip_wall_time(a.history));
  REQUIRE(a.params.values.size() == b.params.values.size());
  for (size_t i = 0; i < a.params.values.size(); ++i) REQUIRE(same_bits(a.params.values[i], b.params.values[i]));

  const TrainResult c = train(tiny.manifest, tiny.root, mcfg, tiny_train_config(6), lcfg);
  REQUIRE(strip_wall_time(a.history) != strip_wall_time(c.history));
}

TEST_CASE("fusion training consumes the ground-truth count stream", "[train]") {
  const auto& tiny = tiny_set();

  // The windows the trainer will feed carry exactly the sidecar counts.
  FeatureConfig fc;
  const FeatureExtractor fx(fc);
  std::vector<std::vector<int>> streams;
  for (const ClipRecord& rec : tiny.manifest.clips) {
    if (rec.split != Split::train) continue;
    const ClipData clip = load_clip_data(tiny.root, rec, fx, tiny.manifest.feature_hash);
    streams.push_back(clip.y_csd);
  }
  const auto windows = enumerate_sequences(streams, 10);
  REQUIRE_FALSE(windows.empty());
  for (const SeqSample& w : windows) {
    const int raw = streams[static_cast<size_t>(w.clip)][static_cast<size_t>(w.start + 9)];
    REQUIRE(w.count == std::min(raw, 2));
  }

  // A late-fusion model trains on those counts.
  const ModelConfig mcfg = preset_config(24, "late");
  TrainConfig tc = tiny_train_config(7);
  tc.max_epochs = 1;
  tc.milestones = {};
  LossConfig lcfg;
  const TrainResult r = train(tiny.manifest, tiny.root, mcfg, tc, lcfg);
  REQUIRE(r.history.size() == 1);
  REQUIRE(std::isfinite(r.best_val_loss));
}

TEST_CASE("dual-task training moves the count head", "[train]") {
  const auto& tiny = tiny_set();
  const ModelConfig mcfg = preset_config(24, "dual");
  TrainConfig tc = tiny_train_config(8);
  tc.max_epochs = 1;
  tc.milestones = {};
  LossConfig lcfg;
  lcfg.dual_task = true;
  lcfg.alpha = 0.97;

  const ParamSet before = init_params(mcfg, tc.seed);
  const TrainResult r = train(tiny.manifest, tiny.root, mcfg, tc, lcfg);
  REQUIRE_FALSE(same_bits(r.params.values[12], before.values[12]));

  REQUIRE_THROWS_AS(train(tiny.manifest, tiny.root, preset_config(24, "baseline"), tc, lcfg), contract_error);
}

TEST_CASE("non-finite losses abort with batch coordinates", "[train]") {
  const auto& tiny = tiny_set();
  const ModelConfig mcfg = preset_config(24, "baseline");
  TrainConfig tc = tiny_train_config(9);
  tc.max_epochs = 1;
  tc.milestones = {};

  ParamSet poisoned = init_params(mcfg, tc.seed);
  poisoned.values[4].data[100] = std::numeric_limits<double>::quiet_NaN();

  try {
    train(tiny.manifest, tiny.root, mcfg, tc, LossConfig{}, nullptr, &poisoned);
    FAIL("training accepted a poisoned model");
  } catch (const numeric_error& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("epoch 0") != std::string::npos);
    REQUIRE(msg.find("batch 0") != std::string::npos);
    REQUIRE(msg.find("seed 9") != std::string::npos);
  }
}
