#pragma once

// Detection metrics: thresholded posteriors become per-frame class sets,
// greedy nearest-angle matching with a one-class tolerance turns them into
// per-region TP/FP/FN, and counts are pooled across the left and right
// devices before any F1 is computed. Pooling order matters: F1 of summed
// counts, never the mean of per-device F1.

#include <algorithm>
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
#include "binloc/model/grid.hpp"
#include "binloc/model/model.hpp"
#include "binloc/sim/dataset.hpp"
#include "binloc/train/data.hpp"

namespace binloc {

struct DetectionConfig {
  double tau = 0.5;  // posterior >= tau counts as a detection, ties included
  int stride = 1;    // window hop in frames

  void validate() const {
    require(tau > 0.0 && tau < 1.0, "decision threshold must lie strictly inside (0, 1)");
    require(stride >= 1, "evaluation stride must be at least one frame");
  }
};

// One class step on the grid. Matching tolerance is a single class, so a
// prediction can claim the exact class or either neighbor.
constexpr int kMatchToleranceDeg = 5;

struct EvalCounts {
  int64_t tp = 0, fp = 0, fn = 0;

  int64_t denom() const { return 2 * tp + fp + fn; }
  double f1() const { return denom() == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom()); }
  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

  EvalCounts& operator+=(const EvalCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

inline std::vector<int> decide(const Array& p, double tau) {
  require(p.shape.size() == 1, "posteriors must be a vector");
  std::vector<int> active;
  for (size_t d = 0; d < p.data.size(); ++d) {
    require(p.data[d] >= 0.0 && p.data[d] <= 1.0, "posterior outside [0, 1]");
    if (p.data[d] >= tau) active.push_back(static_cast<int>(d));
  }
  return active;
}

// Greedy nearest-angle matching over one frame's class sets. Exact hits are
// claimed first, then one-class neighbors (both are within the 5 degree
// tolerance; nearer wins, equal distances resolve by ascending class). A
// matched prediction is a TP in the truth's region; leftovers are FP in the
// prediction's own region and FN in the truth's.
inline void match_frame(const std::vector<int>& pred, const std::vector<int>& truth, const ClassGrid& grid,
                        EvalCounts counts[3]) {
  std::vector<char> p_used(pred.size(), 0), t_used(truth.size(), 0);
  for (int delta : {0, 1}) {
    for (size_t i = 0; i < pred.size(); ++i) {
      if (p_used[i]) continue;
      for (size_t j = 0; j < truth.size(); ++j) {
        if (t_used[j] || std::abs(pred[i] - truth[j]) != delta) continue;
        p_used[i] = 1;
        t_used[j] = 1;
        ++counts[static_cast<int>(grid.region(truth[j]))].tp;
        break;
      }
    }
  }
  for (size_t i = 0; i < pred.size(); ++i)
    if (!p_used[i]) ++counts[static_cast<int>(grid.region(pred[i]))].fp;
  for (size_t j = 0; j < truth.size(); ++j)
    if (!t_used[j]) ++counts[static_cast<int>(grid.region(truth[j]))].fn;
}

// Per-count-class one-vs-rest tallies for the {0, 1, 2+} counting task.
struct CountTally {
  EvalCounts cls[3];
  int64_t truth_total[3] = {0, 0, 0};

  void add(int predicted, int truth) {
    require(predicted >= 0 && predicted <= 2 && truth >= 0 && truth <= 2, "count classes are 0, 1, 2+");
    ++truth_total[truth];
    if (predicted == truth) {
      ++cls[truth].tp;
    } else {
      ++cls[predicted].fp;
      ++cls[truth].fn;
    }
  }

  CountTally& operator+=(const CountTally& o) {
    for (int c = 0; c < 3; ++c) {
      cls[c] += o.cls[c];
      truth_total[c] += o.truth_total[c];
    }
    return *this;
  }
};

inline const char* count_class_name(int c) { return c == 0 ? "0" : c == 1 ? "1" : "2+"; }

// Count prediction from thresholded DOA detections: the number of active
// classes, saturated at 2+.
inline int count_from_detections(const std::vector<int>& active) {
  return std::min<int>(2, static_cast<int>(active.size()));
}

inline int count_from_posterior(const Array& q) {
  require(q.shape == std::vector<int>{3}, "count posterior must have three classes");
  int best = 0;
  for (int c = 1; c < 3; ++c)
    if (q.data[static_cast<size_t>(c)] > q.data[static_cast<size_t>(best)]) best = c;
  return best;
}

enum class EvalSubset { all, clean_single_source, two_source };

inline const char* subset_name(EvalSubset s) {
  switch (s) {
    case EvalSubset::all: return "all";
    case EvalSubset::clean_single_source: return "clean-single-source";
    case EvalSubset::two_source: return "two-source";
  }
  throw contract_error("unknown subset");
}

inline EvalSubset subset_from_name(const std::string& name) {
  for (EvalSubset s : {EvalSubset::all, EvalSubset::clean_single_source, EvalSubset::two_source})
    if (name == subset_name(s)) return s;
  throw data_error("unknown evaluation subset: " + name);
}

inline bool subset_contains(EvalSubset s, const ClipRecord& rec) {
  switch (s) {
    case EvalSubset::all: return true;
    case EvalSubset::clean_single_source: return rec.n_sources == 1 && !rec.snr_db.has_value();
    case EvalSubset::two_source: return rec.n_sources == 2;
  }
  throw contract_error("unknown subset");
}

// Everything accumulated for one device side.
struct SideAccum {
  EvalCounts region[3];
  CountTally counts;
  int64_t clips = 0;
  int64_t windows = 0;

  SideAccum& operator+=(const SideAccum& o) {
    for (int r = 0; r < 3; ++r) region[r] += o.region[r];
    counts += o.counts;
    clips += o.clips;
    windows += o.windows;
    return *this;
  }
};

struct EvalOptions {
  DetectionConfig det;
  Split split = Split::test;
  EvalSubset subset = EvalSubset::all;
  std::string method = "model";  // label carried into reports
  int jobs = 1;                  // per-clip fan-out
};

struct EvalReport {
  std::string method;
  int grid_d = 24;
  std::string fusion = "none";
  bool csd_head = false;
  std::string dataset;  // manifest config hash
  std::string split = "test";
  std::string subset = "all";
  double tau = 0.5;
  int tolerance_deg = kMatchToleranceDeg;

  SideAccum left, right;
  CountTally head_counts;  // filled only when the model has a count head
  int skipped_clips = 0;

  ClassGrid grid() const { return ClassGrid(grid_d); }

  EvalCounts pooled(Region r) const {
    EvalCounts c = left.region[static_cast<int>(r)];
    c += right.region[static_cast<int>(r)];
    return c;
  }

  CountTally pooled_counts() const {
    CountTally t = left.counts;
    t += right.counts;
    return t;
  }

  // Unweighted mean over regions that saw any detection or truth. Regions
  // absent from the grid never participate; regions with no data would pin
  // the mean to an arbitrary value, so they are left out too.
  double avg_f1() const {
    double sum = 0.0;
    int n = 0;
    for (Region r : {Region::frontal, Region::diagonal, Region::lateral}) {
      if (!grid().has_region(r)) continue;
      const EvalCounts c = pooled(r);
      if (c.denom() == 0) continue;
      sum += c.f1();
      ++n;
    }
    return n == 0 ? 0.0 : sum / n;
  }

  nlohmann::json to_json() const {
    auto counts_json = [](const EvalCounts& c) {
      return nlohmann::json{{"tp", c.tp},          {"fp", c.fp},
                            {"fn", c.fn},          {"precision", c.precision()},
                            {"recall", c.recall()}, {"f1", c.f1()}};
    };
    auto side_json = [&](const SideAccum& s) {
      nlohmann::json regions = nlohmann::json::object();
      for (Region r : {Region::frontal, Region::diagonal, Region::lateral})
        if (grid().has_region(r)) regions[region_name(r)] = counts_json(s.region[static_cast<int>(r)]);
      return nlohmann::json{{"clips", s.clips}, {"windows", s.windows}, {"regions", regions}};
    };
    auto tally_json = [&](const CountTally& t) {
      nlohmann::json per = nlohmann::json::object();
      for (int c = 0; c < 3; ++c) per[count_class_name(c)] = counts_json(t.cls[c]);
      return per;
    };

    nlohmann::json pooled_regions = nlohmann::json::object();
    for (Region r : {Region::frontal, Region::diagonal, Region::lateral})
      if (grid().has_region(r)) pooled_regions[region_name(r)] = counts_json(pooled(r));

    nlohmann::json count_metrics = {
        {"truth_per_class",
         {pooled_counts().truth_total[0], pooled_counts().truth_total[1], pooled_counts().truth_total[2]}},
        {"thresholded_doa", tally_json(pooled_counts())}};
    if (csd_head) count_metrics["count_head"] = tally_json(head_counts);

    return nlohmann::json{{"method", method},
                          {"grid_d", grid_d},
                          {"fusion", fusion},
                          {"csd_head", csd_head},
                          {"dataset", dataset},
                          {"split", split},
                          {"subset", subset},
                          {"protocol",
                           {{"threshold", tau},
                            {"tolerance_deg", tolerance_deg},
                            {"matching", "greedy nearest-angle, pooled left+right before F1"}}},
                          {"skipped_clips", skipped_clips},
                          {"pooled", {{"regions", pooled_regions}, {"avg_f1", avg_f1()}}},
                          {"per_side", {{"left", side_json(left)}, {"right", side_json(right)}}},
                          {"count_metrics", count_metrics}};
  }
};

namespace evaldetail {

inline std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace evaldetail

inline std::string csv_header(const ClassGrid& grid) {
  return grid.has_region(Region::lateral) ? "Method,Frontal_F1,Diagonal_F1,Lateral_F1,Avg"
                                          : "Method,Frontal_F1,Diagonal_F1,Avg";
}

inline std::string csv_row(const EvalReport& r) {
  using evaldetail::fixed4;
  std::string row = r.method;
  for (Region reg : {Region::frontal, Region::diagonal, Region::lateral})
    if (r.grid().has_region(reg)) row += "," + fixed4(r.pooled(reg).f1());
  row += "," + fixed4(r.avg_f1());
  return row;
}

inline void emit_report(const EvalReport& report, const std::filesystem::path& path, const std::string& format) {
  std::ofstream os(path);
  require_data(os.good(), "cannot write report: " + path.string());
  if (format == "json") {
    os << report.to_json().dump(2) << "\n";
  } else if (format == "csv") {
    os << csv_header(report.grid()) << "\n" << csv_row(report) << "\n";
  } else {
    throw data_error("unknown report format: " + format);
  }
  os.flush();
  require_data(os.good(), "report write failed: " + path.string());
}

// Scores one clip's already-computed window posteriors into an accumulator.
// `doa` holds one posterior vector per window; window w ends at frame
// last_frame[w], which indexes the label streams.
inline void accumulate_windows(const std::vector<Array>& doa, const std::vector<const Array*>& csd,
                               const std::vector<int>& last_frame, const std::vector<std::vector<uint8_t>>& y_doa,
                               const std::vector<int>& y_csd, const ClassGrid& grid, double tau, SideAccum& side,
                               CountTally* head_counts) {
  require(doa.size() == last_frame.size() && csd.size() == doa.size(), "window arrays must align");
  for (size_t w = 0; w < doa.size(); ++w) {
    const int last = last_frame[w];
    const std::vector<uint8_t>& row = y_doa[static_cast<size_t>(last)];
    std::vector<int> truth;
    for (size_t d = 0; d < row.size(); ++d)
      if (row[d]) truth.push_back(static_cast<int>(d));

    const std::vector<int> pred = decide(doa[w], tau);
    match_frame(pred, truth, grid, side.region);

    const int truth_count = std::min(2, y_csd[static_cast<size_t>(last)]);
    side.counts.add(count_from_detections(pred), truth_count);
    if (head_counts && csd[w]) head_counts->add(count_from_posterior(*csd[w]), truth_count);
    ++side.windows;
  }
  ++side.clips;
}

// Full protocol: slide windows over every matching clip, decide on the final
// frame, match, pool left and right counts. Fusion models receive the
// ground-truth count stream, which is exactly the oracle-count protocol.
// Clips fan out across `opt.jobs` threads; counts merge in manifest order.
inline EvalReport evaluate(const ParamSet& params, const DatasetManifest& manifest,
                           const std::filesystem::path& root, const EvalOptions& opt) {
  opt.det.validate();
  require(opt.jobs >= 1, "need at least one job");
  const ModelConfig& mcfg = params.config;
  require_data(mcfg.grid.d == manifest.grid.d, "checkpoint grid does not match the dataset grid");

  FeatureConfig fc;
  fc.sample_rate = manifest.recipe.sample_rate;
  fc.validate();
  const FeatureExtractor fx(fc);
  const bool fused = mcfg.fusion != FusionMode::none;

  EvalReport report;
  report.method = opt.method;
  report.grid_d = mcfg.grid.d;
  report.fusion = fusion_name(mcfg.fusion);
  report.csd_head = mcfg.csd_head;
  report.dataset = manifest.config_hash;
  switch (opt.split) {
    case Split::train: report.split = "train"; break;
    case Split::val: report.split = "val"; break;
    case Split::test: report.split = "test"; break;
  }
  report.subset = subset_name(opt.subset);
  report.tau = opt.det.tau;

  std::vector<const ClipRecord*> selected;
  for (const ClipRecord& rec : manifest.clips)
    if (rec.split == opt.split && subset_contains(opt.subset, rec)) selected.push_back(&rec);

  struct ClipResult {
    SideAccum side;
    CountTally head;
    bool is_left = false;
    bool skipped = false;
  };
  std::vector<ClipResult> results(selected.size());

  std::atomic<size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&]() {
    try {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= selected.size()) return;
        const ClipRecord& rec = *selected[i];
        ClipResult& out = results[i];
        out.is_left = rec.side == Side::left;

        const ClipData clip = load_clip_data(root, rec, fx, manifest.feature_hash);
        if (clip.feat.t < mcfg.seq_len) {
          out.skipped = true;
          continue;
        }

        std::vector<int> starts, last_frame;
        std::vector<CountEmbedding> counts;
        for (int s = 0; s + mcfg.seq_len <= clip.feat.t; s += opt.det.stride) {
          starts.push_back(s);
          last_frame.push_back(s + mcfg.seq_len - 1);
          if (fused) counts.push_back(count_embedding(clip.y_csd[static_cast<size_t>(s + mcfg.seq_len - 1)]));
        }
        const std::vector<ForwardValues> values = window_logits(mcfg, params, clip.feat, starts, counts);

        std::vector<Array> doa;
        std::vector<Array> csd_store;
        std::vector<const Array*> csd;
        doa.reserve(values.size());
        csd_store.reserve(values.size());
        for (const ForwardValues& v : values) {
          doa.push_back(posterior(v.doa_logits));
          if (mcfg.csd_head) csd_store.push_back(count_posterior(v.csd_logits));
        }
        for (size_t w = 0; w < values.size(); ++w) csd.push_back(mcfg.csd_head ? &csd_store[w] : nullptr);

        accumulate_windows(doa, csd, last_frame, clip.y_doa, clip.y_csd, mcfg.grid, opt.det.tau, out.side,
                           mcfg.csd_head ? &out.head : nullptr);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!first_error) first_error = std::current_exception();
    }
  };

  const int n_workers = std::max(1, std::min<int>(opt.jobs, static_cast<int>(selected.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int w = 0; w < n_workers; ++w) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (const ClipResult& r : results) {
    if (r.skipped) {
      ++report.skipped_clips;
      continue;
    }
    (r.is_left ? report.left : report.right) += r.side;
    report.head_counts += r.head;
  }

  require_data(report.left.windows + report.right.windows > 0, "no clips matched the evaluation split and subset");
  require_data(report.left.clips == report.right.clips,
               "left and right devices saw different clip sets; refusing to pool");
  return report;
}

}  // namespace binloc
