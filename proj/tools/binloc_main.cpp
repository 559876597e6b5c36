// Experiment driver. Subcommands cover the whole pipeline: gen-data renders
// a labeled dataset, train fits a model against a manifest, eval scores a
// checkpoint into CSV/JSON reports, gradcheck audits the autodiff engine,
// and infer streams per-frame detections for a single WAV file.
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "binloc/cli/experiment.hpp"
#include "binloc/core/checkpoint.hpp"
#include "binloc/core/error.hpp"
#include "binloc/core/gradcheck.hpp"
#include "binloc/eval/eval.hpp"
#include "binloc/io/wav.hpp"
#include "binloc/model/model.hpp"
#include "binloc/sim/dataset.hpp"
#include "binloc/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace binloc;

namespace {

// Flag problems CLI11 cannot see (cross-flag requirements).
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int run_gen_data(const ExperimentConfig& cfg, const fs::path& out_dir, int jobs) {
  cfg.validate();
  const DatasetManifest manifest = generate_dataset(cfg.recipe(), out_dir, ClassGrid(cfg.grid_d),
                                                    cfg.features().framing(), cfg.config_hash(), cfg.feature_hash(),
                                                    jobs);
  int split_counts[3] = {0, 0, 0};
  for (const ClipRecord& rec : manifest.clips) ++split_counts[static_cast<int>(rec.split)];
  std::cout << "wrote " << manifest.clips.size() << " clips (train " << split_counts[0] << ", val "
            << split_counts[1] << ", test " << split_counts[2] << ") to " << out_dir.string() << "\n"
            << "config " << manifest.config_hash << " features " << manifest.feature_hash << "\n";
  return 0;
}

int run_train(const ExperimentConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  cfg.validate();
  const DatasetManifest manifest = load_manifest(data_dir / "manifest.json");
  require_data(manifest.grid.d == cfg.grid_d,
               "config grid (" + std::to_string(cfg.grid_d) + ") does not match the dataset grid (" +
                   std::to_string(manifest.grid.d) + ")");

  const ModelConfig mcfg = cfg.model_config();
  std::cout << "mode " << cfg.mode << " (fusion " << fusion_name(mcfg.fusion) << ", count head "
            << (mcfg.csd_head ? "on" : "off") << "), " << param_count(mcfg) << " parameters, seed " << cfg.seed
            << "\n";

  const TrainResult result = train(manifest, data_dir, mcfg, cfg.train_config(), cfg.loss_config(), &std::cout);

  fs::create_directories(out_dir);
  const fs::path ckpt = out_dir / "checkpoint.ckpt";
  save_params(ckpt.string(), result.params, checkpoint_meta(cfg, manifest, result));
  write_history(out_dir / "history.json", result.history);
  std::cout << "best epoch " << result.best_epoch << " val loss " << result.best_val_loss << "\n"
            << "wrote " << ckpt.string() << " and " << (out_dir / "history.json").string() << "\n";
  return 0;
}

int run_eval(const fs::path& ckpt_path, const fs::path& data_dir, fs::path out_dir, const std::string& split,
             const std::string& subset, double tau, std::string method, int jobs) {
  const DatasetManifest manifest = load_manifest(data_dir / "manifest.json");
  const Checkpoint ck = load_checkpoint(ckpt_path.string());

  require_data(ck.meta.contains("feature_hash"),
               "checkpoint carries no feature hash; re-train before evaluating");
  const std::string ck_hash = ck.meta.at("feature_hash").get<std::string>();
  require_data(ck_hash == manifest.feature_hash,
               "feature configuration drift: checkpoint was trained on " + ck_hash + " but the dataset manifest has " +
                   manifest.feature_hash);

  const ParamSet params = params_from_checkpoint(ck);

  EvalOptions opt;
  opt.det.tau = tau;
  opt.split = split == "train" ? Split::train : split == "val" ? Split::val : Split::test;
  opt.subset = subset_from_name(subset);
  opt.jobs = jobs;
  if (method.empty()) method = ck.meta.value("mode", std::string("model"));
  opt.method = method;

  const EvalReport report = evaluate(params, manifest, data_dir, opt);

  if (out_dir.empty()) out_dir = ckpt_path.parent_path();
  fs::create_directories(out_dir);
  const std::string stem = "report-" + split + "-" + subset;
  emit_report(report, out_dir / (stem + ".json"), "json");
  emit_report(report, out_dir / (stem + ".csv"), "csv");

  std::cout << csv_header(report.grid()) << "\n" << csv_row(report) << "\n";
  std::cout << "wrote " << (out_dir / (stem + ".csv")).string() << " and .json\n";
  return 0;
}

int run_gradcheck_cmd(uint64_t seed, int trials, bool corrupt) {
  const std::vector<GradCheckResult> results = run_gradcheck(seed, trials, corrupt ? "linear" : "");
  bool all_pass = true;
  std::printf("%-16s %12s %8s %8s  %s\n", "layer", "max_rel_err", "trials", "coords", "status");
  for (const GradCheckResult& r : results) {
    const bool ok = r.pass();
    all_pass = all_pass && ok;
    std::printf("%-16s %12.3e %8d %8d  %s\n", r.layer.c_str(), r.max_rel_err, r.trials, r.coords,
                ok ? "pass" : "FAIL");
  }
  if (!all_pass) {
    std::fprintf(stderr, "gradient check failed: at least one layer exceeded %g\n", kGradTol);
    return 3;
  }
  return 0;
}

int run_infer(const fs::path& ckpt_path, const fs::path& wav_path, int count, double tau) {
  const Checkpoint ck = load_checkpoint(ckpt_path.string());
  const ParamSet params = params_from_checkpoint(ck);
  const ModelConfig& mcfg = params.config;
  const bool fused = mcfg.fusion != FusionMode::none;

  if (fused && count < 0)
    throw usage_error("this checkpoint fuses a source count; pass --count 0|1|2");
  if (!fused && count >= 0)
    throw usage_error("this checkpoint takes no source count; drop --count");

  const WavData wav = read_wav(wav_path);
  require_data(static_cast<int>(wav.channels.size()) == 3,
               "expected a 3-channel recording, got " + std::to_string(wav.channels.size()) + " channels");
  const int expected_rate = ck.meta.value("sample_rate", 16000);
  require_data(wav.sample_rate == expected_rate,
               "sample rate mismatch: clip has " + std::to_string(wav.sample_rate) + " Hz, model expects " +
                   std::to_string(expected_rate) + " Hz");

  FeatureConfig fc;
  fc.sample_rate = wav.sample_rate;
  fc.validate();
  const FeatureExtractor fx(fc);
  const FeatureTensor feat = fx.build(wav.channels);
  require_data(feat.t >= mcfg.seq_len, "clip too short: " + std::to_string(feat.t) + " frames, need " +
                                           std::to_string(mcfg.seq_len));

  std::vector<int> starts;
  std::vector<CountEmbedding> counts;
  for (int s = 0; s + mcfg.seq_len <= feat.t; ++s) {
    starts.push_back(s);
    if (fused) counts.push_back(count_embedding(count));
  }
  const std::vector<ForwardValues> values = window_logits(mcfg, params, feat, starts, counts);

  const Framing fr = fc.framing();
  for (size_t w = 0; w < values.size(); ++w) {
    const int last = starts[w] + mcfg.seq_len - 1;
    const double t_end = static_cast<double>(last * fr.hop + fr.frame_len) / wav.sample_rate;
    const Array p = posterior(values[w].doa_logits);
    const std::vector<int> active = decide(p, tau);

    std::string angles, probs;
    for (size_t i = 0; i < active.size(); ++i) {
      if (i) {
        angles += ",";
        probs += ",";
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%g", mcfg.grid.center(active[i]));
      angles += buf;
      std::snprintf(buf, sizeof buf, "%.3f", p.data[static_cast<size_t>(active[i])]);
      probs += buf;
    }
    std::printf("t=%.3f angles=[%s] p=[%s]\n", t_end, angles.c_str(), probs.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"binaural DOA classification pipeline"};
  app.require_subcommand(1);

  // Shared flag storage; each subcommand binds only what it uses.
  std::string config_path, data_dir, out_dir, checkpoint, wav, mode, subset = "all", split = "test", method;
  uint64_t seed = 0;
  int n_clips = 0, jobs = 1, trials = 20, count = -1, epochs = 0, grid_d = 24;
  double duration = 0.0, alpha = -1.0, tau = 0.0;
  bool corrupt = false;

  CLI::App* gen = app.add_subcommand("gen-data", "render a labeled synthetic dataset");
  gen->add_option("--config", config_path, "experiment config JSON");
  gen->add_option("--out", out_dir, "dataset directory (default $BINLOC_OUT_ROOT/dataset)");
  gen->add_option("--n-clips", n_clips, "clip count override");
  gen->add_option("--duration", duration, "clip length in seconds");
  gen->add_option("--grid-d", grid_d, "number of DOA classes")->check(CLI::IsMember({16, 24}));
  gen->add_option("--seed", seed, "root seed override");
  gen->add_option("--jobs", jobs, "render threads")->check(CLI::PositiveNumber);

  CLI::App* tr = app.add_subcommand("train", "train a model against a dataset manifest");
  tr->add_option("--config", config_path, "experiment config JSON");
  tr->add_option("--data", data_dir, "dataset directory (with manifest.json)")->required();
  tr->add_option("--out", out_dir, "run directory (default $BINLOC_OUT_ROOT/<mode>-seed<seed>)");
  tr->add_option("--mode", mode, "baseline | dual | oracle-early | oracle-mid | oracle-late")
      ->check(CLI::IsMember({"baseline", "dual", "oracle-early", "oracle-mid", "oracle-late"}));
  tr->add_option("--alpha", alpha, "dual-task loss weight")->check(CLI::Range(0.0, 1.0));
  tr->add_option("--seed", seed, "root seed override");
  tr->add_option("--epochs", epochs, "epoch budget override (milestones past it are dropped)")
      ->check(CLI::PositiveNumber);
  tr->add_option("--grid-d", grid_d, "number of DOA classes")->check(CLI::IsMember({16, 24}));

  CLI::App* ev = app.add_subcommand("eval", "score a checkpoint on a dataset split");
  ev->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--out", out_dir, "report directory (default: checkpoint's directory)");
  ev->add_option("--split", split, "train | val | test")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--subset", subset, "all | clean-single-source | two-source")
      ->check(CLI::IsMember({"all", "clean-single-source", "two-source"}));
  ev->add_option("--tau", tau, "decision threshold")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  ev->add_option("--method", method, "method label for the report row");
  ev->add_option("--jobs", jobs, "evaluation threads")->check(CLI::PositiveNumber);

  CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference audit of every layer kind");
  gc->add_option("--seed", seed, "root seed");
  gc->add_option("--trials", trials, "trials per layer")->check(CLI::PositiveNumber);
  gc->add_flag("--corrupt", corrupt, "perturb one analytic gradient (negative control)")->group("");

  CLI::App* in = app.add_subcommand("infer", "per-frame detections for one 3-channel WAV");
  in->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  in->add_option("--wav", wav, "input recording")->required();
  in->add_option("--count", count, "oracle source count (fusion checkpoints only)")->check(CLI::Range(0, 2));
  in->add_option("--tau", tau, "decision threshold")->check(CLI::Range(1e-9, 1.0 - 1e-9));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ExperimentConfig::load(config_path);

    if (gen->parsed() || tr->parsed()) {
      // Flags win over the config file.
      if (gen->count("--seed") || tr->count("--seed")) cfg.seed = seed;
      if (gen->count("--n-clips")) cfg.n_clips = n_clips;
      if (gen->count("--duration")) cfg.duration_s = duration;
      if (gen->count("--grid-d") || tr->count("--grid-d")) cfg.grid_d = grid_d;
      if (tr->count("--mode")) cfg.mode = mode;
      if (tr->count("--alpha")) cfg.alpha = alpha;
      if (tr->count("--epochs")) {
        cfg.training.max_epochs = epochs;
        std::erase_if(cfg.training.milestones, [&](int m) { return m >= epochs; });
      }
    }

    if (gen->parsed()) {
      const fs::path out = out_dir.empty() ? out_root() / "dataset" : fs::path(out_dir);
      return run_gen_data(cfg, out, jobs);
    }
    if (tr->parsed()) {
      fs::path out = out_dir.empty()
                         ? out_root() / (cfg.mode + "-seed" + std::to_string(cfg.seed))
                         : fs::path(out_dir);
      return run_train(cfg, data_dir, out);
    }
    if (ev->parsed()) {
      const double use_tau = ev->count("--tau") ? tau : cfg.detection.tau;
      return run_eval(checkpoint, data_dir, out_dir, split, subset, use_tau, method, jobs);
    }
    if (gc->parsed()) {
      const uint64_t use_seed = gc->count("--seed") ? seed : 1;
      return run_gradcheck_cmd(use_seed, trials, corrupt);
    }
    if (in->parsed()) {
      const double use_tau = in->count("--tau") ? tau : 0.5;
      return run_infer(checkpoint, wav, in->count("--count") ? count : -1, use_tau);
    }
    return 1;
  } catch (const usage_error& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 1;
  } catch (const numeric_error& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const data_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
