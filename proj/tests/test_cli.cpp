#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>
#include <json.hpp>

#include "binloc/core/checkpoint.hpp"
#include "binloc/sim/dataset.hpp"

namespace fs = std::filesystem;
using namespace binloc;

namespace {

const fs::path& work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "binloc_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

// Runs the driver binary, captures combined output, returns the exit code.
int run_cli(const std::string& args, std::string* output = nullptr) {
  static int invocation = 0;
  const fs::path log = work_dir() / ("cli_out_" + std::to_string(invocation++) + ".txt");
  const std::string cmd = std::string(BINLOC_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  if (status < 0) return -1;
#ifdef WIFEXITED
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
#else
  return status;
#endif
}

std::string base_config() {
  static const std::string path = [] {
    const fs::path p = work_dir() / "cfg.json";
    std::ofstream out(p);
    out << R"({
  "seed": 5,
  "grid_d": 24,
  "dataset": {"n_clips": 48, "duration_s": 3.0},
  "training": {"max_epochs": 1, "milestones": [], "patience": 2}
})";
    return p.string();
  }();
  return path;
}

bool same_file_bytes(const fs::path& a, const fs::path& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa.good() || !fb.good()) return false;
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

// Generated once, used by the train/eval/infer tests below.
const fs::path& dataset_dir() {
  static const fs::path dir = [] {
    const fs::path d = work_dir() / "data";
    const int rc = run_cli("gen-data --config " + base_config() + " --out " + d.string() + " --jobs 2");
    REQUIRE(rc == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("dataset generation is reproducible and split 80/10/10", "[cli]") {
  const fs::path twin = work_dir() / "data_twin";
  std::string out;
  REQUIRE(run_cli("gen-data --config " + base_config() + " --out " + twin.string() + " --jobs 1", &out) == 0);
  REQUIRE(out.find("48 clips") != std::string::npos);

  // Same seed, different thread count: identical bytes for every artifact.
  REQUIRE(same_file_bytes(dataset_dir() / "manifest.json", twin / "manifest.json"));
  const DatasetManifest manifest = load_manifest(dataset_dir() / "manifest.json");
  int split_counts[3] = {0, 0, 0};
  for (const ClipRecord& rec : manifest.clips) {
    ++split_counts[static_cast<int>(rec.split)];
    REQUIRE(same_file_bytes(dataset_dir() / rec.wav_path, twin / rec.wav_path));
    REQUIRE(same_file_bytes(dataset_dir() / rec.sidecar_path, twin / rec.sidecar_path));
  }
  REQUIRE(split_counts[0] == 42);
  REQUIRE(split_counts[1] == 4);
  REQUIRE(split_counts[2] == 2);

  // A zero-clip request is refused before anything is written.
  REQUIRE(run_cli("gen-data --n-clips 0 --out " + (work_dir() / "zero").string()) == 2);
  REQUIRE_FALSE(fs::exists(work_dir() / "zero" / "manifest.json"));
}

TEST_CASE("generated source counts follow the planned mix", "[cli]") {
  const fs::path d = work_dir() / "data_mix";
  REQUIRE(run_cli("gen-data --out " + d.string() + " --n-clips 100 --duration 1.5 --seed 17 --jobs 2") == 0);
  const DatasetManifest manifest = load_manifest(d / "manifest.json");
  REQUIRE(manifest.clips.size() == 100);

  int by_count[3] = {0, 0, 0};
  for (const ClipRecord& rec : manifest.clips) by_count[rec.n_sources] += 1;
  // Target mix 20/40/40, audited within two clips.
  REQUIRE(std::abs(by_count[0] - 20) <= 2);
  REQUIRE(std::abs(by_count[1] - 40) <= 2);
  REQUIRE(std::abs(by_count[2] - 40) <= 2);
}

TEST_CASE("training writes reproducible checkpoints and history", "[cli]") {
  const fs::path run1 = work_dir() / "run1";
  const fs::path run2 = work_dir() / "run2";
  std::string out;
  REQUIRE(run_cli("train --config " + base_config() + " --data " + dataset_dir().string() + " --out " +
                      run1.string() + " --mode baseline",
                  &out) == 0);
  REQUIRE(out.find("epoch 0") != std::string::npos);
  REQUIRE(out.find("37960 parameters") != std::string::npos);
  REQUIRE(fs::exists(run1 / "checkpoint.ckpt"));
  REQUIRE(fs::exists(run1 / "history.json"));

  REQUIRE(run_cli("train --config " + base_config() + " --data " + dataset_dir().string() + " --out " +
                  run2.string() + " --mode baseline") == 0);
  REQUIRE(same_file_bytes(run1 / "checkpoint.ckpt", run2 / "checkpoint.ckpt"));
  REQUIRE(same_file_bytes(run1 / "history.json", run2 / "history.json"));

  // Flags override the config file: a different seed changes the artifacts.
  const fs::path run3 = work_dir() / "run3";
  REQUIRE(run_cli("train --config " + base_config() + " --data " + dataset_dir().string() + " --out " +
                  run3.string() + " --mode baseline --seed 7") == 0);
  REQUIRE_FALSE(same_file_bytes(run1 / "checkpoint.ckpt", run3 / "checkpoint.ckpt"));
  const Checkpoint ck = load_checkpoint((run3 / "checkpoint.ckpt").string());
  REQUIRE(ck.meta.at("seed").get<uint64_t>() == 7);
  REQUIRE(ck.meta.at("mode").get<std::string>() == "baseline");
  REQUIRE(ck.meta.at("feature_hash").get<std::string>() ==
          load_manifest(dataset_dir() / "manifest.json").feature_hash);

  // An unknown mode never reaches the pipeline.
  REQUIRE(run_cli("train --data " + dataset_dir().string() + " --mode warp") == 1);
}

TEST_CASE("evaluation emits table-shaped reports and guards feature drift", "[cli]") {
  const fs::path run1 = work_dir() / "run1";
  REQUIRE(fs::exists(run1 / "checkpoint.ckpt"));  // produced by the training test

  std::string out;
  REQUIRE(run_cli("eval --checkpoint " + (run1 / "checkpoint.ckpt").string() + " --data " +
                      dataset_dir().string() + " --split val --jobs 2",
                  &out) == 0);
  REQUIRE(out.find("Method,Frontal_F1,Diagonal_F1,Lateral_F1,Avg") != std::string::npos);
  REQUIRE(out.find("baseline,") != std::string::npos);
  REQUIRE(fs::exists(run1 / "report-val-all.json"));
  REQUIRE(fs::exists(run1 / "report-val-all.csv"));

  std::ifstream jin(run1 / "report-val-all.json");
  const nlohmann::json rep = nlohmann::json::parse(jin);
  REQUIRE(rep.at("method").get<std::string>() == "baseline");
  REQUIRE(rep.at("split").get<std::string>() == "val");
  REQUIRE(rep.at("per_side").at("left").at("clips").get<int>() == 2);

  // Subset filtering reaches the report.
  REQUIRE(run_cli("eval --checkpoint " + (run1 / "checkpoint.ckpt").string() + " --data " +
                  dataset_dir().string() + " --split val --subset two-source") == 0);
  std::ifstream j2(run1 / "report-val-two-source.json");
  const nlohmann::json rep2 = nlohmann::json::parse(j2);
  REQUIRE(rep2.at("subset").get<std::string>() == "two-source");
  REQUIRE(rep2.at("per_side").at("left").at("clips").get<int>() == 1);

  // A checkpoint whose feature hash disagrees with the manifest is refused.
  Checkpoint tampered = load_checkpoint((run1 / "checkpoint.ckpt").string());
  tampered.meta["feature_hash"] = "feat-0000000000000000";
  const fs::path bad = work_dir() / "tampered.ckpt";
  save_checkpoint(bad.string(), tampered);
  REQUIRE(run_cli("eval --checkpoint " + bad.string() + " --data " + dataset_dir().string() + " --split val",
                  &out) == 2);
  REQUIRE(out.find("drift") != std::string::npos);

  REQUIRE(run_cli("eval --checkpoint " + (work_dir() / "missing.ckpt").string() + " --data " +
                  dataset_dir().string()) == 2);
}

TEST_CASE("inference streams one line per window", "[cli]") {
  const fs::path run1 = work_dir() / "run1";
  const DatasetManifest manifest = load_manifest(dataset_dir() / "manifest.json");
  const fs::path wav = dataset_dir() / manifest.clips.front().wav_path;

  // 3 s at 16 kHz: 29 frames of 200 ms at 50% overlap, so 20 windows.
  std::string out;
  REQUIRE(run_cli("infer --checkpoint " + (run1 / "checkpoint.ckpt").string() + " --wav " + wav.string(),
                  &out) == 0);
  int lines = 0;
  std::stringstream ss(out);
  std::string line;
  while (std::getline(ss, line)) {
    REQUIRE(line.rfind("t=", 0) == 0);
    REQUIRE(line.find("angles=[") != std::string::npos);
    REQUIRE(line.find("p=[") != std::string::npos);
    ++lines;
  }
  REQUIRE(lines == 20);

  // Count flag pairing is enforced both ways.
  REQUIRE(run_cli("infer --checkpoint " + (run1 / "checkpoint.ckpt").string() + " --wav " + wav.string() +
                  " --count 1") == 1);

  const fs::path late_run = work_dir() / "run_late";
  REQUIRE(run_cli("train --config " + base_config() + " --data " + dataset_dir().string() + " --out " +
                  late_run.string() + " --mode oracle-late") == 0);
  REQUIRE(run_cli("infer --checkpoint " + (late_run / "checkpoint.ckpt").string() + " --wav " + wav.string()) == 1);
  REQUIRE(run_cli("infer --checkpoint " + (late_run / "checkpoint.ckpt").string() + " --wav " + wav.string() +
                      " --count 1",
                  &out) == 0);
  lines = 0;
  std::stringstream ss2(out);
  while (std::getline(ss2, line)) ++lines;
  REQUIRE(lines == 20);

  REQUIRE(run_cli("infer --checkpoint " + (run1 / "checkpoint.ckpt").string() + " --wav /nonexistent.wav") == 2);
}

TEST_CASE("gradient audit passes and its negative control fails", "[cli]") {
  std::string out;
  REQUIRE(run_cli("gradcheck --trials 5", &out) == 0);
  int pass_lines = 0;
  std::stringstream ss(out);
  std::string line;
  while (std::getline(ss, line))
    if (line.find("pass") != std::string::npos) ++pass_lines;
  REQUIRE(pass_lines == 12);

  // Same seed, same table.
  std::string out2;
  REQUIRE(run_cli("gradcheck --trials 5", &out2) == 0);
  REQUIRE(out == out2);

  REQUIRE(run_cli("gradcheck --trials 5 --corrupt", &out) == 3);
  REQUIRE(out.find("FAIL") != std::string::npos);

  REQUIRE(run_cli("definitely-not-a-command") == 1);
  REQUIRE(run_cli("--help") == 0);
}
