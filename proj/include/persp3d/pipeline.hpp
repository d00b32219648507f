#pragma once

#include "persp3d/eval.hpp"
#include "persp3d/io.hpp"
#include "persp3d/synth.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace persp3d {

/// Dataset on disk: scene_%04d.json files plus index.json and manifest.json.
struct GenResult {
  std::filesystem::path index_path;
  std::vector<std::filesystem::path> scene_paths;
};

GenResult run_gen(const SynthConfig& cfg, const std::filesystem::path& out_dir,
                  const std::string& command, const std::string& config_hash);

struct DatasetView {
  SynthConfig cfg;   // as recorded in the index
  std::vector<Scene> scenes;
};

DatasetView load_dataset(const std::filesystem::path& dataset_dir);

struct FitRunResult {
  std::filesystem::path detections_path;
  std::vector<Detection> detections;
  int failures{};
};

/// Fit every object of every scene; one detection per object with
/// score = exp(-final total loss). Scene fits run on `jobs` threads; outputs
/// do not depend on the thread count. Per-object failures are recorded and
/// the run continues.
FitRunResult run_fit(const std::filesystem::path& dataset_dir, const FitRunConfig& cfg,
                     const std::filesystem::path& out_dir, int jobs,
                     std::optional<double> noise_override,
                     std::optional<std::uint64_t> seed_override, const std::string& command,
                     const std::string& config_hash);

struct EvalRunResult {
  std::filesystem::path metrics_path;
  EvalResult result;
};

EvalRunResult run_eval(const std::filesystem::path& detections_path,
                       const std::filesystem::path& dataset_dir,
                       const std::filesystem::path& out_dir, double iou_threshold, bool emit_svg,
                       const std::string& command, const std::string& config_hash);

struct GradCheckEntry {
  std::string name;
  double max_rel_error{};
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double threshold{1e-5};
  bool pass{};
};

/// Finite-difference verification of every loss gradient over random valid
/// configurations. inject_bug corrupts one gradient on purpose so the
/// failure path can be exercised end to end.
GradCheckReport run_gradcheck(std::uint64_t seed, int configs_per_loss = 100,
                              bool inject_bug = false);

void write_pr_csv(const std::filesystem::path& path, const PRSeries& series);
void write_pr_svg(const std::filesystem::path& path,
                  const std::map<int, PRSeries>& per_class);

}  // namespace persp3d
