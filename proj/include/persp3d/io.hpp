#pragma once

#include "persp3d/box3d.hpp"
#include "persp3d/camera.hpp"
#include "persp3d/common.hpp"
#include "persp3d/eval.hpp"
#include "persp3d/fitting.hpp"
#include "persp3d/losses.hpp"
#include "persp3d/perspective.hpp"
#include "persp3d/synth.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace persp3d {

using Json = nlohmann::json;

// Serialization. Readers validate invariants and name the offending field in
// ConfigError / DataError messages.

Json to_json(const Camera& cam);
Camera camera_from_json(const Json& j);

Json to_json(const Box3D& box);
Box3D box_from_json(const Json& j);

Json to_json(const RoI& roi);
RoI roi_from_json(const Json& j);

Json to_json(const PerspectivePoints& pts);
PerspectivePoints perspective_points_from_json(const Json& j);

Json to_json(const TemplateBank& bank);
TemplateBank template_bank_from_json(const Json& j);

Json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const Json& j);

Json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const Json& j);

/// Perturbation applied to ground-truth attributes to form the initial
/// estimate handed to the fitter (the stand-in for a learned 3D branch).
/// Sizes default to exact: the projective objective cannot see absolute
/// scale, so a biased size prior displaces the recovered box along the
/// viewing ray by the same relative amount.
struct InitPerturb {
  double center2d_px{2.0};
  double distance_scale{1.15};
  double size_scale{1.0};
  double yaw_offset{0.15};
};

struct FitRunConfig {
  FitConfig fit;
  LossWeights weights;
  InitPerturb init;
  bool write_traces{false};
};

Json to_json(const FitRunConfig& cfg);
FitRunConfig fit_run_config_from_json(const Json& j);

Json to_json(const Scene& scene);
Scene scene_from_json(const Json& j);

Json to_json(const Detection& det);
Detection detection_from_json(const Json& j);

Json detections_to_json(const std::vector<Detection>& dets);
std::vector<Detection> detections_from_json(const Json& j);

// File helpers. Config readers throw ConfigError, data readers DataError.

Json load_config_file(const std::filesystem::path& path);
Json load_data_file(const std::filesystem::path& path);
void save_json(const std::filesystem::path& path, const Json& j);

std::string fnv1a_hex(const std::string& bytes);
std::string hash_file(const std::filesystem::path& path);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed{};
  std::string tool_version;
  std::vector<std::string> outputs;
};

Json to_json(const RunManifest& m);
void save_manifest(const std::filesystem::path& dir, const RunManifest& m);

}  // namespace persp3d
