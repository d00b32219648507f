#pragma once

#include "persp3d/box3d.hpp"
#include "persp3d/camera.hpp"
#include "persp3d/common.hpp"
#include "persp3d/perspective.hpp"

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

namespace persp3d {

template <typename T> struct Range {
  T lo{}, hi{};
};

/// Synthetic scene generator configuration. Boxes are gravity aligned with
/// arbitrary yaw; cameras look into the scene with small tilt and roll.
struct SynthConfig {
  std::uint64_t seed{1};
  int num_scenes{20};
  Range<int> objects_per_scene{1, 4};
  int num_classes{10};

  double image_width{640}, image_height{480};
  Range<double> fx{480, 600}, fy{480, 600};
  Range<double> cx{310, 330}, cy{230, 250};
  Range<double> tilt{0.05, 0.35}, roll{-0.05, 0.05};
  Range<double> cam_height{1.0, 1.7};
  Range<double> distance{1.8, 5.5};

  std::vector<Vec3<double>> class_base_sizes;  // (w, l, h) per class
  double size_jitter{0.25};                    // relative, per axis

  double noise_sigma{0.0};   // observation noise on normalized points
  double roi_inflate{0.1};   // relative inflation of the projected bbox
  double margin_px{8.0};     // projections stay this far inside the image
  double min_depth{0.3};     // camera-frame depth of every projected point
  int max_rejects{1000};

  static SynthConfig defaults();
};

struct SceneObject {
  int class_id{};
  Box3D box;
  RoI roi;
};

struct Scene {
  int id{};
  Camera camera;
  std::vector<SceneObject> objects;
};

/// Deterministic scene for (cfg.seed, scene_index). Rejection-samples each
/// object against the frustum and floor constraints; throws
/// RejectionOverflow after cfg.max_rejects failed draws for one object.
Scene generate_scene(const SynthConfig& cfg, std::uint64_t scene_index);

/// Per-object perspective points with i.i.d. Gaussian noise of the given
/// sigma in normalized units. sigma = 0 returns the exact ground truth.
/// Noise streams are seeded per (seed, scene id, object index).
std::vector<PerspectivePoints> observe(const Scene& scene, double sigma, std::uint64_t seed);

}  // namespace persp3d
