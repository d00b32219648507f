#pragma once

#include "persp3d/camera.hpp"
#include "persp3d/perspective.hpp"
#include "persp3d/rng.hpp"
#include "persp3d/synth.hpp"

namespace persp3d::test {

inline Camera make_camera(double fx = 500, double fy = 500, double cx = 320, double cy = 240,
                          double tilt = 0, double roll = 0, double cam_height = 1.4) {
  Camera cam;
  cam.intr = Intrinsics{fx, fy, cx, cy, 640, 480};
  cam.ext = Extrinsics{tilt, roll, cam_height};
  return cam;
}

/// A scene config that always produces exactly one object per scene.
inline SynthConfig single_object_config(std::uint64_t seed) {
  SynthConfig cfg = SynthConfig::defaults();
  cfg.seed = seed;
  cfg.objects_per_scene = {1, 1};
  return cfg;
}

/// A world point a bit in front of the camera, uniformly placed in the image.
inline Vec3<double> random_in_frustum(const Camera& cam, Rng& rng, double min_dist = 0.5,
                                      double max_dist = 8.0) {
  const Vec2<double> px(rng.uniform(10.0, cam.intr.width - 10.0),
                        rng.uniform(10.0, cam.intr.height - 10.0));
  return back_project(cam, px, rng.uniform(min_dist, max_dist));
}

}  // namespace persp3d::test
