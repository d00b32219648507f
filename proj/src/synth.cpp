#include "persp3d/synth.hpp"

#include "persp3d/rng.hpp"

#include <numbers>

namespace persp3d {

SynthConfig SynthConfig::defaults() {
  SynthConfig cfg;
  cfg.class_base_sizes = {
      {1.6, 2.0, 0.6}, {0.5, 0.5, 0.9},  {1.8, 0.9, 0.8},  {1.2, 0.8, 0.75},
      {1.1, 0.6, 0.76}, {0.4, 0.6, 0.8}, {0.35, 0.35, 0.5}, {0.5, 0.45, 0.85},
      {0.9, 0.3, 1.6}, {0.35, 0.35, 1.4},
  };
  return cfg;
}

namespace {

RoI roi_from_corners(const Corners38<double>& px, double inflate) {
  double x0 = px.row(0).minCoeff(), x1 = px.row(0).maxCoeff();
  double y0 = px.row(1).minCoeff(), y1 = px.row(1).maxCoeff();
  const double dx = (x1 - x0) * inflate * 0.5;
  const double dy = (y1 - y0) * inflate * 0.5;
  return RoI{x0 - dx, y0 - dy, x1 + dx, y1 + dy};
}

}  // namespace

Scene generate_scene(const SynthConfig& cfg, std::uint64_t scene_index) {
  Rng rng(mix_seed(cfg.seed, scene_index, 0xA11CEULL));
  Scene scene;
  scene.id = int(scene_index);

  Camera& cam = scene.camera;
  cam.intr.width = cfg.image_width;
  cam.intr.height = cfg.image_height;
  cam.intr.fx = rng.uniform(cfg.fx.lo, cfg.fx.hi);
  cam.intr.fy = rng.uniform(cfg.fy.lo, cfg.fy.hi);
  cam.intr.cx = rng.uniform(cfg.cx.lo, cfg.cx.hi);
  cam.intr.cy = rng.uniform(cfg.cy.lo, cfg.cy.hi);
  cam.ext.tilt = rng.uniform(cfg.tilt.lo, cfg.tilt.hi);
  cam.ext.roll = rng.uniform(cfg.roll.lo, cfg.roll.hi);
  cam.ext.cam_height = rng.uniform(cfg.cam_height.lo, cfg.cam_height.hi);

  const int count = rng.uniform_int(cfg.objects_per_scene.lo, cfg.objects_per_scene.hi);
  const double margin = cfg.margin_px;
  for (int obj = 0; obj < count; ++obj) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_rejects; ++attempt) {
      const int class_id = rng.uniform_int(0, cfg.num_classes - 1);
      const Vec3<double> base =
          cfg.class_base_sizes[size_t(class_id) % cfg.class_base_sizes.size()];
      Vec3<double> size;
      for (int j = 0; j < 3; ++j) {
        size[j] = base[j] * rng.uniform(1.0 - cfg.size_jitter, 1.0 + cfg.size_jitter);
      }
      const double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const Vec2<double> px(rng.uniform(0.25 * cfg.image_width, 0.75 * cfg.image_width),
                            rng.uniform(0.3 * cfg.image_height, 0.75 * cfg.image_height));
      const double dist = rng.uniform(cfg.distance.lo, cfg.distance.hi);

      Box3D box = compose_box(px, dist, size, yaw, cam);
      if (box.center.z() - size.z() * 0.5 < 0.0) continue;  // below floor

      const Corners38<double> cs = corners(box);
      bool ok = true;
      Corners38<double> proj;
      for (int i = 0; i < 8 && ok; ++i) {
        const Vec3<double> xc = world_to_camera(cam, Vec3<double>(cs.col(i)));
        if (xc.z() < cfg.min_depth) {
          ok = false;
          break;
        }
        Vec2<double> p;
        try {
          p = project_point(cam, Vec3<double>(cs.col(i)));
        } catch (const BehindCamera&) {
          ok = false;
          break;
        }
        if (p.x() < margin || p.x() > cfg.image_width - margin || p.y() < margin ||
            p.y() > cfg.image_height - margin) {
          ok = false;
          break;
        }
        proj.col(i).head<2>() = p;
        proj(2, i) = 0.0;
      }
      if (!ok) continue;

      SceneObject so;
      so.class_id = class_id;
      so.box = box;
      so.roi = roi_from_corners(proj, cfg.roi_inflate);
      scene.objects.push_back(so);
      placed = true;
      break;
    }
    if (!placed) {
      throw RejectionOverflow("generate_scene: could not place object after " +
                              std::to_string(cfg.max_rejects) + " draws");
    }
  }
  return scene;
}

std::vector<PerspectivePoints> observe(const Scene& scene, double sigma, std::uint64_t seed) {
  std::vector<PerspectivePoints> out;
  out.reserve(scene.objects.size());
  for (std::size_t i = 0; i < scene.objects.size(); ++i) {
    const SceneObject& so = scene.objects[i];
    PerspectivePoints pts = gt_perspective_points(so.box, scene.camera, so.roi);
    if (sigma > 0.0) {
      Rng rng(mix_seed(seed, std::uint64_t(scene.id), i));
      for (int k = 0; k < 9; ++k) {
        pts.points(0, k) += sigma * rng.normal();
        pts.points(1, k) += sigma * rng.normal();
      }
    }
    out.push_back(pts);
  }
  return out;
}

}  // namespace persp3d
