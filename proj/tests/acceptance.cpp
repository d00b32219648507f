// Acceptance suite: every criterion prints one PASS/FAIL line; the binary
// exits nonzero if any criterion fails.

#include "persp3d/fitting.hpp"
#include "persp3d/io.hpp"
#include "persp3d/iou.hpp"
#include "persp3d/losses.hpp"
#include "persp3d/pipeline.hpp"
#include "persp3d/rng.hpp"
#include "persp3d/synth.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace persp3d;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
  if (!pass) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// 1. Inverse projection round trip at scale.
void criterion_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    Camera cam;
    cam.intr = Intrinsics{rng.uniform(400, 700), rng.uniform(400, 700),
                          rng.uniform(300, 340), rng.uniform(220, 260), 640, 480};
    cam.ext = Extrinsics{rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3),
                         rng.uniform(0.5, 2.0)};
    const Vec2<double> px(rng.uniform(20, 620), rng.uniform(20, 460));
    const Box3D box{back_project(cam, px, rng.uniform(0.8, 8.0)),
                    Vec3<double>(rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0),
                                 rng.uniform(0.1, 2.0)),
                    rng.uniform(-3.1, 3.1)};
    const Vec2<double> center2d = project_point(cam, box.center);
    const double dist = (box.center - camera_center(cam.ext)).norm();
    const Box3D back = compose_box(center2d, dist, box.size, box.yaw, cam);
    worst = std::max(worst,
                     (corners(back) - corners(box)).cwiseAbs().maxCoeff());
  }
  const double dt = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "inverse-projection round trip, max corner error %.3e m over 10^4 boxes "
                "(%.2f s)", worst, dt);
  report(1, worst < 1e-9 && dt < 5.0, buf);
}

// 2. Perspective-loss nullity on exact projections.
void criterion_nullity() {
  SynthConfig cfg = SynthConfig::defaults();
  cfg.seed = 202;
  cfg.objects_per_scene = {1, 1};
  double worst_d = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const Scene scene = generate_scene(cfg, i);
    const SceneObject& so = scene.objects.front();
    const PerspectiveLoss<double> pl =
        loss_perspective(gt_perspective_points(so.box, scene.camera, so.roi), false);
    worst_d = std::max({worst_d, pl.d1, pl.d2});
  }
  SynthConfig flat = cfg;
  flat.seed = 203;
  flat.tilt = {0.0, 0.0};
  flat.roll = {0.0, 0.0};
  double worst_grav = 0, worst_flat_d = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const Scene scene = generate_scene(flat, i);
    const SceneObject& so = scene.objects.front();
    const PerspectiveLoss<double> pl =
        loss_perspective(gt_perspective_points(so.box, scene.camera, so.roi), false);
    worst_grav = std::max(worst_grav, pl.grav);
    worst_flat_d = std::max({worst_flat_d, pl.d1, pl.d2});
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "loss nullity on exact projections: max d1/d2 %.3e (tilted), %.3e (flat), "
                "max grav %.3e (flat)", worst_d, worst_flat_d, worst_grav);
  report(2, worst_d < 1e-9 && worst_flat_d < 1e-9 && worst_grav < 1e-12, buf);
}

// 3. Gradient checks at 100 configurations per loss.
void criterion_gradients() {
  const GradCheckReport rep = run_gradcheck(303, 100);
  std::ostringstream os;
  os << "gradient checks:";
  for (const auto& e : rep.entries) {
    os << " " << e.name << "=" << std::scientific << e.max_rel_error;
  }
  report(3, rep.pass, os.str());
}

// 4. Reprojection loss equals the composed point loss.
void criterion_equivalence() {
  SynthConfig cfg = SynthConfig::defaults();
  cfg.seed = 404;
  cfg.objects_per_scene = {1, 1};
  Rng rng(404);
  double worst = 0;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const Scene scene = generate_scene(cfg, i);
    const SceneObject& so = scene.objects.front();
    const PerspectivePoints gt = gt_perspective_points(so.box, scene.camera, so.roi);
    BoxParams bp;
    bp.center2d = project_point(scene.camera, so.box.center) +
                  Vec2<double>(rng.uniform(-2, 2), rng.uniform(-2, 2));
    bp.distance =
        (so.box.center - camera_center(scene.camera.ext)).norm() * rng.uniform(0.95, 1.05);
    for (int j = 0; j < 3; ++j) bp.size[j] = so.box.size[j] * rng.uniform(0.95, 1.05);
    bp.yaw = so.box.yaw + rng.uniform(-0.1, 0.1);
    const double direct = loss_proj(bp, scene.camera, so.roi, gt).value;
    const double composed =
        loss_pp(gt_perspective_points(bp.box(scene.camera), scene.camera, so.roi), gt).value;
    worst = std::max(worst, std::abs(direct - composed));
  }
  char buf[120];
  std::snprintf(buf, sizeof buf, "loss_proj vs composed loss_pp, max |difference| %.3e",
                worst);
  report(4, worst <= 1e-12, buf);
}

// 5. Rotated IoU against the Monte-Carlo volume oracle.
void criterion_iou_oracle() {
  const Box3D a{Vec3<double>(0, 0, 0.5), Vec3<double>::Ones(), 0.0};
  const Box3D b{Vec3<double>(0.5, 0, 0.5), Vec3<double>::Ones(), 0.0};
  const bool exact_third = iou3d(a, b) == 1.0 / 3.0;

  Rng rng(505);
  double worst = 0;
  for (int pair = 0; pair < 500; ++pair) {
    Box3D p{Vec3<double>(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 2)),
            Vec3<double>(rng.uniform(0.3, 1.8), rng.uniform(0.3, 1.8), rng.uniform(0.3, 1.8)),
            rng.uniform(-3.1, 3.1)};
    Box3D q = p;
    q.center += Vec3<double>(rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8),
                             rng.uniform(-0.5, 0.5));
    q.size = Vec3<double>(rng.uniform(0.3, 1.8), rng.uniform(0.3, 1.8), rng.uniform(0.3, 1.8));
    q.yaw = rng.uniform(-3.1, 3.1);

    const double analytic = iou3d(p, q);
    const Mat3<double> rot_p = yaw_rotation(p.yaw);
    const Mat3<double> rot_qt = yaw_rotation(q.yaw).transpose();
    int hits = 0;
    const int samples = 1000000;
    for (int s = 0; s < samples; ++s) {
      const Vec3<double> local(p.size.x() * (rng.uniform01() - 0.5),
                               p.size.y() * (rng.uniform01() - 0.5),
                               p.size.z() * (rng.uniform01() - 0.5));
      const Vec3<double> in_q = rot_qt * (p.center + rot_p * local - q.center);
      if (std::abs(in_q.x()) <= q.size.x() / 2 && std::abs(in_q.y()) <= q.size.y() / 2 &&
          std::abs(in_q.z()) <= q.size.z() / 2) {
        ++hits;
      }
    }
    const double vp = p.size.prod(), vq = q.size.prod();
    const double inter = vp * double(hits) / samples;
    worst = std::max(worst, std::abs(analytic - inter / (vp + vq - inter)));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "iou3d vs 10^6-sample Monte Carlo over 500 pairs, max |difference| %.4f; "
                "half-offset cube %s 1/3", worst, exact_third ? "==" : "!=");
  report(5, worst < 0.005 && exact_third, buf);
}

// 6. Hand-computed AP values and score-scaling invariance.
void criterion_metric() {
  bool ok = true;
  std::string detail = "AP hand cases and rank invariance";
  const PRSeries perfect = average_precision({true, true, true}, 3);
  ok &= perfect.ap == 1.0;
  const PRSeries tp_fp = average_precision({true, false}, 1);
  ok &= std::abs(tp_fp.ap - 1.0) <= 1e-12;
  const PRSeries mixed = average_precision({true, false, true}, 2);
  ok &= std::abs(mixed.ap - (0.5 * 1.0 + 0.5 * 2.0 / 3.0)) <= 1e-12;

  Rng rng(606);
  GroundTruthSet gts;
  std::vector<Detection> dets;
  for (int img = 0; img < 3; ++img) {
    for (int j = 0; j < 3; ++j) {
      Box3D box{Vec3<double>(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.5, 1.5)),
                Vec3<double>(rng.uniform(0.4, 1.5), rng.uniform(0.4, 1.5),
                             rng.uniform(0.4, 1.5)),
                rng.uniform(-3, 3)};
      gts[img].push_back(GtObject{j, box});
      Box3D guess = box;
      guess.center.x() += rng.uniform(-0.5, 0.5);
      dets.push_back(Detection{img, j, rng.uniform(0.05, 0.95), guess});
    }
  }
  const EvalResult base = evaluate_detections(dets, gts, 0.15);
  std::vector<Detection> scaled = dets;
  for (Detection& d : scaled) d.score *= 7.25;
  const EvalResult same = evaluate_detections(scaled, gts, 0.15);
  ok &= base.map == same.map;
  for (const auto& [cls, series] : base.per_class) {
    ok &= same.per_class.at(cls).ap == series.ap;
  }
  report(6, ok, detail);
}

// 7. Closed loop: generate, fit, evaluate.
void criterion_closed_loop(const fs::path& scratch) {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig cfg = SynthConfig::defaults();
  cfg.seed = 707;
  cfg.num_scenes = 200;
  cfg.objects_per_scene = {1, 3};
  const fs::path ds = scratch / "dataset";
  run_gen(cfg, ds, "acceptance gen", "none");

  FitRunConfig fit_cfg;
  const fs::path fit0 = scratch / "fit_sigma0";
  run_fit(ds, fit_cfg, fit0, 1, 0.0, std::nullopt, "acceptance fit", "none");
  const EvalRunResult ev0 = run_eval(fit0 / "detections.json", ds, scratch / "eval_sigma0",
                                     0.15, false, "acceptance eval", "none");

  const fs::path fit2 = scratch / "fit_sigma002";
  run_fit(ds, fit_cfg, fit2, 1, 0.02, std::nullopt, "acceptance fit", "none");
  const EvalRunResult ev2 = run_eval(fit2 / "detections.json", ds, scratch / "eval_sigma002",
                                     0.15, false, "acceptance eval", "none");
  const double dt = seconds_since(t0);
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "closed loop on 200 scenes: mAP %.4f at sigma 0, %.4f at sigma 0.02 (%.1f s)",
                ev0.result.map, ev2.result.map, dt);
  report(7, ev0.result.map == 1.0 && ev2.result.map >= 0.95 && dt < 120.0, buf);
}

// 8. Template mixture contracts and the two-cluster comparison.
void criterion_templates() {
  bool ok = true;
  Rng rng(808);
  // sigmoid/softmax contracts
  for (int trial = 0; trial < 200; ++trial) {
    TemplateBank bank = TemplateBank::zeros(1, 3);
    for (int k = 0; k < 3; ++k) {
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 9; ++c) bank.template_at(0, k)(r, c) = 8.0 * rng.normal();
      }
      bank.coeff_logits(0, k) = 2.0 * rng.normal();
    }
    const PerspectivePoints out = mix_templates(bank, 0);
    ok &= out.points.minCoeff() > 0.0 && out.points.maxCoeff() < 1.0;
    // convexity: the mixture stays inside the activated-template hull
    Points29<double> lo = Points29<double>::Constant(1.0);
    Points29<double> hi = Points29<double>::Constant(0.0);
    for (int k = 0; k < 3; ++k) {
      const Points29<double> act =
          bank.template_at(0, k).unaryExpr([](double v) { return sigmoid(v); });
      lo = lo.cwiseMin(act);
      hi = hi.cwiseMax(act);
    }
    ok &= (out.points.array() >= lo.array() - 1e-12).all();
    ok &= (out.points.array() <= hi.array() + 1e-12).all();

    TemplateBank shifted = bank;
    shifted.coeff_logits.row(0).array() += rng.uniform(-20, 20);
    ok &= (mix_templates(shifted, 0).points - out.points).cwiseAbs().maxCoeff() < 1e-12;
  }

  // two clusters: K=2 strictly beats K=1
  SynthConfig cfg = SynthConfig::defaults();
  cfg.seed = 809;
  cfg.objects_per_scene = {1, 1};
  const Scene sa = generate_scene(cfg, 0);
  const Scene sb = generate_scene(cfg, 1);
  const PerspectivePoints pa =
      gt_perspective_points(sa.objects[0].box, sa.camera, sa.objects[0].roi);
  const PerspectivePoints pb =
      gt_perspective_points(sb.objects[0].box, sb.camera, sb.objects[0].roi);
  std::vector<std::pair<int, PerspectivePoints>> data;
  for (int i = 0; i < 40; ++i) {
    PerspectivePoints p = (i % 2 == 0) ? pa : pb;
    for (int k = 0; k < 9; ++k) {
      p.points(0, k) += 0.005 * rng.normal();
      p.points(1, k) += 0.005 * rng.normal();
    }
    data.emplace_back(0, p);
  }
  const double one = fit_templates(data, 1, FitConfig{}, 5).mean_loss;
  const double two = fit_templates(data, 2, FitConfig{}, 5).mean_loss;
  ok &= two < one;
  char buf[120];
  std::snprintf(buf, sizeof buf,
                "template mixture contracts; two-cluster loss K=2 %.2e < K=1 %.2e", two, one);
  report(8, ok, buf);
}

// 9. Byte-identical outputs across reruns and thread counts.
void criterion_determinism(const fs::path& scratch) {
  SynthConfig cfg = SynthConfig::defaults();
  cfg.seed = 909;
  cfg.num_scenes = 8;
  cfg.objects_per_scene = {1, 2};
  cfg.noise_sigma = 0.01;
  const fs::path ds1 = scratch / "det_ds1";
  const fs::path ds2 = scratch / "det_ds2";
  run_gen(cfg, ds1, "acceptance gen", "none");
  run_gen(cfg, ds2, "acceptance gen", "none");
  bool ok = true;
  for (int i = 0; i < cfg.num_scenes; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d.json", i);
    ok &= file_bytes(ds1 / name) == file_bytes(ds2 / name);
  }
  ok &= file_bytes(ds1 / "index.json") == file_bytes(ds2 / "index.json");

  FitRunConfig fit_cfg;
  const fs::path f1 = scratch / "det_fit_j1";
  const fs::path f4 = scratch / "det_fit_j4";
  run_fit(ds1, fit_cfg, f1, 1, std::nullopt, std::nullopt, "acceptance fit", "none");
  run_fit(ds1, fit_cfg, f4, 4, std::nullopt, std::nullopt, "acceptance fit", "none");
  ok &= file_bytes(f1 / "detections.json") == file_bytes(f4 / "detections.json");

  const fs::path e1 = scratch / "det_eval1";
  const fs::path e2 = scratch / "det_eval2";
  run_eval(f1 / "detections.json", ds1, e1, 0.15, false, "acceptance eval", "none");
  run_eval(f4 / "detections.json", ds1, e2, 0.15, false, "acceptance eval", "none");
  ok &= file_bytes(e1 / "metrics.json") == file_bytes(e2 / "metrics.json");
  report(9, ok, "byte-identical dataset, detections, and metrics across reruns and --jobs");
}

}  // namespace

int main() {
  const fs::path scratch = fs::temp_directory_path() / "persp3d_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  criterion_round_trip();
  criterion_nullity();
  criterion_gradients();
  criterion_equivalence();
  criterion_iou_oracle();
  criterion_metric();
  criterion_closed_loop(scratch);
  criterion_templates();
  criterion_determinism(scratch);

  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
