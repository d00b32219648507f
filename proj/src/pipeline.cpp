#include "persp3d/pipeline.hpp"

#include "persp3d/fitting.hpp"
#include "persp3d/gradcheck.hpp"
#include "persp3d/losses.hpp"
#include "persp3d/rng.hpp"
#include "persp3d/version.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <thread>

namespace persp3d {

namespace fs = std::filesystem;

namespace {

std::string scene_filename(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d.json", index);
  return buf;
}

}  // namespace

GenResult run_gen(const SynthConfig& cfg, const fs::path& out_dir, const std::string& command,
                  const std::string& config_hash) {
  fs::create_directories(out_dir);
  GenResult res;
  Json names = Json::array();
  for (int i = 0; i < cfg.num_scenes; ++i) {
    const Scene scene = generate_scene(cfg, std::uint64_t(i));
    const fs::path path = out_dir / scene_filename(i);
    save_json(path, to_json(scene));
    res.scene_paths.push_back(path);
    names.push_back(scene_filename(i));
  }
  res.index_path = out_dir / "index.json";
  save_json(res.index_path,
            Json{{"schema", 1}, {"count", cfg.num_scenes}, {"scenes", names},
                 {"config", to_json(cfg)}});

  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = config_hash;
  manifest.seed = cfg.seed;
  manifest.tool_version = kVersion;
  manifest.outputs.push_back(res.index_path.string());
  for (const auto& p : res.scene_paths) manifest.outputs.push_back(p.string());
  save_manifest(out_dir, manifest);
  return res;
}

DatasetView load_dataset(const fs::path& dataset_dir) {
  const Json index = load_data_file(dataset_dir / "index.json");
  DatasetView view;
  view.cfg = synth_config_from_json(index.at("config"));
  const Json& names = index.at("scenes");
  for (const Json& name : names) {
    view.scenes.push_back(scene_from_json(load_data_file(dataset_dir / name.get<std::string>())));
  }
  return view;
}

FitRunResult run_fit(const fs::path& dataset_dir, const FitRunConfig& cfg,
                     const fs::path& out_dir, int jobs, std::optional<double> noise_override,
                     std::optional<std::uint64_t> seed_override, const std::string& command,
                     const std::string& config_hash) {
  const DatasetView dataset = load_dataset(dataset_dir);
  const double sigma = noise_override.value_or(dataset.cfg.noise_sigma);
  const std::uint64_t seed = seed_override.value_or(dataset.cfg.seed);

  fs::create_directories(out_dir);
  if (cfg.write_traces) fs::create_directories(out_dir / "traces");

  struct ObjectOutcome {
    bool ok{false};
    Detection det;
    std::string error;
  };
  std::vector<std::vector<ObjectOutcome>> outcomes(dataset.scenes.size());

  const auto fit_scene = [&](std::size_t si) {
    const Scene& scene = dataset.scenes[si];
    outcomes[si].resize(scene.objects.size());
    std::vector<PerspectivePoints> observed;
    try {
      observed = observe(scene, sigma, seed);
    } catch (const Error& e) {
      for (auto& o : outcomes[si]) o.error = e.what();
      return;
    }
    for (std::size_t oi = 0; oi < scene.objects.size(); ++oi) {
      const SceneObject& so = scene.objects[oi];
      ObjectOutcome& out = outcomes[si][oi];
      try {
        Rng rng(mix_seed(seed ^ 0xF17B07ULL, std::uint64_t(scene.id), oi));
        const auto coin = [&](double v) { return rng.uniform01() < 0.5 ? v : 1.0 / v; };
        BoxParams init;
        init.center2d = project_point(scene.camera, so.box.center);
        init.center2d.x() += (rng.uniform01() < 0.5 ? 1.0 : -1.0) * cfg.init.center2d_px;
        init.center2d.y() += (rng.uniform01() < 0.5 ? 1.0 : -1.0) * cfg.init.center2d_px;
        init.distance = (so.box.center - camera_center(scene.camera.ext)).norm() *
                        coin(cfg.init.distance_scale);
        for (int j = 0; j < 3; ++j) init.size[j] = so.box.size[j] * coin(cfg.init.size_scale);
        init.yaw = so.box.yaw + (rng.uniform01() < 0.5 ? 1.0 : -1.0) * cfg.init.yaw_offset;

        const FitResult fit =
            fit_box(observed[oi], init, scene.camera, so.roi, cfg.weights, cfg.fit);
        out.det = Detection{scene.id, so.class_id, std::exp(-fit.final_loss), fit.box};
        out.ok = true;
        if (cfg.write_traces) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "scene_%04d_obj_%02d.csv", scene.id, int(oi));
          write_trace_csv(fit.trace, (out_dir / "traces" / buf).string());
        }
      } catch (const Error& e) {
        out.error = e.what();
      }
    }
  };

  const int workers = std::max(1, jobs);
  if (workers == 1) {
    for (std::size_t si = 0; si < dataset.scenes.size(); ++si) fit_scene(si);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t si = next.fetch_add(1); si < dataset.scenes.size();
             si = next.fetch_add(1)) {
          fit_scene(si);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  FitRunResult res;
  Json failures = Json::array();
  for (std::size_t si = 0; si < outcomes.size(); ++si) {
    for (std::size_t oi = 0; oi < outcomes[si].size(); ++oi) {
      const ObjectOutcome& o = outcomes[si][oi];
      if (o.ok) {
        res.detections.push_back(o.det);
      } else {
        ++res.failures;
        failures.push_back(Json{{"image_id", dataset.scenes[si].id}, {"object", oi},
                                {"error", o.error}});
      }
    }
  }
  res.detections_path = out_dir / "detections.json";
  Json out = detections_to_json(res.detections);
  out["noise_sigma"] = sigma;
  out["failures"] = failures;
  save_json(res.detections_path, out);

  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = config_hash;
  manifest.seed = seed;
  manifest.tool_version = kVersion;
  manifest.outputs.push_back(res.detections_path.string());
  save_manifest(out_dir, manifest);
  return res;
}

EvalRunResult run_eval(const fs::path& detections_path, const fs::path& dataset_dir,
                       const fs::path& out_dir, double iou_threshold, bool emit_svg,
                       const std::string& command, const std::string& config_hash) {
  const std::vector<Detection> dets = detections_from_json(load_data_file(detections_path));
  const DatasetView dataset = load_dataset(dataset_dir);

  GroundTruthSet gts;
  std::set<int> ids;
  for (const Scene& scene : dataset.scenes) {
    ids.insert(scene.id);
    auto& list = gts[scene.id];
    for (const SceneObject& so : scene.objects) list.push_back(GtObject{so.class_id, so.box});
  }
  for (const Detection& det : dets) {
    if (!ids.count(det.image_id)) {
      throw DataError("eval: detection references unknown image id " +
                      std::to_string(det.image_id));
    }
  }

  EvalRunResult res;
  res.result = evaluate_detections(dets, gts, iou_threshold);

  fs::create_directories(out_dir);
  std::map<int, int> det_counts;
  for (const Detection& det : dets) det_counts[det.class_id] += 1;
  Json classes = Json::object();
  for (const auto& [cls, series] : res.result.per_class) {
    classes[std::to_string(cls)] = Json{{"ap", series.ap},
                                        {"num_gt", res.result.gt_counts.at(cls)},
                                        {"num_detections", det_counts[cls]}};
    char buf[48];
    std::snprintf(buf, sizeof buf, "pr_class_%02d.csv", cls);
    write_pr_csv(out_dir / buf, series);
  }
  res.metrics_path = out_dir / "metrics.json";
  save_json(res.metrics_path, Json{{"schema", 1},
                                   {"iou_threshold", iou_threshold},
                                   {"map", res.result.map},
                                   {"classes", classes}});
  if (emit_svg) write_pr_svg(out_dir / "pr_curves.svg", res.result.per_class);

  RunManifest manifest;
  manifest.command = command;
  manifest.config_hash = config_hash;
  manifest.seed = 0;
  manifest.tool_version = kVersion;
  manifest.outputs.push_back(res.metrics_path.string());
  save_manifest(out_dir, manifest);
  return res;
}

void write_pr_csv(const fs::path& path, const PRSeries& series) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "recall,precision\n";
  char buf[64];
  for (std::size_t i = 0; i < series.recall.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", series.recall[i], series.precision[i]);
    out << buf;
  }
}

void write_pr_svg(const fs::path& path, const std::map<int, PRSeries>& per_class) {
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
  const double w = 560, h = 420, m = 50;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const auto px = [&](double r) { return m + r * (w - 2 * m); };
  const auto py = [&](double p) { return h - m - p * (h - 2 * m); };
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\""
      << py(0) << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(0) << "\" y2=\""
      << py(1) << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\" "
      << "font-size=\"13\">recall</text>\n";
  out << "<text x=\"14\" y=\"" << h / 2 << "\" text-anchor=\"middle\" font-size=\"13\" "
      << "transform=\"rotate(-90 14 " << h / 2 << ")\">precision</text>\n";
  int idx = 0;
  for (const auto& [cls, series] : per_class) {
    const char* color = kColors[idx % 10];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    out << px(0) << "," << py(series.precision.empty() ? 1.0 : series.precision.front()) << " ";
    for (std::size_t i = 0; i < series.recall.size(); ++i) {
      out << px(series.recall[i]) << "," << py(series.precision[i]) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << w - m + 4 << "\" y=\"" << m + 16 * idx
        << "\" font-size=\"11\" fill=\"" << color << "\">c" << cls << "</text>\n";
    ++idx;
  }
  out << "</svg>\n";
}

namespace {

// A scene object with noisy points, the raw material for gradient checks.
struct CheckScene {
  Camera cam;
  RoI roi;
  Box3D box;
  PerspectivePoints gt;
  Points29<double> noisy;
};

CheckScene sample_check_scene(const SynthConfig& cfg, std::uint64_t index, Rng& rng,
                              double sigma) {
  const Scene scene = generate_scene(cfg, index);
  const SceneObject& so = scene.objects.front();
  CheckScene cs;
  cs.cam = scene.camera;
  cs.roi = so.roi;
  cs.box = so.box;
  cs.gt = gt_perspective_points(so.box, scene.camera, so.roi);
  cs.noisy = cs.gt.points;
  for (int k = 0; k < 9; ++k) {
    cs.noisy(0, k) += sigma * rng.normal();
    cs.noisy(1, k) += sigma * rng.normal();
  }
  return cs;
}

// The central difference carries an O(h^2) truncation term of its own, and
// the vanishing-point map is curved enough that the term can exceed the
// check tolerance on legitimate inputs. A configuration counts as checkable
// only when the oracle is self-consistent between steps h and h/2. This uses
// no analytic-gradient information, so a wrong gradient cannot hide behind
// the filter.
template <typename F>
bool fd_self_consistent(F&& f, Eigen::VectorXd x, double step = 1e-5, double tol = 1e-6) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const auto fd_at = [&](double h) {
      x[i] = xi + h;
      const double fp = f(std::as_const(x), nullptr);
      x[i] = xi - h;
      const double fm = f(std::as_const(x), nullptr);
      x[i] = xi;
      return (fp - fm) / (2 * h);
    };
    const double h = step * std::max(1.0, std::abs(xi));
    const double fd1 = fd_at(h);
    const double fd2 = fd_at(h / 2);
    if (!std::isfinite(fd1) || !std::isfinite(fd2)) return false;
    if (std::abs(fd1 - fd2) / std::max({std::abs(fd1), std::abs(fd2), 1e-8}) > tol) return false;
  }
  return true;
}

// Keep checked configurations away from the Huber kink, the parallel
// fallback, and degenerate lines; finite differences straddle branches there.
bool perspective_branch_safe(const Points29<double>& pts) {
  const std::array<std::array<int, 4>, 4> quads{{{1, 4, 5, 8}, {2, 3, 6, 7},
                                                 {1, 2, 5, 6}, {4, 3, 8, 7}}};
  std::array<Vec3<double>, 4> u;
  try {
    for (int i = 0; i < 4; ++i) {
      const auto& q = quads[size_t(i)];
      u[size_t(i)] = line_intersection(Vec2<double>(pts.col(q[0])), Vec2<double>(pts.col(q[1])),
                                       Vec2<double>(pts.col(q[2])), Vec2<double>(pts.col(q[3])));
    }
  } catch (const DegenerateLine&) {
    return false;
  }
  for (int pair = 0; pair < 2; ++pair) {
    const Vec3<double>& u1 = u[size_t(2 * pair)];
    const Vec3<double>& u2 = u[size_t(2 * pair + 1)];
    const double k1 = std::abs(u1.z()) / std::max(u1.head<2>().norm(), 1e-300);
    const double k2 = std::abs(u2.z()) / std::max(u2.head<2>().norm(), 1e-300);
    const double kmin = std::min(k1, k2);
    if (kmin > 0.5 * kParallelKappa && kmin < 2.0 * kParallelKappa) return false;
    if (kmin >= 2.0 * kParallelKappa) {
      const Vec2<double> v1 = u1.head<2>() / u1.z();
      const Vec2<double> v2 = u2.head<2>() / u2.z();
      const double d = (v1 - v2).norm();
      if (std::abs(d - kHuberDelta) < 0.1) return false;
    }
  }
  return true;
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, int configs_per_loss, bool inject_bug) {
  SynthConfig cfg = SynthConfig::defaults();
  cfg.seed = mix_seed(seed, 0x6eadULL);
  cfg.objects_per_scene = {1, 1};

  GradCheckReport report;
  Rng rng(mix_seed(seed, 0xc0de));

  double worst_pp = 0, worst_persp = 0, worst_3d = 0, worst_proj = 0;
  std::uint64_t scene_index = 0;

  for (int c = 0; c < configs_per_loss; ++c) {
    // loss_pp at a random pair
    {
      const CheckScene cs = sample_check_scene(cfg, scene_index++, rng, 0.02);
      Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(cs.noisy.data(), 18);
      const Points29<double> gt = cs.gt.points;
      const bool bug = inject_bug;
      const auto f = [&gt, bug](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
        const Points29<double> pred = Eigen::Map<const Points29<double>>(v.data());
        const ValueGrad29<double> r = loss_pp(pred, gt);
        if (grad) {
          *grad = Eigen::Map<const Eigen::VectorXd>(r.grad.data(), 18);
          if (bug) (*grad)[0] = -(*grad)[0];
        }
        return r.value;
      };
      worst_pp = std::max(worst_pp, grad_check(f, x));
    }
    // loss_perspective at a perturbed projection, away from branch edges
    {
      const auto f = [](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
        const Points29<double> p = Eigen::Map<const Points29<double>>(v.data());
        const PerspectiveLoss<double> r = loss_perspective(p, grad != nullptr);
        if (grad) {
          const Points29<double> g = r.grad_d1 + r.grad_d2 + r.grad_grav;
          *grad = Eigen::Map<const Eigen::VectorXd>(g.data(), 18);
        }
        return r.sum();
      };
      Eigen::VectorXd x;
      for (int attempt = 0;; ++attempt) {
        const CheckScene cs = sample_check_scene(cfg, scene_index++, rng, 0.02);
        if (!perspective_branch_safe(cs.noisy)) continue;
        x = Eigen::Map<const Eigen::VectorXd>(cs.noisy.data(), 18);
        if (fd_self_consistent(f, x)) break;
        if (attempt > 2000) throw Error("run_gradcheck: no checkable configuration found");
      }
      worst_persp = std::max(worst_persp, grad_check(f, x));
    }
    // loss_3d at perturbed attributes
    {
      const CheckScene cs = sample_check_scene(cfg, scene_index++, rng, 0.0);
      const Vec2<double> center2d = project_point(cs.cam, cs.box.center);
      const Attrs3D gt{(cs.box.center - camera_center(cs.cam.ext)).norm(), cs.box.size,
                       cs.box.yaw};
      Eigen::VectorXd x(5);
      x << gt.distance + rng.uniform(-0.4, 0.4), gt.size.x() * rng.uniform(0.8, 1.25),
          gt.size.y() * rng.uniform(0.8, 1.25), gt.size.z() * rng.uniform(0.8, 1.25),
          gt.yaw + rng.uniform(-0.25, 0.25);
      const Camera cam = cs.cam;
      const auto f = [&gt, &cam, &center2d](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
        const Attrs3D pred{v[0], Vec3<double>(v[1], v[2], v[3]), v[4]};
        const Loss3D<double> r = loss_3d(pred, gt, cam, center2d);
        if (grad) *grad = r.grad_dis + r.grad_size + r.grad_ori + r.grad_box3d;
        return r.sum();
      };
      worst_3d = std::max(worst_3d, grad_check(f, x));
    }
    // loss_proj at perturbed box parameters
    {
      const CheckScene cs = sample_check_scene(cfg, scene_index++, rng, 0.01);
      PerspectivePoints gt = cs.gt;
      gt.points = cs.noisy;
      BoxParams bp;
      bp.center2d = project_point(cs.cam, cs.box.center) +
                    Vec2<double>(rng.uniform(-3, 3), rng.uniform(-3, 3));
      bp.distance =
          (cs.box.center - camera_center(cs.cam.ext)).norm() * rng.uniform(0.85, 1.2);
      for (int j = 0; j < 3; ++j) bp.size[j] = cs.box.size[j] * rng.uniform(0.85, 1.2);
      bp.yaw = cs.box.yaw + rng.uniform(-0.2, 0.2);
      Eigen::VectorXd x = bp.to_vector();
      const Camera cam = cs.cam;
      const RoI roi = cs.roi;
      const auto f = [&gt, &cam, &roi](const Eigen::VectorXd& v, Eigen::VectorXd* grad) {
        Grad7<double> p7 = v;
        const ProjLoss<double> r = loss_proj(BoxParams::from_vector(p7), cam, roi, gt);
        if (grad) *grad = r.grad;
        return r.value;
      };
      worst_proj = std::max(worst_proj, grad_check(f, x));
    }
  }

  report.entries = {{"loss_pp", worst_pp},
                    {"loss_perspective", worst_persp},
                    {"loss_3d", worst_3d},
                    {"loss_proj", worst_proj}};
  report.pass = true;
  for (const auto& e : report.entries) {
    if (!(e.max_rel_error < report.threshold)) report.pass = false;
  }
  return report;
}

}  // namespace persp3d
