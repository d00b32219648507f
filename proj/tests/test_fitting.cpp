#include "persp3d/fitting.hpp"

#include "helpers.hpp"
#include "persp3d/rng.hpp"
#include "persp3d/synth.hpp"

#include <doctest.h>

using namespace persp3d;

namespace {

struct FitScene {
  Camera cam;
  RoI roi;
  Box3D box;
  BoxParams truth;
  PerspectivePoints observed;
};

FitScene make_fit_scene(std::uint64_t index, double sigma = 0.0, std::uint64_t noise_seed = 1) {
  SynthConfig cfg = test::single_object_config(321);
  const Scene scene = generate_scene(cfg, index);
  const SceneObject& so = scene.objects.front();
  FitScene fs;
  fs.cam = scene.camera;
  fs.roi = so.roi;
  fs.box = so.box;
  fs.truth.center2d = project_point(scene.camera, so.box.center);
  fs.truth.distance = (so.box.center - camera_center(scene.camera.ext)).norm();
  fs.truth.size = so.box.size;
  fs.truth.yaw = so.box.yaw;
  fs.observed = observe(scene, sigma, noise_seed).front();
  return fs;
}

}  // namespace

TEST_CASE("fit_box returns the truth unchanged when started there") {
  const FitScene fs = make_fit_scene(0);
  const FitResult res = fit_box(fs.observed, fs.truth, fs.cam, fs.roi, LossWeights{},
                                FitConfig{});
  CHECK(res.converged);
  CHECK(res.final_loss < 1e-18);
  CHECK((res.params.to_vector() - fs.truth.to_vector()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit_box recovers from a perturbed initialization") {
  int recovered = 0;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const FitScene fs = make_fit_scene(10 + i);
    BoxParams init = fs.truth;
    init.distance *= 1.2;
    init.yaw += 0.2;
    const FitResult res = fit_box(fs.observed, init, fs.cam, fs.roi, LossWeights{},
                                  FitConfig{});
    CHECK(res.improved);
    CHECK(std::abs(res.params.distance - fs.truth.distance) / fs.truth.distance < 0.01);
    for (int j = 0; j < 3; ++j) {
      CHECK(std::abs(res.params.size[j] - fs.truth.size[j]) / fs.truth.size[j] < 0.01);
    }
    CHECK(std::abs(wrap_angle(res.params.yaw - fs.truth.yaw)) < 0.02);
    ++recovered;
  }
  CHECK(recovered == 10);
}

TEST_CASE("fit_box reaches the noise floor on noisy observations") {
  const double sigma = 0.01;
  double mean_final = 0;
  const int seeds = 100;
  for (std::uint64_t s = 0; s < seeds; ++s) {
    const FitScene fs = make_fit_scene(100 + (s % 10), sigma, s);
    BoxParams init = fs.truth;
    init.distance *= 1.1;
    init.yaw += 0.1;
    const FitResult res = fit_box(fs.observed, init, fs.cam, fs.roi, LossWeights{},
                                  FitConfig{});
    CHECK(res.final_proj < 2 * (9 * sigma * sigma * 2));
    mean_final += res.final_proj;
  }
  mean_final /= seeds;
  CHECK(mean_final > 0.0);
  CHECK(mean_final < 2 * sigma * sigma);
}

TEST_CASE("fit_box trace never increases on accepted steps") {
  const FitScene fs = make_fit_scene(200);
  BoxParams init = fs.truth;
  init.distance *= 1.25;
  init.size *= 1.2;
  const FitResult res = fit_box(fs.observed, init, fs.cam, fs.roi, LossWeights{}, FitConfig{});
  double last = res.trace.rows.front().total;
  for (std::size_t i = 1; i < res.trace.rows.size(); ++i) {
    const FitTraceRow& row = res.trace.rows[i];
    if (row.accepted) CHECK(row.total < last);
    CHECK(row.total <= last);  // rejected iterations keep the incumbent
    last = row.total;
  }
}

TEST_CASE("fit_box is invariant to a 2-pi shift of the initial yaw") {
  const FitScene fs = make_fit_scene(201);
  BoxParams init = fs.truth;
  init.distance *= 1.15;
  init.yaw += 0.15;
  BoxParams shifted = init;
  shifted.yaw += 2 * std::numbers::pi;
  const FitResult a = fit_box(fs.observed, init, fs.cam, fs.roi, LossWeights{}, FitConfig{});
  const FitResult b = fit_box(fs.observed, shifted, fs.cam, fs.roi, LossWeights{}, FitConfig{});
  // the wrapped initializations agree to round-off, so both runs land on the
  // same optimum
  CHECK((a.params.to_vector() - b.params.to_vector()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("fit_box flags a run where no step is ever accepted") {
  const FitScene fs = make_fit_scene(204);
  BoxParams init = fs.truth;
  init.distance *= 1.2;
  FitConfig cfg;
  cfg.step = 1e12;  // every trial catapults out of the basin
  cfg.step_decay = 1.0;
  cfg.max_backtracks = 1;
  const FitResult res = fit_box(fs.observed, init, fs.cam, fs.roi, LossWeights{}, cfg);
  CHECK_FALSE(res.improved);
  CHECK(res.params.center2d == init.center2d);
  CHECK(res.params.distance == init.distance);
  CHECK(res.params.size == init.size);
  CHECK(res.params.yaw == wrap_angle(init.yaw));
  CHECK(res.trace.rows.size() >= 50);
}

TEST_CASE("fit_box clamps parameters at configured bounds") {
  const FitScene fs = make_fit_scene(202);
  FitConfig cfg;
  cfg.min_distance = fs.truth.distance * 1.2;  // the optimum sits outside the feasible set
  BoxParams init = fs.truth;
  init.distance = fs.truth.distance * 1.5;
  const FitResult res = fit_box(fs.observed, init, fs.cam, fs.roi, LossWeights{}, cfg);
  CHECK(res.params.distance >= cfg.min_distance);
  CHECK(res.params.size.minCoeff() >= cfg.min_size);
  // the data pulls distance down onto the bound
  CHECK(res.params.distance == cfg.min_distance);
}

TEST_CASE("fit_box full phase includes the perspective term after the switch") {
  const FitScene fs = make_fit_scene(203);
  BoxParams init = fs.truth;
  init.yaw += 0.1;
  FitConfig cfg;
  cfg.phase_switch_iter = 5;
  cfg.max_iters = 30;
  const FitResult res = fit_box(fs.observed, init, fs.cam, fs.roi, LossWeights{}, cfg);
  bool saw_p_in_total = false;
  for (const FitTraceRow& row : res.trace.rows) {
    if (row.iter >= 5 && row.p > 0 &&
        row.total >= row.proj + row.p - 1e-12) {
      saw_p_in_total = true;
    }
  }
  CHECK(saw_p_in_total);
}

TEST_CASE("noise-free fits reach tiny reprojection error on 200 scenes") {
  SynthConfig cfg = SynthConfig::defaults();
  cfg.seed = 777;
  cfg.objects_per_scene = {1, 2};
  int total = 0, good = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const Scene scene = generate_scene(cfg, i);
    const auto observed = observe(scene, 0.0, 1);
    for (std::size_t j = 0; j < scene.objects.size(); ++j) {
      const SceneObject& so = scene.objects[j];
      BoxParams init;
      init.center2d = project_point(scene.camera, so.box.center) + Vec2<double>(2.0, -2.0);
      init.distance = (so.box.center - camera_center(scene.camera.ext)).norm() * 1.15;
      init.size = so.box.size * 1.1;
      init.yaw = so.box.yaw + 0.15;
      const FitResult res =
          fit_box(observed[j], init, scene.camera, so.roi, LossWeights{}, FitConfig{});
      ++total;
      if (res.final_proj < 1e-6) ++good;
    }
  }
  CHECK(total >= 200);
  CHECK(double(good) / double(total) >= 0.95);
}

TEST_CASE("fit_templates: one template on identical data converges to it") {
  const FitScene fs = make_fit_scene(300);
  std::vector<std::pair<int, PerspectivePoints>> data;
  for (int i = 0; i < 5; ++i) data.emplace_back(0, fs.observed);
  const TemplateFitResult res = fit_templates(data, 1, FitConfig{}, 9);
  const PerspectivePoints mixed = mix_templates(res.bank, 0);
  CHECK((mixed.points - fs.observed.points).cwiseAbs().maxCoeff() < 1e-3);
  CHECK(res.mean_loss < 1e-8);
}

TEST_CASE("fit_templates: two templates beat one on two-cluster data") {
  Rng rng(55);
  const FitScene a = make_fit_scene(301);
  const FitScene b = make_fit_scene(302);
  std::vector<std::pair<int, PerspectivePoints>> data;
  for (int i = 0; i < 40; ++i) {
    PerspectivePoints p = (i % 2 == 0) ? a.observed : b.observed;
    for (int k = 0; k < 9; ++k) {
      p.points(0, k) += 0.005 * rng.normal();
      p.points(1, k) += 0.005 * rng.normal();
    }
    data.emplace_back(0, p);
  }
  const TemplateFitResult one = fit_templates(data, 1, FitConfig{}, 13);
  const TemplateFitResult two = fit_templates(data, 2, FitConfig{}, 13);
  CHECK(two.mean_loss < one.mean_loss);

  // line-search contract: per-class loss history is strictly decreasing
  for (const auto& [cls, hist] : two.loss_history) {
    for (std::size_t i = 1; i < hist.size(); ++i) CHECK(hist[i] < hist[i - 1]);
  }
}

TEST_CASE("fit_templates covers several classes and validates the data") {
  const FitScene fs = make_fit_scene(303);
  std::vector<std::pair<int, PerspectivePoints>> data;
  data.emplace_back(2, fs.observed);
  CHECK_THROWS_AS(fit_templates(data, 2, FitConfig{}, 1), InsufficientData);

  data.emplace_back(2, fs.observed);
  const TemplateFitResult res = fit_templates(data, 2, FitConfig{}, 1);
  CHECK(res.bank.num_classes == 3);
  CHECK(res.bank.templates_per_class == 2);
  // untouched classes stay at neutral logits
  CHECK(res.bank.template_at(0, 0).cwiseAbs().maxCoeff() == 0.0);
}
