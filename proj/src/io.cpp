#include "persp3d/io.hpp"

#include "persp3d/version.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace persp3d {

namespace {

template <typename E>
const Json& need(const Json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) {
    throw E(ctx + ": missing field '" + key + "'");
  }
  return j.at(key);
}

template <typename E>
double need_number(const Json& j, const char* key, const std::string& ctx) {
  const Json& v = need<E>(j, key, ctx);
  if (!v.is_number()) throw E(ctx + ": field '" + key + "' must be a number");
  return v.get<double>();
}

template <typename E>
int need_int(const Json& j, const char* key, const std::string& ctx) {
  const Json& v = need<E>(j, key, ctx);
  if (!v.is_number_integer()) throw E(ctx + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

template <typename E>
Vec3<double> need_vec3(const Json& j, const char* key, const std::string& ctx) {
  const Json& v = need<E>(j, key, ctx);
  if (!v.is_array() || v.size() != 3) throw E(ctx + ": field '" + key + "' must be [x, y, z]");
  return Vec3<double>(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

void reject_unknown(const Json& j, const std::set<std::string>& known, const std::string& ctx) {
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(ctx + ": unknown field '" + key + "'");
  }
}

Range<double> range_from(const Json& j, const char* key, const std::string& ctx,
                         Range<double> fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ConfigError(ctx + ": field '" + key + "' must be [lo, hi]");
  }
  Range<double> r{v[0].get<double>(), v[1].get<double>()};
  if (r.lo > r.hi) throw ConfigError(ctx + ": field '" + key + "' has lo > hi");
  return r;
}

}  // namespace

Json to_json(const Camera& cam) {
  return Json{{"fx", cam.intr.fx},       {"fy", cam.intr.fy},
              {"cx", cam.intr.cx},       {"cy", cam.intr.cy},
              {"width", cam.intr.width}, {"height", cam.intr.height},
              {"tilt", cam.ext.tilt},    {"roll", cam.ext.roll},
              {"cam_height", cam.ext.cam_height}};
}

Camera camera_from_json(const Json& j) {
  const std::string ctx = "camera";
  Camera cam;
  cam.intr.fx = need_number<DataError>(j, "fx", ctx);
  cam.intr.fy = need_number<DataError>(j, "fy", ctx);
  cam.intr.cx = need_number<DataError>(j, "cx", ctx);
  cam.intr.cy = need_number<DataError>(j, "cy", ctx);
  cam.intr.width = need_number<DataError>(j, "width", ctx);
  cam.intr.height = need_number<DataError>(j, "height", ctx);
  cam.ext.tilt = need_number<DataError>(j, "tilt", ctx);
  cam.ext.roll = need_number<DataError>(j, "roll", ctx);
  cam.ext.cam_height = need_number<DataError>(j, "cam_height", ctx);
  if (cam.intr.fx <= 0 || cam.intr.fy <= 0) throw DataError("camera: fx, fy must be positive");
  if (cam.intr.cx < 0 || cam.intr.cx > cam.intr.width) {
    throw DataError("camera: cx out of [0, width]");
  }
  if (cam.intr.cy < 0 || cam.intr.cy > cam.intr.height) {
    throw DataError("camera: cy out of [0, height]");
  }
  if (std::abs(cam.ext.tilt) >= std::numbers::pi / 2 ||
      std::abs(cam.ext.roll) >= std::numbers::pi / 2) {
    throw DataError("camera: tilt and roll must be within (-pi/2, pi/2)");
  }
  if (cam.ext.cam_height <= 0) throw DataError("camera: cam_height must be positive");
  return cam;
}

Json to_json(const Box3D& box) {
  return Json{{"center", {box.center.x(), box.center.y(), box.center.z()}},
              {"size", {box.size.x(), box.size.y(), box.size.z()}},
              {"yaw", box.yaw}};
}

Box3D box_from_json(const Json& j) {
  const std::string ctx = "box";
  Box3D box;
  box.center = need_vec3<DataError>(j, "center", ctx);
  box.size = need_vec3<DataError>(j, "size", ctx);
  box.yaw = need_number<DataError>(j, "yaw", ctx);
  if (!(box.size.minCoeff() > 0)) throw DataError("box: size must be positive");
  box.yaw = wrap_angle(box.yaw);
  return box;
}

Json to_json(const RoI& roi) { return Json{roi.x0, roi.y0, roi.x1, roi.y1}; }

RoI roi_from_json(const Json& j) {
  if (!j.is_array() || j.size() != 4) throw DataError("roi: must be [x0, y0, x1, y1]");
  RoI roi{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  if (!roi.valid()) throw DataError("roi: requires x1 > x0 and y1 > y0");
  return roi;
}

Json to_json(const PerspectivePoints& pts) {
  Json points = Json::array();
  Json clipped = Json::array();
  for (int k = 0; k < 9; ++k) {
    points.push_back({pts.points(0, k), pts.points(1, k)});
    clipped.push_back(pts.clipped[size_t(k)]);
  }
  return Json{{"points", points}, {"clipped", clipped}};
}

PerspectivePoints perspective_points_from_json(const Json& j) {
  const std::string ctx = "perspective_points";
  const Json& points = need<DataError>(j, "points", ctx);
  if (!points.is_array() || points.size() != 9) {
    throw DataError(ctx + ": field 'points' must hold 9 [u, v] pairs");
  }
  PerspectivePoints pts;
  for (int k = 0; k < 9; ++k) {
    pts.points(0, k) = points[size_t(k)][0].get<double>();
    pts.points(1, k) = points[size_t(k)][1].get<double>();
  }
  if (j.contains("clipped")) {
    const Json& clipped = j.at("clipped");
    if (!clipped.is_array() || clipped.size() != 9) {
      throw DataError(ctx + ": field 'clipped' must hold 9 booleans");
    }
    for (int k = 0; k < 9; ++k) pts.clipped[size_t(k)] = clipped[size_t(k)].get<bool>();
  }
  return pts;
}

Json to_json(const TemplateBank& bank) {
  Json templates = Json::array();
  for (int c = 0; c < bank.num_classes; ++c) {
    Json per_class = Json::array();
    for (int k = 0; k < bank.templates_per_class; ++k) {
      const Points29<double>& t = bank.template_at(c, k);
      Json rows = Json::array();
      for (int r = 0; r < 2; ++r) {
        Json row = Json::array();
        for (int col = 0; col < 9; ++col) row.push_back(t(r, col));
        rows.push_back(row);
      }
      per_class.push_back(rows);
    }
    templates.push_back(per_class);
  }
  Json coeffs = Json::array();
  for (int c = 0; c < bank.num_classes; ++c) {
    Json row = Json::array();
    for (int k = 0; k < bank.templates_per_class; ++k) row.push_back(bank.coeff_logits(c, k));
    coeffs.push_back(row);
  }
  return Json{{"C", bank.num_classes},
              {"K", bank.templates_per_class},
              {"templates", templates},
              {"coeff_logits", coeffs}};
}

TemplateBank template_bank_from_json(const Json& j) {
  const std::string ctx = "template_bank";
  const int c_count = need_int<DataError>(j, "C", ctx);
  const int k_count = need_int<DataError>(j, "K", ctx);
  if (c_count <= 0 || k_count <= 0) throw DataError(ctx + ": C and K must be positive");
  TemplateBank bank = TemplateBank::zeros(c_count, k_count);
  const Json& templates = need<DataError>(j, "templates", ctx);
  const Json& coeffs = need<DataError>(j, "coeff_logits", ctx);
  if (!templates.is_array() || int(templates.size()) != c_count) {
    throw DataError(ctx + ": field 'templates' must hold C entries");
  }
  if (!coeffs.is_array() || int(coeffs.size()) != c_count) {
    throw DataError(ctx + ": field 'coeff_logits' must hold C entries");
  }
  for (int c = 0; c < c_count; ++c) {
    if (int(templates[size_t(c)].size()) != k_count || int(coeffs[size_t(c)].size()) != k_count) {
      throw DataError(ctx + ": class " + std::to_string(c) + " must hold K entries");
    }
    for (int k = 0; k < k_count; ++k) {
      const Json& rows = templates[size_t(c)][size_t(k)];
      for (int r = 0; r < 2; ++r) {
        for (int col = 0; col < 9; ++col) {
          bank.template_at(c, k)(r, col) = rows[size_t(r)][size_t(col)].get<double>();
        }
      }
      bank.coeff_logits(c, k) = coeffs[size_t(c)][size_t(k)].get<double>();
    }
  }
  return bank;
}

Json to_json(const LossWeights& w) {
  return Json{{"pp", w.pp},     {"p", w.p},         {"l3d", w.l3d},   {"proj", w.proj},
              {"d1", w.d1},     {"d2", w.d2},       {"grav", w.grav}, {"dis", w.dis},
              {"size", w.size}, {"ori", w.ori},     {"box3d", w.box3d}};
}

LossWeights loss_weights_from_json(const Json& j) {
  const std::string ctx = "weights";
  reject_unknown(j, {"pp", "p", "l3d", "proj", "d1", "d2", "grav", "dis", "size", "ori", "box3d"},
                 ctx);
  LossWeights w;
  const auto opt = [&](const char* key, double& slot) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number()) throw ConfigError(ctx + ": field '" + std::string(key) +
                                                  "' must be a number");
    slot = j.at(key).get<double>();
    if (slot < 0) throw ConfigError(ctx + ": field '" + std::string(key) +
                                    "' must be nonnegative");
  };
  opt("pp", w.pp);
  opt("p", w.p);
  opt("l3d", w.l3d);
  opt("proj", w.proj);
  opt("d1", w.d1);
  opt("d2", w.d2);
  opt("grav", w.grav);
  opt("dis", w.dis);
  opt("size", w.size);
  opt("ori", w.ori);
  opt("box3d", w.box3d);
  return w;
}

Json to_json(const SynthConfig& cfg) {
  Json sizes = Json::array();
  for (const auto& s : cfg.class_base_sizes) sizes.push_back({s.x(), s.y(), s.z()});
  return Json{{"schema", 1},
              {"seed", cfg.seed},
              {"num_scenes", cfg.num_scenes},
              {"objects_per_scene", {cfg.objects_per_scene.lo, cfg.objects_per_scene.hi}},
              {"num_classes", cfg.num_classes},
              {"image_width", cfg.image_width},
              {"image_height", cfg.image_height},
              {"fx", {cfg.fx.lo, cfg.fx.hi}},
              {"fy", {cfg.fy.lo, cfg.fy.hi}},
              {"cx", {cfg.cx.lo, cfg.cx.hi}},
              {"cy", {cfg.cy.lo, cfg.cy.hi}},
              {"tilt", {cfg.tilt.lo, cfg.tilt.hi}},
              {"roll", {cfg.roll.lo, cfg.roll.hi}},
              {"cam_height", {cfg.cam_height.lo, cfg.cam_height.hi}},
              {"distance", {cfg.distance.lo, cfg.distance.hi}},
              {"class_base_sizes", sizes},
              {"size_jitter", cfg.size_jitter},
              {"noise_sigma", cfg.noise_sigma},
              {"roi_inflate", cfg.roi_inflate},
              {"margin_px", cfg.margin_px},
              {"min_depth", cfg.min_depth},
              {"max_rejects", cfg.max_rejects}};
}

SynthConfig synth_config_from_json(const Json& j) {
  const std::string ctx = "synth config";
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  reject_unknown(j, {"schema", "seed", "num_scenes", "objects_per_scene", "num_classes",
                     "image_width", "image_height", "fx", "fy", "cx", "cy", "tilt", "roll",
                     "cam_height", "distance", "class_base_sizes", "size_jitter", "noise_sigma",
                     "roi_inflate", "margin_px", "min_depth", "max_rejects"},
                 ctx);
  SynthConfig cfg = SynthConfig::defaults();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("num_scenes")) {
    cfg.num_scenes = need_int<ConfigError>(j, "num_scenes", ctx);
    if (cfg.num_scenes < 0) throw ConfigError(ctx + ": field 'num_scenes' must be >= 0");
  }
  if (j.contains("objects_per_scene")) {
    const Json& v = j.at("objects_per_scene");
    if (!v.is_array() || v.size() != 2) {
      throw ConfigError(ctx + ": field 'objects_per_scene' must be [min, max]");
    }
    cfg.objects_per_scene = {v[0].get<int>(), v[1].get<int>()};
    if (cfg.objects_per_scene.lo < 0 || cfg.objects_per_scene.lo > cfg.objects_per_scene.hi) {
      throw ConfigError(ctx + ": field 'objects_per_scene' must satisfy 0 <= min <= max");
    }
  }
  if (j.contains("num_classes")) {
    cfg.num_classes = need_int<ConfigError>(j, "num_classes", ctx);
    if (cfg.num_classes <= 0) throw ConfigError(ctx + ": field 'num_classes' must be positive");
  }
  if (j.contains("image_width")) cfg.image_width = need_number<ConfigError>(j, "image_width", ctx);
  if (j.contains("image_height")) {
    cfg.image_height = need_number<ConfigError>(j, "image_height", ctx);
  }
  if (cfg.image_width <= 0 || cfg.image_height <= 0) {
    throw ConfigError(ctx + ": field 'image_width'/'image_height' must be positive");
  }
  cfg.fx = range_from(j, "fx", ctx, cfg.fx);
  cfg.fy = range_from(j, "fy", ctx, cfg.fy);
  cfg.cx = range_from(j, "cx", ctx, cfg.cx);
  cfg.cy = range_from(j, "cy", ctx, cfg.cy);
  cfg.tilt = range_from(j, "tilt", ctx, cfg.tilt);
  cfg.roll = range_from(j, "roll", ctx, cfg.roll);
  cfg.cam_height = range_from(j, "cam_height", ctx, cfg.cam_height);
  cfg.distance = range_from(j, "distance", ctx, cfg.distance);
  if (cfg.fx.lo <= 0 || cfg.fy.lo <= 0) throw ConfigError(ctx + ": field 'fx'/'fy' must be positive");
  if (cfg.cam_height.lo <= 0) throw ConfigError(ctx + ": field 'cam_height' must be positive");
  if (cfg.distance.lo <= 0) throw ConfigError(ctx + ": field 'distance' must be positive");
  if (j.contains("class_base_sizes")) {
    const Json& v = j.at("class_base_sizes");
    if (!v.is_array() || v.empty()) {
      throw ConfigError(ctx + ": field 'class_base_sizes' must be a nonempty array");
    }
    cfg.class_base_sizes.clear();
    for (const Json& s : v) {
      if (!s.is_array() || s.size() != 3) {
        throw ConfigError(ctx + ": field 'class_base_sizes' entries must be [w, l, h]");
      }
      const Vec3<double> size(s[0].get<double>(), s[1].get<double>(), s[2].get<double>());
      if (!(size.minCoeff() > 0)) {
        throw ConfigError(ctx + ": field 'class_base_sizes' entries must be positive");
      }
      cfg.class_base_sizes.push_back(size);
    }
  }
  if (j.contains("size_jitter")) {
    cfg.size_jitter = need_number<ConfigError>(j, "size_jitter", ctx);
    if (cfg.size_jitter < 0 || cfg.size_jitter >= 1) {
      throw ConfigError(ctx + ": field 'size_jitter' must be in [0, 1)");
    }
  }
  if (j.contains("noise_sigma")) {
    cfg.noise_sigma = need_number<ConfigError>(j, "noise_sigma", ctx);
    if (cfg.noise_sigma < 0) throw ConfigError(ctx + ": field 'noise_sigma' must be >= 0");
  }
  if (j.contains("roi_inflate")) cfg.roi_inflate = need_number<ConfigError>(j, "roi_inflate", ctx);
  if (j.contains("margin_px")) cfg.margin_px = need_number<ConfigError>(j, "margin_px", ctx);
  if (j.contains("min_depth")) cfg.min_depth = need_number<ConfigError>(j, "min_depth", ctx);
  if (j.contains("max_rejects")) {
    cfg.max_rejects = need_int<ConfigError>(j, "max_rejects", ctx);
    if (cfg.max_rejects <= 0) throw ConfigError(ctx + ": field 'max_rejects' must be positive");
  }
  return cfg;
}

Json to_json(const FitRunConfig& cfg) {
  return Json{{"schema", 1},
              {"max_iters", cfg.fit.max_iters},
              {"step", cfg.fit.step},
              {"step_decay", cfg.fit.step_decay},
              {"decay_interval", cfg.fit.decay_interval},
              {"phase_switch_iter", cfg.fit.phase_switch_iter},
              {"tol", cfg.fit.tol},
              {"min_distance", cfg.fit.min_distance},
              {"min_size", cfg.fit.min_size},
              {"max_backtracks", cfg.fit.max_backtracks},
              {"size_prior_weight", cfg.fit.size_prior_weight},
              {"write_traces", cfg.write_traces},
              {"init",
               {{"center2d_px", cfg.init.center2d_px},
                {"distance_scale", cfg.init.distance_scale},
                {"size_scale", cfg.init.size_scale},
                {"yaw_offset", cfg.init.yaw_offset}}},
              {"weights", to_json(cfg.weights)}};
}

FitRunConfig fit_run_config_from_json(const Json& j) {
  const std::string ctx = "fit config";
  if (!j.is_object()) throw ConfigError(ctx + ": expected an object");
  reject_unknown(j, {"schema", "max_iters", "step", "step_decay", "decay_interval",
                     "phase_switch_iter", "tol", "min_distance", "min_size", "max_backtracks",
                     "size_prior_weight", "write_traces", "init", "weights"},
                 ctx);
  FitRunConfig cfg;
  if (j.contains("max_iters")) {
    cfg.fit.max_iters = need_int<ConfigError>(j, "max_iters", ctx);
    if (cfg.fit.max_iters <= 0) throw ConfigError(ctx + ": field 'max_iters' must be positive");
  }
  const auto opt_pos = [&](const char* key, double& slot) {
    if (!j.contains(key)) return;
    slot = need_number<ConfigError>(j, key, ctx);
    if (!(slot > 0)) throw ConfigError(ctx + ": field '" + std::string(key) +
                                       "' must be positive");
  };
  opt_pos("step", cfg.fit.step);
  opt_pos("step_decay", cfg.fit.step_decay);
  opt_pos("tol", cfg.fit.tol);
  opt_pos("min_distance", cfg.fit.min_distance);
  opt_pos("min_size", cfg.fit.min_size);
  if (j.contains("decay_interval")) {
    cfg.fit.decay_interval = need_int<ConfigError>(j, "decay_interval", ctx);
    if (cfg.fit.decay_interval <= 0) {
      throw ConfigError(ctx + ": field 'decay_interval' must be positive");
    }
  }
  if (j.contains("phase_switch_iter")) {
    cfg.fit.phase_switch_iter = need_int<ConfigError>(j, "phase_switch_iter", ctx);
    if (cfg.fit.phase_switch_iter < -1) {
      throw ConfigError(ctx + ": field 'phase_switch_iter' must be >= -1");
    }
  }
  if (j.contains("max_backtracks")) {
    cfg.fit.max_backtracks = need_int<ConfigError>(j, "max_backtracks", ctx);
    if (cfg.fit.max_backtracks <= 0) {
      throw ConfigError(ctx + ": field 'max_backtracks' must be positive");
    }
  }
  if (j.contains("size_prior_weight")) {
    cfg.fit.size_prior_weight = need_number<ConfigError>(j, "size_prior_weight", ctx);
    if (cfg.fit.size_prior_weight < 0) {
      throw ConfigError(ctx + ": field 'size_prior_weight' must be >= 0");
    }
  }
  if (j.contains("write_traces")) cfg.write_traces = j.at("write_traces").get<bool>();
  if (j.contains("init")) {
    const Json& v = j.at("init");
    reject_unknown(v, {"center2d_px", "distance_scale", "size_scale", "yaw_offset"},
                   ctx + ".init");
    if (v.contains("center2d_px")) cfg.init.center2d_px = v.at("center2d_px").get<double>();
    if (v.contains("distance_scale")) {
      cfg.init.distance_scale = v.at("distance_scale").get<double>();
      if (!(cfg.init.distance_scale > 0)) {
        throw ConfigError(ctx + ": field 'init.distance_scale' must be positive");
      }
    }
    if (v.contains("size_scale")) {
      cfg.init.size_scale = v.at("size_scale").get<double>();
      if (!(cfg.init.size_scale > 0)) {
        throw ConfigError(ctx + ": field 'init.size_scale' must be positive");
      }
    }
    if (v.contains("yaw_offset")) cfg.init.yaw_offset = v.at("yaw_offset").get<double>();
  }
  if (j.contains("weights")) cfg.weights = loss_weights_from_json(j.at("weights"));
  return cfg;
}

Json to_json(const Scene& scene) {
  Json objects = Json::array();
  for (const SceneObject& so : scene.objects) {
    objects.push_back(Json{{"class", so.class_id}, {"box", to_json(so.box)},
                           {"roi", to_json(so.roi)}});
  }
  return Json{{"schema", 1}, {"id", scene.id}, {"camera", to_json(scene.camera)},
              {"objects", objects}};
}

Scene scene_from_json(const Json& j) {
  const std::string ctx = "scene";
  Scene scene;
  scene.id = need_int<DataError>(j, "id", ctx);
  scene.camera = camera_from_json(need<DataError>(j, "camera", ctx));
  const Json& objects = need<DataError>(j, "objects", ctx);
  if (!objects.is_array()) throw DataError(ctx + ": field 'objects' must be an array");
  for (const Json& o : objects) {
    SceneObject so;
    so.class_id = need_int<DataError>(o, "class", ctx + ".object");
    so.box = box_from_json(need<DataError>(o, "box", ctx + ".object"));
    so.roi = roi_from_json(need<DataError>(o, "roi", ctx + ".object"));
    scene.objects.push_back(so);
  }
  return scene;
}

Json to_json(const Detection& det) {
  return Json{{"image_id", det.image_id}, {"class", det.class_id}, {"score", det.score},
              {"box", to_json(det.box)}};
}

Detection detection_from_json(const Json& j) {
  const std::string ctx = "detection";
  Detection det;
  det.image_id = need_int<DataError>(j, "image_id", ctx);
  det.class_id = need_int<DataError>(j, "class", ctx);
  det.score = need_number<DataError>(j, "score", ctx);
  if (!std::isfinite(det.score)) throw DataError(ctx + ": field 'score' must be finite");
  det.box = box_from_json(need<DataError>(j, "box", ctx));
  return det;
}

Json detections_to_json(const std::vector<Detection>& dets) {
  Json arr = Json::array();
  for (const Detection& det : dets) arr.push_back(to_json(det));
  return Json{{"schema", 1}, {"detections", arr}};
}

std::vector<Detection> detections_from_json(const Json& j) {
  const Json& arr = need<DataError>(j, "detections", "detections file");
  if (!arr.is_array()) throw DataError("detections file: field 'detections' must be an array");
  std::vector<Detection> out;
  out.reserve(arr.size());
  for (const Json& d : arr) out.push_back(detection_from_json(d));
  return out;
}

namespace {

template <typename E> Json load_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw E(std::string(what) + ": cannot open " + path.string());
  try {
    Json j;
    in >> j;
    return j;
  } catch (const Json::parse_error& e) {
    throw E(std::string(what) + ": " + path.string() + ": " + e.what());
  }
}

}  // namespace

Json load_config_file(const std::filesystem::path& path) {
  return load_file<ConfigError>(path, "config");
}

Json load_data_file(const std::filesystem::path& path) {
  return load_file<DataError>(path, "data");
}

void save_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "none";
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a_hex(buf.str());
}

Json to_json(const RunManifest& m) {
  return Json{{"schema", 1},           {"command", m.command},
              {"config_hash", m.config_hash}, {"seed", m.seed},
              {"tool_version", m.tool_version}, {"outputs", m.outputs}};
}

void save_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  save_json(dir / "manifest.json", to_json(m));
}

}  // namespace persp3d
