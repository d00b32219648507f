#include "persp3d/fitting.hpp"

#include "persp3d/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>

namespace persp3d {

namespace {

struct FitEval {
  double total{std::numeric_limits<double>::infinity()};
  double d1{}, d2{}, grav{}, p{}, proj{}, prior{};
  Grad7<double> grad{Grad7<double>::Zero()};  // in internal (normalized) units
  bool ok{false};
};

// Internal parameter vector: [u_norm, v_norm, distance, w, l, h, yaw].
// The projected center lives in extended-RoI units so all coordinates move
// on comparable scales.
struct FitProblem {
  const PerspectivePoints& observed;
  const Camera& cam;
  const RoI& roi;
  const LossWeights& weights;
  const FitConfig& cfg;
  Vec3<double> size_init;
  RoI ext;

  BoxParams to_params(const Grad7<double>& x) const {
    BoxParams p;
    p.center2d = denormalize_pixel(Vec2<double>(x[0], x[1]), roi);
    p.distance = x[2];
    p.size = Vec3<double>(x[3], x[4], x[5]);
    p.yaw = x[6];
    return p;
  }

  Grad7<double> from_params(const BoxParams& p) const {
    Grad7<double> x;
    const Vec2<double> q = normalize_pixel(p.center2d, roi);
    x << q.x(), q.y(), p.distance, p.size.x(), p.size.y(), p.size.z(), p.yaw;
    return x;
  }

  Grad7<double> clamp(Grad7<double> x) const {
    x[2] = std::max(x[2], cfg.min_distance);
    for (int j = 3; j < 6; ++j) x[j] = std::max(x[j], cfg.min_size);
    return x;
  }

  FitEval evaluate(const Grad7<double>& x, Phase phase, bool want_grad) const {
    FitEval e;
    const BoxParams bp = to_params(x);
    const double wp = (phase == Phase::warmup) ? 0.0 : weights.p;
    try {
      if (want_grad) {
        ProjJacobian<double> jac;
        const Points29<double> pred = project_box_points(bp, cam, roi, &jac);
        const ValueGrad29<double> lp = loss_pp(pred, observed.points);
        e.proj = lp.value;
        Points29<double> gpts = weights.proj * lp.grad;
        const PerspectiveLoss<double> pl = loss_perspective(pred, wp != 0.0);
        e.d1 = pl.d1;
        e.d2 = pl.d2;
        e.grav = pl.grav;
        e.p = pl.weighted(weights);
        if (wp != 0.0) gpts += wp * pl.weighted_grad(weights);
        Grad7<double> g = jac.transpose() *
                          Eigen::Map<const Eigen::Matrix<double, 18, 1>>(gpts.data());
        // chain from pixel units to normalized extended-RoI units
        g[0] *= ext.width();
        g[1] *= ext.height();
        const Vec3<double> dsize = bp.size - size_init;
        e.prior = dsize.squaredNorm() / 3.0;
        g.segment<3>(3) += cfg.size_prior_weight * (2.0 / 3.0) * dsize;
        e.grad = g;
      } else {
        const Points29<double> pred = project_box_points(bp, cam, roi);
        e.proj = loss_pp(pred, observed.points).value;
        const PerspectiveLoss<double> pl = loss_perspective(pred, false);
        e.d1 = pl.d1;
        e.d2 = pl.d2;
        e.grav = pl.grav;
        e.p = pl.weighted(weights);
        e.prior = (bp.size - size_init).squaredNorm() / 3.0;
      }
    } catch (const Error&) {
      return e;  // out of the valid domain, reject
    }
    e.total = weights.proj * e.proj + wp * e.p + cfg.size_prior_weight * e.prior;
    e.ok = std::isfinite(e.total);
    return e;
  }
};

FitTraceRow make_row(int iter, const FitEval& e, bool accepted, const Grad7<double>& params) {
  FitTraceRow row;
  row.iter = iter;
  row.d1 = e.d1;
  row.d2 = e.d2;
  row.grav = e.grav;
  row.p = e.p;
  row.proj = e.proj;
  row.size_prior = e.prior;
  row.total = e.total;
  row.accepted = accepted;
  row.params = params;
  return row;
}

}  // namespace

FitResult fit_box(const PerspectivePoints& observed, const BoxParams& init, const Camera& cam,
                  const RoI& roi, const LossWeights& weights, const FitConfig& cfg) {
  FitProblem prob{observed, cam, roi, weights, cfg, init.size, extended_roi(roi)};

  BoxParams init_wrapped = init;
  init_wrapped.yaw = wrap_angle(init.yaw);
  Grad7<double> x = prob.clamp(prob.from_params(init_wrapped));

  const auto phase_at = [&](int iter) {
    return (cfg.phase_switch_iter >= 0 && iter >= cfg.phase_switch_iter) ? Phase::full
                                                                         : Phase::warmup;
  };

  FitResult res;
  res.weights = weights;

  FitEval cur = prob.evaluate(x, phase_at(0), true);
  if (!cur.ok) throw Error("fit_box: objective not finite at the initial estimate");
  res.trace.rows.push_back(make_row(0, cur, false, x));

  Grad7<double> best_x = x;
  double best_f = cur.total;
  int accepted_steps = 0;
  int small_improvements = 0;  // consecutive accepted steps below tol
  res.converged = cur.total < 1e-18;

  // Barzilai-Borwein step length on the raw gradient direction, safeguarded
  // by the backtracking line search; the scale valley of the projective
  // objective is far too ill-conditioned for a fixed step.
  Grad7<double> prev_x = x;
  Grad7<double> prev_grad = cur.grad;
  bool have_prev = false;

  for (int iter = 1; iter <= cfg.max_iters && !res.converged; ++iter) {
    const Phase phase = phase_at(iter);
    if (iter == cfg.phase_switch_iter) {
      cur = prob.evaluate(x, phase, true);  // objective changes here
      have_prev = false;
    }
    const double base =
        cfg.step * std::pow(cfg.step_decay, double(iter / std::max(cfg.decay_interval, 1)));
    double alpha = base;
    if (have_prev) {
      const Grad7<double> s = x - prev_x;
      const Grad7<double> y = cur.grad - prev_grad;
      const double sy = s.dot(y);
      const double yy = y.dot(y);
      if (sy > 0 && yy > 0) {
        alpha = std::clamp(sy / yy, 1e-8, 1e6);
      }
    }
    bool accepted = false;
    for (int t = 0; t < cfg.max_backtracks; ++t) {
      const Grad7<double> cand = prob.clamp(x - alpha * cur.grad);
      const FitEval trial = prob.evaluate(cand, phase, false);
      if (trial.ok && trial.total < cur.total) {
        const double prev = cur.total;
        prev_x = x;
        prev_grad = cur.grad;
        have_prev = true;
        x = cand;
        cur = prob.evaluate(x, phase, true);
        accepted = true;
        ++accepted_steps;
        small_improvements = (prev - cur.total < cfg.tol) ? small_improvements + 1 : 0;
        if (small_improvements >= 3 || cur.total < 1e-18) res.converged = true;
        break;
      }
      alpha *= 0.5;
    }
    res.trace.rows.push_back(make_row(iter, cur, accepted, x));
    if (cur.total < best_f) {
      best_f = cur.total;
      best_x = x;
    }
    if (!accepted && accepted_steps == 0 && iter >= 50) {
      // nothing improved on the initial estimate
      res.params = init_wrapped;
      res.box = init_wrapped.box(cam);
      res.final_loss = res.trace.rows.front().total;
      res.final_proj = res.trace.rows.front().proj;
      res.improved = false;
      return res;
    }
  }

  BoxParams out = prob.to_params(best_x);
  out.yaw = wrap_angle(out.yaw);
  res.params = out;
  res.box = out.box(cam);
  res.final_loss = best_f;
  res.final_proj = prob.evaluate(best_x, Phase::full, false).proj;
  res.improved = accepted_steps > 0;
  return res;
}

void write_trace_csv(const FitTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "iter,d1,d2,grav,p,proj,size_prior,total,accepted,u,v,distance,w,l,h,yaw\n";
  char buf[64];
  const auto put = [&](double v, char sep) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf << sep;
  };
  for (const FitTraceRow& r : trace.rows) {
    out << r.iter << ',';
    put(r.d1, ',');
    put(r.d2, ',');
    put(r.grav, ',');
    put(r.p, ',');
    put(r.proj, ',');
    put(r.size_prior, ',');
    put(r.total, ',');
    out << (r.accepted ? 1 : 0) << ',';
    for (int i = 0; i < 7; ++i) put(r.params[i], i == 6 ? '\n' : ',');
  }
}

namespace {

// One class of the template problem: K shared templates, one coefficient row
// per example. Parameters pack as [K x 18 template logits, N x K coefficient
// logits].
struct ClassProblem {
  std::vector<Points29<double>> examples;
  int k_count{};

  Eigen::Index dim() const {
    return Eigen::Index(k_count) * 18 + Eigen::Index(examples.size()) * k_count;
  }

  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd* grad) const {
    const std::size_t n = examples.size();
    std::vector<Points29<double>> act(static_cast<std::size_t>(k_count));
    for (int k = 0; k < k_count; ++k) {
      act[size_t(k)] = Eigen::Map<const Points29<double>>(x.data() + k * 18)
                           .unaryExpr([](double v) { return sigmoid(v); });
    }
    if (grad) grad->setZero(x.size());
    double loss = 0.0;
    std::vector<Points29<double>> dact(size_t(k_count), Points29<double>::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Map<const Eigen::VectorXd> logits(x.data() + k_count * 18 +
                                                     Eigen::Index(i) * k_count, k_count);
      const Eigen::VectorXd w = softmax<double>(logits);
      Points29<double> mix = Points29<double>::Zero();
      for (int k = 0; k < k_count; ++k) mix += w[k] * act[size_t(k)];
      const Points29<double> err = mix - examples[i];
      loss += err.squaredNorm() / 18.0;
      if (grad) {
        const Points29<double> derr = err * (2.0 / 18.0);
        Eigen::VectorXd a(k_count);
        for (int k = 0; k < k_count; ++k) {
          dact[size_t(k)] += w[k] * derr;
          a[k] = derr.cwiseProduct(act[size_t(k)]).sum();
        }
        const double abar = w.dot(a);
        for (int k = 0; k < k_count; ++k) {
          (*grad)[k_count * 18 + Eigen::Index(i) * k_count + k] = w[k] * (a[k] - abar) / double(n);
        }
      }
    }
    loss /= double(n);
    if (grad) {
      for (int k = 0; k < k_count; ++k) {
        const Points29<double> dtemp =
            (dact[size_t(k)] / double(n))
                .cwiseProduct(act[size_t(k)])
                .cwiseProduct(Points29<double>::Ones() - act[size_t(k)]);
        Eigen::Map<Points29<double>>(grad->data() + k * 18) = dtemp;
      }
    }
    return loss;
  }
};

double logit_clamped(double v) {
  const double c = std::clamp(v, 0.01, 0.99);
  return std::log(c / (1.0 - c));
}

// k-means++ style: first pick uniform, then distance-squared weighted.
std::vector<std::size_t> seed_indices(const std::vector<Points29<double>>& examples, int k_count,
                                      Rng& rng) {
  std::vector<std::size_t> chosen;
  chosen.push_back(std::size_t(rng.uniform_int(0, int(examples.size()) - 1)));
  while (int(chosen.size()) < k_count) {
    std::vector<double> d2(examples.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c : chosen) {
        best = std::min(best, (examples[i] - examples[c]).squaredNorm());
      }
      d2[i] = best;
      sum += best;
    }
    if (sum <= 0.0) {
      // all remaining examples coincide with a chosen one
      chosen.push_back(chosen.back());
      continue;
    }
    double r = rng.uniform01() * sum;
    std::size_t pick = examples.size() - 1;
    for (std::size_t i = 0; i < examples.size(); ++i) {
      r -= d2[i];
      if (r <= 0.0) {
        pick = i;
        break;
      }
    }
    chosen.push_back(pick);
  }
  return chosen;
}

}  // namespace

TemplateFitResult fit_templates(const std::vector<std::pair<int, PerspectivePoints>>& data,
                                int templates_per_class, const FitConfig& cfg,
                                std::uint64_t seed) {
  if (templates_per_class <= 0) throw Error("fit_templates: K must be positive");
  int num_classes = 0;
  for (const auto& [cls, pts] : data) {
    if (cls < 0) throw Error("fit_templates: negative class index");
    num_classes = std::max(num_classes, cls + 1);
  }
  if (num_classes == 0) throw InsufficientData("fit_templates: empty dataset");

  std::map<int, std::vector<Points29<double>>> by_class;
  for (const auto& [cls, pts] : data) by_class[cls].push_back(pts.points);
  for (const auto& [cls, examples] : by_class) {
    if (int(examples.size()) < templates_per_class) {
      throw InsufficientData("fit_templates: class " + std::to_string(cls) + " has " +
                             std::to_string(examples.size()) + " examples, needs >= " +
                             std::to_string(templates_per_class));
    }
  }

  TemplateFitResult res;
  res.bank = TemplateBank::zeros(num_classes, templates_per_class);
  double loss_sum = 0.0;
  std::size_t example_count = 0;

  for (auto& [cls, examples] : by_class) {
    ClassProblem prob{examples, templates_per_class};
    Rng rng(mix_seed(seed, std::uint64_t(cls), 0x7e3fULL));

    Eigen::VectorXd x = Eigen::VectorXd::Zero(prob.dim());
    const std::vector<std::size_t> seeds = seed_indices(examples, templates_per_class, rng);
    for (int k = 0; k < templates_per_class; ++k) {
      Eigen::Map<Points29<double>> t(x.data() + k * 18);
      t = examples[seeds[size_t(k)]].unaryExpr([](double v) { return logit_clamped(v); });
    }

    Eigen::VectorXd grad(prob.dim());
    double f = prob.evaluate(x, &grad);
    std::vector<double>& history = res.loss_history[cls];
    history.push_back(f);
    Eigen::VectorXd prev_x = x, prev_grad = grad;
    bool have_prev = false;
    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
      const double base =
          cfg.step * std::pow(cfg.step_decay, double(iter / std::max(cfg.decay_interval, 1)));
      double alpha = base;
      if (have_prev) {
        const double sy = (x - prev_x).dot(grad - prev_grad);
        const double yy = (grad - prev_grad).squaredNorm();
        if (sy > 0 && yy > 0) alpha = std::clamp(sy / yy, 1e-8, 1e6);
      }
      bool accepted = false;
      for (int t = 0; t < cfg.max_backtracks; ++t) {
        const Eigen::VectorXd cand = x - alpha * grad;
        const double trial = prob.evaluate(cand, nullptr);
        if (std::isfinite(trial) && trial < f) {
          const double prev = f;
          prev_x = x;
          prev_grad = grad;
          have_prev = true;
          x = cand;
          f = prob.evaluate(x, &grad);
          history.push_back(f);
          accepted = true;
          if (prev - f < cfg.tol) iter = cfg.max_iters;  // converged
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) break;  // no usable descent direction left
    }

    for (int k = 0; k < templates_per_class; ++k) {
      res.bank.template_at(cls, k) = Eigen::Map<const Points29<double>>(x.data() + k * 18);
    }
    Eigen::VectorXd coeff_mean = Eigen::VectorXd::Zero(templates_per_class);
    for (std::size_t i = 0; i < examples.size(); ++i) {
      coeff_mean += Eigen::Map<const Eigen::VectorXd>(
          x.data() + templates_per_class * 18 + Eigen::Index(i) * templates_per_class,
          templates_per_class);
    }
    res.bank.coeff_logits.row(cls) = (coeff_mean / double(examples.size())).transpose();

    res.per_class_loss[cls] = f;
    loss_sum += f * double(examples.size());
    example_count += examples.size();
  }
  res.mean_loss = loss_sum / double(example_count);
  return res;
}

}  // namespace persp3d
