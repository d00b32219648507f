#pragma once

#include "persp3d/box3d.hpp"
#include "persp3d/camera.hpp"
#include "persp3d/common.hpp"
#include "persp3d/losses.hpp"
#include "persp3d/perspective.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace persp3d {

struct FitConfig {
  int max_iters{400};
  double step{0.25};            // initial step in scaled parameter units
  double step_decay{0.5};
  int decay_interval{150};
  // Iteration at which the perspective term joins the objective; -1 keeps the
  // fit on the reprojection term alone. On exact projections the perspective
  // term is minimized away from the true box whenever the camera tilts, so it
  // stays off unless asked for.
  int phase_switch_iter{-1};
  double tol{1e-14};            // stop when an accepted step improves less
  double min_distance{0.1};
  double min_size{0.05};
  int max_backtracks{40};
  // Weight of the size anchor against the initial estimate. The projective
  // terms are exactly invariant to scaling distance and size together about
  // the camera center, so absolute scale must come from the 3D attribute
  // estimate; this term stands in for it.
  double size_prior_weight{1.0};
};

struct FitTraceRow {
  int iter{};
  double d1{}, d2{}, grav{}, p{}, proj{}, size_prior{};
  double total{};
  bool accepted{};
  Grad7<double> params{Grad7<double>::Zero()};
};

struct FitTrace {
  std::vector<FitTraceRow> rows;
};

struct FitResult {
  BoxParams params;
  Box3D box;
  LossWeights weights;
  double final_loss{};
  double final_proj{};
  FitTrace trace;
  bool improved{};    // at least one accepted step
  bool converged{};   // loss decrease fell below tol (or started at ~0)
};

/// Recover box parameters from observed perspective points by gradient
/// descent with backtracking line search on the weighted consistency and
/// perspective objectives (plus the size anchor). Returns the best iterate;
/// if no step is accepted within the first 50 iterations the initial
/// parameters come back with improved = false.
FitResult fit_box(const PerspectivePoints& observed, const BoxParams& init, const Camera& cam,
                  const RoI& roi, const LossWeights& weights, const FitConfig& cfg);

void write_trace_csv(const FitTrace& trace, const std::string& path);

struct TemplateFitResult {
  TemplateBank bank;
  double mean_loss{};                      // reconstruction with per-example coefficients
  std::map<int, double> per_class_loss;
  std::map<int, std::vector<double>> loss_history;  // per accepted step, per class
};

/// Learn a template dictionary from labeled perspective-point sets. Templates
/// are shared per class; every example keeps its own mixing coefficients
/// while fitting (the bank stores their per-class mean). Seeding picks K
/// examples k-means++ style. Throws InsufficientData when a represented
/// class has fewer than K examples.
TemplateFitResult fit_templates(const std::vector<std::pair<int, PerspectivePoints>>& data,
                                int templates_per_class, const FitConfig& cfg,
                                std::uint64_t seed);

}  // namespace persp3d
