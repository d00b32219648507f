#pragma once

#include "persp3d/box3d.hpp"
#include "persp3d/common.hpp"

#include <map>
#include <vector>

namespace persp3d {

struct Detection {
  int image_id{};
  int class_id{};
  double score{};
  Box3D box;
};

struct GtObject {
  int class_id{};
  Box3D box;
};

/// Ground truth per image id.
using GroundTruthSet = std::map<int, std::vector<GtObject>>;

struct MatchedDetection {
  std::size_t det_index{};  // index into the input detection list
  bool tp{};
};

/// Greedy matching: detections in descending score order (stable ties) claim
/// the highest-IoU unmatched same-class ground truth of their image; a claim
/// below the threshold is a false positive. Returns one entry per detection
/// in the processing order.
std::vector<MatchedDetection> match_detections(const std::vector<Detection>& dets,
                                               const GroundTruthSet& gts,
                                               double iou_threshold = 0.15);

struct PRSeries {
  std::vector<double> recall;
  std::vector<double> precision;
  double ap{};
};

/// Area under the precision envelope over recall. tp_flags must be in
/// descending score order. Throws NoGroundTruth when num_gt is zero.
PRSeries average_precision(const std::vector<bool>& tp_flags, int num_gt);

/// Unweighted mean. Throws InsufficientData on an empty list.
double mean_ap(const std::vector<double>& per_class_ap);

struct EvalResult {
  std::map<int, PRSeries> per_class;  // classes with at least one ground truth
  std::map<int, int> gt_counts;
  double map{};
};

EvalResult evaluate_detections(const std::vector<Detection>& dets, const GroundTruthSet& gts,
                               double iou_threshold = 0.15);

}  // namespace persp3d
