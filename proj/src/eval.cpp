#include "persp3d/eval.hpp"

#include "persp3d/iou.hpp"

#include <algorithm>
#include <numeric>

namespace persp3d {

std::vector<MatchedDetection> match_detections(const std::vector<Detection>& dets,
                                               const GroundTruthSet& gts,
                                               double iou_threshold) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return dets[i].score > dets[j].score;
  });

  // matched flags per image, aligned with the gt lists
  std::map<int, std::vector<bool>> used;
  for (const auto& [img, list] : gts) used[img].assign(list.size(), false);

  std::vector<MatchedDetection> out;
  out.reserve(dets.size());
  for (std::size_t idx : order) {
    const Detection& det = dets[idx];
    bool tp = false;
    const auto it = gts.find(det.image_id);
    if (it != gts.end()) {
      double best_iou = -1.0;
      std::size_t best_j = 0;
      std::vector<bool>& flags = used[det.image_id];
      for (std::size_t j = 0; j < it->second.size(); ++j) {
        if (flags[j] || it->second[j].class_id != det.class_id) continue;
        const double iou = iou3d(det.box, it->second[j].box);
        if (iou > best_iou) {
          best_iou = iou;
          best_j = j;
        }
      }
      if (best_iou >= iou_threshold) {
        flags[best_j] = true;
        tp = true;
      }
    }
    out.push_back(MatchedDetection{idx, tp});
  }
  return out;
}

PRSeries average_precision(const std::vector<bool>& tp_flags, int num_gt) {
  if (num_gt <= 0) throw NoGroundTruth("average_precision: no ground truth for class");
  PRSeries s;
  s.recall.reserve(tp_flags.size());
  s.precision.reserve(tp_flags.size());
  int tp = 0, fp = 0;
  for (bool flag : tp_flags) {
    flag ? ++tp : ++fp;
    s.recall.push_back(double(tp) / double(num_gt));
    s.precision.push_back(double(tp) / double(tp + fp));
  }
  // all-point interpolation: integrate the precision envelope over recall
  std::vector<double> envelope = s.precision;
  for (std::size_t i = envelope.size(); i-- > 1;) {
    envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < envelope.size(); ++i) {
    ap += (s.recall[i] - prev_recall) * envelope[i];
    prev_recall = s.recall[i];
  }
  s.ap = ap;
  return s;
}

double mean_ap(const std::vector<double>& per_class_ap) {
  if (per_class_ap.empty()) throw InsufficientData("mean_ap: no classes with ground truth");
  return std::accumulate(per_class_ap.begin(), per_class_ap.end(), 0.0) /
         double(per_class_ap.size());
}

EvalResult evaluate_detections(const std::vector<Detection>& dets, const GroundTruthSet& gts,
                               double iou_threshold) {
  EvalResult res;
  for (const auto& [img, list] : gts) {
    for (const GtObject& gt : list) res.gt_counts[gt.class_id] += 1;
  }
  const std::vector<MatchedDetection> matches = match_detections(dets, gts, iou_threshold);

  // per class, in global score order
  std::map<int, std::vector<bool>> flags_by_class;
  for (const MatchedDetection& m : matches) {
    flags_by_class[dets[m.det_index].class_id].push_back(m.tp);
  }
  std::vector<double> aps;
  for (const auto& [cls, count] : res.gt_counts) {
    const auto it = flags_by_class.find(cls);
    const std::vector<bool> empty;
    res.per_class[cls] = average_precision(it == flags_by_class.end() ? empty : it->second,
                                           count);
    aps.push_back(res.per_class[cls].ap);
  }
  res.map = aps.empty() ? 0.0 : mean_ap(aps);
  return res;
}

}  // namespace persp3d
