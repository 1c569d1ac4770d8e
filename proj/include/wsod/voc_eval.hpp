#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "wsod/errors.hpp"
#include "wsod/geometry.hpp"

namespace wsod {

/// Ground-truth annotation tagged with the image it belongs to.
struct GroundTruth {
  int frame_id = -1;
  Annotation annotation;
};

/// Pascal-VOC-2007 average precision: 11-point interpolation on the recall
/// grid 0.0, 0.1, ..., 1.0. Detections are matched greedily in descending
/// confidence order; a detection is a true positive when an unmatched ground
/// truth of the same class in the same image overlaps it with IoU >= iou_thresh
/// (the highest-IoU such ground truth is consumed). The precision/recall curve
/// starts at the conventional point (recall 0, precision 1).
///
/// Inputs are normally a single class's detections and ground truths.
/// Edge cases: no detections -> 0; detections but no ground truth -> 0.
inline double voc_ap_2007(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                          double iou_thresh = 0.5) {
  if (gts.empty()) return 0.0;
  if (dets.empty()) return 0.0;

  std::vector<Detection> sorted(dets.begin(), dets.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const Detection& a, const Detection& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.frame_id != b.frame_id) return a.frame_id < b.frame_id;
    return detail::detection_order(a, b);
  });

  std::vector<bool> gt_used(gts.size(), false);
  const std::size_t n_gt = gts.size();

  // Cumulative precision/recall after each detection in rank order.
  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(sorted.size());
  recall.reserve(sorted.size());
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < sorted.size(); ++rank) {
    const Detection& d = sorted[rank];
    double best_iou = 0.0;
    std::size_t best_gt = gts.size();
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[g]) continue;
      if (gts[g].frame_id != d.frame_id) continue;
      if (gts[g].annotation.class_id != d.class_id) continue;
      const double ov = iou(gts[g].annotation.box, d.box);
      if (ov > best_iou) {
        best_iou = ov;
        best_gt = g;
      }
    }
    if (best_gt < gts.size() && best_iou >= iou_thresh) {
      gt_used[best_gt] = true;
      ++tp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }

  double sum = 0.0;
  for (int step = 0; step <= 10; ++step) {
    // step / 10.0 is correctly rounded, so a recall that equals a grid point
    // as a rational (tp/npos == step/10) compares equal; 0.1 * step is not.
    const double t = static_cast<double>(step) / 10.0;
    // Curve start (recall 0, precision 1) qualifies at t == 0.
    double best = (t <= 0.0) ? 1.0 : 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
      if (recall[i] >= t) best = std::max(best, precision[i]);
    }
    sum += best;
  }
  return sum / 11.0;
}

/// Per-class AP over a mixed-class detection/ground-truth set. A class with
/// neither detections nor ground truth is not evaluated (nullopt); a class
/// with detections but no ground truth scores 0.
inline std::vector<std::optional<double>> per_class_ap(std::span<const Detection> dets,
                                                       std::span<const GroundTruth> gts,
                                                       int num_classes,
                                                       double iou_thresh = 0.5) {
  if (num_classes <= 0) throw InvalidInput("per_class_ap: num_classes must be positive");
  std::vector<std::optional<double>> aps(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) {
    std::vector<Detection> cd;
    std::vector<GroundTruth> cg;
    for (const Detection& d : dets) {
      if (d.class_id == c) cd.push_back(d);
    }
    for (const GroundTruth& g : gts) {
      if (g.annotation.class_id == c) cg.push_back(g);
    }
    if (cd.empty() && cg.empty()) continue;
    aps[static_cast<std::size_t>(c)] = voc_ap_2007(cd, cg, iou_thresh);
  }
  return aps;
}

/// Arithmetic mean over evaluated classes. Throws InvalidInput on an empty set.
inline double map_score(std::span<const double> per_class) {
  if (per_class.empty()) throw InvalidInput("map_score: no classes evaluated");
  double sum = 0.0;
  for (double ap : per_class) sum += ap;
  return sum / static_cast<double>(per_class.size());
}

inline double map_score(const std::vector<double>& per_class) {
  return map_score(std::span<const double>(per_class));
}

}  // namespace wsod
