#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "wsod/errors.hpp"

namespace wsod {

/// Axis-aligned box in continuous scene coordinates, corners (x_min, y_min)
/// and (x_max, y_max). A valid box has strictly positive width and height.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }

  bool valid() const {
    return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
           std::isfinite(y_max) && x_min < x_max && y_min < y_max;
  }
};

/// A ground-truth box with its class.
struct Annotation {
  BoundingBox box;
  int class_id = 0;
};

/// A predicted box. `confidence` is the monotone [0,1] mapping of the raw
/// classifier margin; both are kept so policies can threshold in either scale.
/// `frame_id` identifies the image the detection belongs to (evaluation is
/// per-image); `region_index` points back at the proposal the detection came
/// from, which self-training uses to recover the region's feature vector.
struct Detection {
  BoundingBox box;
  int class_id = 0;
  double confidence = 0.0;
  double margin = 0.0;
  int frame_id = -1;
  int region_index = -1;
};

/// Intersection-over-union of two valid boxes. Symmetric, 1 iff identical,
/// 0 iff disjoint. Throws InvalidInput on a degenerate (zero/negative area) box.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  if (!a.valid() || !b.valid()) {
    throw InvalidInput("iou: degenerate bounding box");
  }
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

namespace detail {

/// Ordering used everywhere a detection list must be deterministic:
/// confidence descending, ties broken by lower x_min, then lower y_min.
inline bool detection_order(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.box.x_min != b.box.x_min) return a.box.x_min < b.box.x_min;
  return a.box.y_min < b.box.y_min;
}

}  // namespace detail

/// Greedy per-class non-maximum suppression. Keeps the highest-confidence
/// detection and drops any same-class detection overlapping a kept one with
/// IoU strictly above `iou_thresh`. Output is sorted by descending confidence
/// with the deterministic tie-break of detail::detection_order.
inline std::vector<Detection> nms(std::span<const Detection> dets, double iou_thresh) {
  if (!(iou_thresh > 0.0 && iou_thresh < 1.0)) {
    throw InvalidConfig("nms: iou_thresh must be in (0,1)");
  }
  std::vector<Detection> sorted(dets.begin(), dets.end());
  std::sort(sorted.begin(), sorted.end(), detail::detection_order);
  std::vector<Detection> kept;
  kept.reserve(sorted.size());
  for (const Detection& d : sorted) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (k.class_id == d.class_id && iou(k.box, d.box) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

inline std::vector<Detection> nms(const std::vector<Detection>& dets, double iou_thresh) {
  return nms(std::span<const Detection>(dets), iou_thresh);
}

}  // namespace wsod
