#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "wsod/data.hpp"
#include "wsod/detector.hpp"
#include "wsod/errors.hpp"
#include "wsod/geometry.hpp"
#include "wsod/random.hpp"

namespace wsod {

/// Cross-image agreement for one frame's detections. value is the mean over
/// detections of the per-detection agreement (itself a mean over stitches);
/// frames with no detections get value 0 and the empty_detections flag so the
/// caller can tell "no detections" apart from "detections nobody agrees with".
struct ConsistencyScore {
  double value = 0.0;
  int n_stitches = 0;
  std::vector<double> per_detection;
  bool empty_detections = false;
  int placement_failures = 0;
};

/// Classic least-confidence uncertainty. Distinct type so selection policies
/// cannot confuse its direction (higher = more uncertain) with consistency
/// (higher = more consistent).
struct UncertaintyScore {
  double value = 0.0;
};

inline UncertaintyScore uncertainty_score(std::span<const Detection> dets) {
  if (dets.empty()) return UncertaintyScore{1.0};
  double best = 0.0;
  for (const Detection& d : dets) best = std::max(best, d.confidence);
  return UncertaintyScore{1.0 - best};
}

namespace detail {

struct Placement {
  BoundingBox box;
  bool constrained = true;
};

/// Sample a location for a box of the detection's size inside the host scene:
/// up to 50 attempts to find a spot with IoU < 0.2 against every host
/// ground-truth box, otherwise the last attempt stands unconstrained.
inline Placement place_transplant(const BoundingBox& det_box, const Frame& host,
                                  std::mt19937_64& rng) {
  const double bw = det_box.width();
  const double bh = det_box.height();
  const double x_span = std::max(0.0, host.scene.width - bw);
  const double y_span = std::max(0.0, host.scene.height - bh);
  std::uniform_real_distribution<double> ux(0.0, x_span);
  std::uniform_real_distribution<double> uy(0.0, y_span);
  BoundingBox candidate{};
  for (int attempt = 0; attempt < 50; ++attempt) {
    const double x = ux(rng);
    const double y = uy(rng);
    candidate = BoundingBox{x, y, x + bw, y + bh};
    bool clear = true;
    for (const Annotation& ann : host.gt) {
      if (iou(candidate, ann.box) >= 0.2) {
        clear = false;
        break;
      }
    }
    if (clear) return {candidate, true};
  }
  return {candidate, false};
}

}  // namespace detail

/// Copy one detection's region into a host frame at the given location: the
/// feature vector is carried over bit-exactly, only the box moves. Returns the
/// host frame with the transplanted region appended.
inline Frame transplant_region(const Frame& host, const RegionFeature& region,
                               const BoundingBox& location) {
  Frame stitched = host;
  RegionFeature moved = region;
  moved.source_box = location;
  moved.frame_id = host.id;
  stitched.regions.push_back(std::move(moved));
  return stitched;
}

/// Consistency of a frame's detections under cross-image validation: each
/// detection's region is transplanted into J labeled frames (sampled with
/// replacement) and re-detected there; agreement per stitch is the confidence
/// of the best same-class re-detection with IoU >= 0.5 to the transplanted
/// box, else 0. Deterministic given (model, rng_seed).
inline ConsistencyScore civ_score(const Frame& frame, std::span<const Detection> dets,
                                  std::span<const Frame> labeled_pool, const DetectorModel& model,
                                  int j_stitches, std::uint64_t rng_seed) {
  if (j_stitches < 1) throw InvalidConfig("civ_score: J must be >= 1");
  if (labeled_pool.empty()) throw InvalidInput("civ_score: empty labeled pool");

  ConsistencyScore out;
  if (dets.empty()) {
    out.empty_detections = true;
    return out;
  }

  std::mt19937_64 rng = make_rng(rng_seed, {0xc1f, static_cast<std::uint64_t>(frame.id)});
  std::uniform_int_distribution<std::size_t> pick_host(0, labeled_pool.size() - 1);

  double total = 0.0;
  for (const Detection& det : dets) {
    if (det.region_index < 0 ||
        det.region_index >= static_cast<int>(frame.regions.size())) {
      throw InvalidInput("civ_score: detection does not reference a region of the frame");
    }
    const RegionFeature& region = frame.regions[static_cast<std::size_t>(det.region_index)];
    double agreement_sum = 0.0;
    for (int j = 0; j < j_stitches; ++j) {
      const Frame& host = labeled_pool[pick_host(rng)];
      const detail::Placement placement = detail::place_transplant(det.box, host, rng);
      if (!placement.constrained) ++out.placement_failures;
      const Frame stitched = transplant_region(host, region, placement.box);
      const std::vector<Detection> redets = detect(model, stitched);
      double best = 0.0;
      for (const Detection& re : redets) {
        if (re.class_id != det.class_id) continue;
        if (iou(re.box, placement.box) < 0.5) continue;
        best = std::max(best, re.confidence);
      }
      agreement_sum += best;
      ++out.n_stitches;
    }
    out.per_detection.push_back(agreement_sum / static_cast<double>(j_stitches));
  }
  for (double a : out.per_detection) total += a;
  out.value = total / static_cast<double>(out.per_detection.size());
  return out;
}

}  // namespace wsod
