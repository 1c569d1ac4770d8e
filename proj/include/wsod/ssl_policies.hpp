#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsod/data.hpp"
#include "wsod/errors.hpp"
#include "wsod/geometry.hpp"
#include "wsod/scoring.hpp"

namespace wsod {

enum class SsVariant { SsBaseline, SsPosOnly };

inline std::string ss_variant_name(SsVariant v) {
  switch (v) {
    case SsVariant::SsBaseline: return "ss_baseline";
    case SsVariant::SsPosOnly: return "ss_pos_only";
  }
  throw InvalidInput("unknown SSL variant");
}

inline SsVariant ss_variant_from_name(const std::string& name) {
  if (name == "ss_baseline") return SsVariant::SsBaseline;
  if (name == "ss_pos_only") return SsVariant::SsPosOnly;
  throw InvalidConfig("unknown SSL policy name: " + name);
}

struct SsConfig {
  SsVariant variant = SsVariant::SsPosOnly;
  double tau_ss = 0.6;
  double confidence_min = 0.8;
  double negative_iou_max = 0.3;

  void validate() const {
    if (!(confidence_min >= 0.0 && confidence_min <= 1.0)) {
      throw InvalidConfig("ssl: confidence_min must be in [0,1]");
    }
    if (!(negative_iou_max > 0.0 && negative_iou_max < 1.0)) {
      throw InvalidConfig("ssl: negative_iou_max must be in (0,1)");
    }
  }
};

/// Machine-generated annotations for one frame. positive_regions runs parallel
/// to positive_annotations (the region each confident detection came from);
/// negative_regions are regions the baseline variant asserts to be background.
struct PseudoLabel {
  int frame_id = -1;
  SsVariant provenance = SsVariant::SsBaseline;
  std::vector<Annotation> positive_annotations;
  std::vector<RegionFeature> positive_regions;
  std::vector<RegionFeature> negative_regions;
};

/// Self-training selection for one frame. Frames whose consistency falls below
/// tau_ss contribute nothing. Passing frames: detections at or above
/// confidence_min become pseudo ground truth; the baseline variant additionally
/// asserts every region overlapping no positive annotation (IoU <
/// negative_iou_max against all of them) as background, which is where its
/// false-negative poisoning risk lives. The pos-only variant adds positives
/// alone and abstains entirely when there are none.
inline std::optional<PseudoLabel> ss_decide(const Frame& frame, std::span<const Detection> dets,
                                            const ConsistencyScore& score, const SsConfig& cfg) {
  cfg.validate();
  if (score.value < cfg.tau_ss) return std::nullopt;

  PseudoLabel label;
  label.frame_id = frame.id;
  label.provenance = cfg.variant;
  for (const Detection& det : dets) {
    if (det.confidence < cfg.confidence_min) continue;
    if (det.region_index < 0 ||
        det.region_index >= static_cast<int>(frame.regions.size())) {
      throw InvalidInput("ss_decide: detection does not reference a region of the frame");
    }
    label.positive_annotations.push_back(Annotation{det.box, det.class_id});
    label.positive_regions.push_back(frame.regions[static_cast<std::size_t>(det.region_index)]);
  }

  if (cfg.variant == SsVariant::SsPosOnly) {
    if (label.positive_annotations.empty()) return std::nullopt;
    return label;
  }

  for (const RegionFeature& region : frame.regions) {
    bool background = true;
    for (const Annotation& ann : label.positive_annotations) {
      if (iou(region.source_box, ann.box) >= cfg.negative_iou_max) {
        background = false;
        break;
      }
    }
    if (background) label.negative_regions.push_back(region);
  }
  return label;
}

/// Fraction of stream frames the self-training process selected.
inline double ss_fraction(int selected, int total) {
  if (total < 1) throw InvalidInput("ss_fraction: total must be >= 1");
  if (selected < 0 || selected > total) {
    throw InvalidInput("ss_fraction: selected must be in [0, total]");
  }
  return static_cast<double>(selected) / static_cast<double>(total);
}

}  // namespace wsod
