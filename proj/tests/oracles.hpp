#pragma once

// Slow reference implementations used to cross-check the library. Kept
// deliberately naive: every prefix is re-matched from scratch and the kernel
// solve is dense, so agreement with the fast paths is meaningful.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include <wsod/geometry.hpp>
#include <wsod/random.hpp>
#include <wsod/voc_eval.hpp>

namespace oracles {

inline bool order_before(const wsod::Detection& a, const wsod::Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.frame_id != b.frame_id) return a.frame_id < b.frame_id;
  if (a.box.x_min != b.box.x_min) return a.box.x_min < b.box.x_min;
  return a.box.y_min < b.box.y_min;
}

// Greedy matching of a detection prefix against ground truth, recomputed
// independently of any running state.
inline int prefix_true_positives(const std::vector<wsod::Detection>& ranked,
                                 std::size_t prefix_len,
                                 const std::vector<wsod::GroundTruth>& gts,
                                 double iou_thresh) {
  std::vector<bool> taken(gts.size(), false);
  int tp = 0;
  for (std::size_t i = 0; i < prefix_len; ++i) {
    const auto& det = ranked[i];
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      if (gts[g].frame_id != det.frame_id) continue;
      if (gts[g].annotation.class_id != det.class_id) continue;
      const double v = wsod::iou(gts[g].annotation.box, det.box);
      if (v >= iou_thresh && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      taken[best] = true;
      ++tp;
    }
  }
  return tp;
}

inline double voc_ap(std::vector<wsod::Detection> dets,
                     const std::vector<wsod::GroundTruth>& gts,
                     double iou_thresh = 0.5) {
  if (gts.empty() || dets.empty()) return 0.0;
  std::stable_sort(dets.begin(), dets.end(), order_before);
  const double n_gt = static_cast<double>(gts.size());
  std::vector<double> recalls;
  std::vector<double> precisions;
  for (std::size_t p = 1; p <= dets.size(); ++p) {
    const int tp = prefix_true_positives(dets, p, gts, iou_thresh);
    recalls.push_back(tp / n_gt);
    precisions.push_back(tp / static_cast<double>(p));
  }
  double total = 0.0;
  for (int i = 0; i <= 10; ++i) {
    const double t = i / 10.0;
    double best = (t <= 0.0) ? 1.0 : 0.0;
    for (std::size_t j = 0; j < recalls.size(); ++j) {
      if (recalls[j] >= t) best = std::max(best, precisions[j]);
    }
    total += best;
  }
  return total / 11.0;
}

struct ApInstance {
  std::vector<wsod::Detection> dets;
  std::vector<wsod::GroundTruth> gts;
};

// Boxes snap to a coarse grid with a small size menu so overlaps, duplicate
// confidences, and cross-frame ties all occur often.
inline ApInstance random_ap_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_gt_dist(1, 5);
  std::uniform_int_distribution<int> n_det_dist(1, 10);
  std::uniform_int_distribution<int> cell(0, 4);
  std::uniform_int_distribution<int> size_pick(0, 2);
  std::uniform_int_distribution<int> frame_dist(0, 1);
  std::uniform_int_distribution<int> conf_dist(1, 9);
  const double sizes[3] = {10.0, 15.0, 20.0};

  auto random_box = [&]() {
    const double x = 10.0 * cell(rng);
    const double y = 10.0 * cell(rng);
    const double w = sizes[size_pick(rng)];
    const double h = sizes[size_pick(rng)];
    return wsod::BoundingBox{x, y, x + w, y + h};
  };

  ApInstance inst;
  const int n_gt = n_gt_dist(rng);
  for (int g = 0; g < n_gt; ++g) {
    inst.gts.push_back({frame_dist(rng), {random_box(), 0}});
  }
  const int n_det = n_det_dist(rng);
  for (int d = 0; d < n_det; ++d) {
    wsod::Detection det;
    det.box = random_box();
    det.class_id = 0;
    det.confidence = conf_dist(rng) / 10.0;
    det.frame_id = frame_dist(rng);
    inst.dets.push_back(det);
  }
  return inst;
}

// Dense kernel ridge regression: alpha = (K + lambda*n*I)^{-1} y, scores at
// the training points are K alpha.
inline Eigen::VectorXd dense_krr_train_scores(const Eigen::MatrixXd& x,
                                              const Eigen::VectorXd& y,
                                              double sigma, double lambda) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d2 = (x.row(i) - x.row(j)).squaredNorm();
      k(i, j) = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  }
  Eigen::MatrixXd reg = k + lambda * static_cast<double>(n) *
                                Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd alpha = reg.ldlt().solve(y);
  return k * alpha;
}

}  // namespace oracles
