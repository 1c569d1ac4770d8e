#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wsod/data.hpp"
#include "wsod/errors.hpp"
#include "wsod/geometry.hpp"
#include "wsod/random.hpp"

namespace wsod {

/// Hard-negative bootstrapping schedule. The background pool is visited in
/// n_batches chunks of batch_size; negatives scoring at least
/// hard_negative_score_min against the current classifier are retained, capped
/// at max_negatives_kept by keeping the highest-scoring ones.
struct MinibootstrapParams {
  int n_batches = 4;
  int batch_size = 500;
  // Negatives regress to -1, so anything scoring above that is still
  // under-confident and worth keeping. A floor of 0 would drop every negative
  // once the classifier separates, leaving refits with no background at all.
  double hard_negative_score_min = -1.0;
  int max_negatives_kept = 2000;

  void validate() const {
    if (n_batches < 1) throw InvalidConfig("minibootstrap: n_batches must be >= 1");
    if (batch_size < 1) throw InvalidConfig("minibootstrap: batch_size must be >= 1");
    if (max_negatives_kept < batch_size) {
      throw InvalidConfig("minibootstrap: max_negatives_kept must be >= batch_size");
    }
  }
};

/// Everything the second stage needs to train and predict. sigma <= 0 selects
/// the median heuristic at training time. Margins are mapped to [0,1]
/// confidences by a logistic sigmoid with temperature confidence_temperature;
/// ridge-regression margins on +-1 targets live in roughly [-1.2, 1.2], and the
/// temperature stretches that range so the usual confidence thresholds
/// (0.5 detection, 0.8 self-training) fall at meaningful margins.
struct DetectorParams {
  int num_classes = 0;
  int feature_dim = 0;

  double lambda = 1e-3;
  double sigma = 0.0;
  int nystrom_centers = 200;
  MinibootstrapParams bootstrap;

  double refiner_ridge = 0.1;
  double refiner_iou_min = 0.5;

  double positive_iou_min = 0.5;
  double background_iou_max = 0.3;

  double confidence_threshold = 0.5;
  double nms_threshold = 0.3;
  double confidence_temperature = 0.25;

  std::uint64_t train_seed = 0;

  void validate() const {
    if (num_classes < 1) throw InvalidConfig("detector: num_classes must be >= 1");
    if (feature_dim < 1) throw InvalidConfig("detector: feature_dim must be >= 1");
    if (lambda <= 0.0) throw InvalidConfig("detector: lambda must be positive");
    if (nystrom_centers < 1) throw InvalidConfig("detector: nystrom_centers must be >= 1");
    if (confidence_temperature <= 0.0) {
      throw InvalidConfig("detector: confidence_temperature must be positive");
    }
    if (!(nms_threshold > 0.0 && nms_threshold < 1.0)) {
      throw InvalidConfig("detector: nms_threshold must be in (0,1)");
    }
    bootstrap.validate();
  }
};

inline double confidence_from_margin(double margin, double temperature) {
  return 1.0 / (1.0 + std::exp(-margin / temperature));
}

namespace detail {

/// Squared Euclidean distances between the rows of A and the rows of B.
inline Eigen::MatrixXd pairwise_sq_dists(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::VectorXd a2 = a.rowwise().squaredNorm();
  Eigen::VectorXd b2 = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (a * b.transpose());
  d2.colwise() += a2;
  d2.rowwise() += b2.transpose();
  return d2.cwiseMax(0.0);
}

inline Eigen::MatrixXd gaussian_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                       double sigma) {
  Eigen::MatrixXd d2 = pairwise_sq_dists(a, b);
  return (-d2 / (2.0 * sigma * sigma)).array().exp().matrix();
}

/// Solve A X = B for symmetric positive-definite A via Cholesky, escalating a
/// multiplicative diagonal jitter (1 + 10^i * 1e-10, i = 0..6) before failing.
inline Eigen::MatrixXd solve_spd_jitter(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                        const char* what) {
  Eigen::VectorXd diag = a.diagonal();
  for (int i = 0; i <= 6; ++i) {
    const double scale = 1.0 + std::pow(10.0, i) * 1e-10;
    Eigen::MatrixXd attempt = a;
    attempt.diagonal() = diag * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(attempt);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd x = llt.solve(b);
    if (x.allFinite()) return x;
  }
  throw TrainingError(std::string(what) + ": singular system after maximum jitter escalation");
}

/// Lower Cholesky factor of symmetric positive-definite A, with the same
/// jitter escalation as solve_spd_jitter.
inline Eigen::MatrixXd chol_spd_jitter(const Eigen::MatrixXd& a, const char* what) {
  const Eigen::VectorXd diag = a.diagonal();
  for (int i = 0; i <= 6; ++i) {
    const double scale = 1.0 + std::pow(10.0, i) * 1e-10;
    Eigen::MatrixXd attempt = a;
    attempt.diagonal() = diag * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(attempt);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd l = llt.matrixL();
    if (l.allFinite()) return l;
  }
  throw TrainingError(std::string(what) + ": singular system after maximum jitter escalation");
}

/// Median pairwise distance over a subsample of at most 256 rows.
inline double median_heuristic_sigma(const Eigen::MatrixXd& x, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  if (n < 2) return 1.0;
  const Eigen::Index m = std::min<Eigen::Index>(n, 256);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (Eigen::Index i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      dists.push_back((x.row(idx[static_cast<std::size_t>(i)]) -
                       x.row(idx[static_cast<std::size_t>(j)]))
                          .norm());
    }
  }
  if (dists.empty()) return 1.0;
  const std::size_t mid = dists.size() / 2;
  std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(mid), dists.end());
  const double med = dists[mid];
  return med > 0.0 ? med : 1.0;
}

}  // namespace detail

/// One binary classifier: Gaussian-kernel scores against M Nystrom centers,
/// score(x) = sum_j coeff_j * exp(-||x - c_j||^2 / (2 sigma^2)).
struct ClassClassifier {
  Eigen::MatrixXd centers;       // M x d
  Eigen::VectorXd coefficients;  // M
  double kernel_sigma = 1.0;
  double lambda = 1e-3;

  double score(const Eigen::VectorXd& x) const {
    if (centers.rows() == 0) return 0.0;
    Eigen::VectorXd d2 =
        (centers.rowwise() - x.transpose()).rowwise().squaredNorm();
    return ((-d2 / (2.0 * kernel_sigma * kernel_sigma)).array().exp() *
            coefficients.array())
        .sum();
  }

  /// Margins for every row of X.
  Eigen::VectorXd score_batch(const Eigen::MatrixXd& x) const {
    if (centers.rows() == 0) return Eigen::VectorXd::Zero(x.rows());
    return detail::gaussian_kernel(x, centers, kernel_sigma) * coefficients;
  }
};

/// Nystrom kernel ridge regression on +-1 labels. Centers are M points drawn
/// uniformly without replacement from X; coefficients minimize
/// |K_nm alpha - y|^2 + lambda * n * alpha^T K_mm alpha, solved in stacked
/// least-squares form (QR) rather than via the normal equations so the
/// conditioning is not squared. sigma <= 0 selects the median heuristic on X.
/// With M = n this reproduces the dense kernel ridge regression solution.
inline ClassClassifier nystrom_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int m,
                                   double sigma, double lambda, std::uint64_t rng_seed) {
  const Eigen::Index n = x.rows();
  if (n < 1) throw InvalidInput("nystrom_fit: empty training set");
  if (y.size() != n) throw InvalidInput("nystrom_fit: |X| != |y|");
  if (m < 1 || m > n) throw InvalidInput("nystrom_fit: M must be in [1, |X|]");
  if (lambda <= 0.0) throw InvalidConfig("nystrom_fit: lambda must be positive");

  std::mt19937_64 rng = make_rng(rng_seed, {0x6e79, static_cast<std::uint64_t>(n)});
  if (sigma <= 0.0) sigma = detail::median_heuristic_sigma(x, rng);

  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<Eigen::Index> pick(i, n - 1);
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick(rng))]);
  }
  Eigen::MatrixXd centers(m, x.cols());
  for (int i = 0; i < m; ++i) centers.row(i) = x.row(idx[static_cast<std::size_t>(i)]);

  const Eigen::MatrixXd k_nm = detail::gaussian_kernel(x, centers, sigma);
  const Eigen::MatrixXd k_mm = detail::gaussian_kernel(centers, centers, sigma);
  const Eigen::MatrixXd l_mm = detail::chol_spd_jitter(k_mm, "nystrom_fit");
  Eigen::MatrixXd stacked(n + m, m);
  stacked.topRows(n) = k_nm;
  stacked.bottomRows(m) = std::sqrt(lambda * static_cast<double>(n)) * l_mm.transpose();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + m);
  rhs.head(n) = y;

  ClassClassifier clf;
  clf.centers = std::move(centers);
  clf.coefficients = stacked.householderQr().solve(rhs);
  if (!clf.coefficients.allFinite()) {
    throw TrainingError("nystrom_fit: non-finite solution");
  }
  clf.kernel_sigma = sigma;
  clf.lambda = lambda;
  return clf;
}

/// Regularized-least-squares box refinement: linear map (with intercept) from
/// a region's feature vector to the four standard box-delta targets
/// (dx/w, dy/h, log dw, log dh). Zero weights refine to the identity.
struct BoxRefiner {
  Eigen::MatrixXd weights;  // (d+1) x 4, last row is the intercept
  double ridge = 0.0;

  bool trained() const { return weights.size() > 0; }

  BoundingBox refine(const BoundingBox& proposal, const Eigen::VectorXd& feature) const {
    if (!trained()) return proposal;
    if (feature.size() + 1 != weights.rows()) {
      throw InvalidInput("BoxRefiner: feature dimension mismatch");
    }
    Eigen::VectorXd phi(feature.size() + 1);
    phi.head(feature.size()) = feature;
    phi(feature.size()) = 1.0;
    Eigen::Vector4d t = weights.transpose() * phi;
    const double tw = std::clamp(t(2), -4.0, 4.0);
    const double th = std::clamp(t(3), -4.0, 4.0);
    const double cx = proposal.center_x() + t(0) * proposal.width();
    const double cy = proposal.center_y() + t(1) * proposal.height();
    const double w = proposal.width() * std::exp(tw);
    const double h = proposal.height() * std::exp(th);
    return BoundingBox{cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
  }
};

/// One refiner training pair: the region's feature, the box it proposed, and
/// the ground-truth box it should map to.
struct RefinerPair {
  Eigen::VectorXd feature;
  BoundingBox proposal;
  BoundingBox target;
};

/// Closed-form ridge regression on the box-delta targets.
inline BoxRefiner rls_fit_refiner(std::span<const RefinerPair> pairs, double ridge) {
  if (pairs.empty()) throw InvalidInput("rls_fit_refiner: no training pairs");
  if (ridge < 0.0) throw InvalidConfig("rls_fit_refiner: ridge must be >= 0");
  const Eigen::Index d = pairs.front().feature.size();
  const Eigen::Index n = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd phi(n, d + 1);
  Eigen::MatrixXd targets(n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RefinerPair& p = pairs[static_cast<std::size_t>(i)];
    if (p.feature.size() != d) throw InvalidInput("rls_fit_refiner: inconsistent feature dims");
    phi.row(i).head(d) = p.feature;
    phi(i, d) = 1.0;
    targets(i, 0) = (p.target.center_x() - p.proposal.center_x()) / p.proposal.width();
    targets(i, 1) = (p.target.center_y() - p.proposal.center_y()) / p.proposal.height();
    targets(i, 2) = std::log(p.target.width() / p.proposal.width());
    targets(i, 3) = std::log(p.target.height() / p.proposal.height());
  }
  Eigen::MatrixXd a = phi.transpose() * phi;
  a.diagonal().array() += ridge;
  a = 0.5 * (a + a.transpose()).eval();
  BoxRefiner refiner;
  refiner.weights = detail::solve_spd_jitter(a, phi.transpose() * targets, "rls_fit_refiner");
  refiner.ridge = ridge;
  return refiner;
}

/// Per-class training material assembled from annotated frames: positives per
/// class, one shared background pool, and the refiner's (feature, proposal,
/// target) pairs.
struct TrainingData {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<std::vector<Eigen::VectorXd>> positives;
  std::vector<Eigen::VectorXd> negatives;
  std::vector<RefinerPair> refiner_pairs;

  void init(int classes, int dim) {
    num_classes = classes;
    feature_dim = dim;
    positives.assign(static_cast<std::size_t>(classes), {});
  }
};

/// Region-to-annotation assignment: a region is a positive for the class of
/// its best-overlapping ground truth at IoU >= positive_iou_min, background
/// when its best overlap stays below background_iou_max, and dropped in
/// between (the usual R-CNN convention).
inline void accumulate_training_frames(TrainingData& data, std::span<const Frame> frames,
                                       const DetectorParams& params) {
  for (const Frame& frame : frames) {
    for (const RegionFeature& region : frame.regions) {
      if (region.vector.size() != params.feature_dim) {
        throw InvalidInput("training assembly: feature dimension mismatch");
      }
      double best_iou = 0.0;
      const Annotation* best = nullptr;
      for (const Annotation& ann : frame.gt) {
        const double ov = iou(region.source_box, ann.box);
        if (ov > best_iou) {
          best_iou = ov;
          best = &ann;
        }
      }
      if (best != nullptr && best_iou >= params.positive_iou_min) {
        if (best->class_id < 0 || best->class_id >= params.num_classes) {
          throw InvalidInput("training assembly: class id out of range");
        }
        data.positives[static_cast<std::size_t>(best->class_id)].push_back(region.vector);
        if (best_iou >= params.refiner_iou_min) {
          data.refiner_pairs.push_back({region.vector, region.source_box, best->box});
        }
      } else if (best_iou < params.background_iou_max) {
        data.negatives.push_back(region.vector);
      }
    }
  }
}

inline TrainingData assemble_training_data(std::span<const Frame> frames,
                                           const DetectorParams& params) {
  TrainingData data;
  data.init(params.num_classes, params.feature_dim);
  accumulate_training_frames(data, frames, params);
  return data;
}

/// Per-class bookkeeping from a Minibootstrap run, for tests and diagnostics.
struct TrainStats {
  std::vector<int> retained_negatives;
  std::vector<int> fits_performed;
  double sigma = 0.0;
};

/// The retrainable second stage: per-class classifiers plus the shared box
/// refiner. Immutable after training; retraining produces a new value.
struct DetectorModel {
  DetectorParams params;
  std::vector<ClassClassifier> classifiers;
  BoxRefiner refiner;

  int num_classes() const { return static_cast<int>(classifiers.size()); }
};

namespace detail {

inline Eigen::MatrixXd stack_rows(std::span<const Eigen::VectorXd> a,
                                  std::span<const std::pair<const Eigen::VectorXd*, double>> b,
                                  Eigen::Index dim) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(a.size() + b.size()), dim);
  Eigen::Index r = 0;
  for (const Eigen::VectorXd& v : a) out.row(r++) = v;
  for (const auto& [v, score] : b) out.row(r++) = *v;
  return out;
}

/// Seed tags for the independent RNG streams inside minibootstrap_train.
enum : std::uint64_t { kSeedSigma = 0xa1, kSeedShuffle = 0xa2, kSeedFit = 0xa3 };

}  // namespace detail

/// Minibootstrap training: per class, walk the shuffled background pool in
/// chunks, keep the chunk members the current classifier is still unsure
/// about (score above hard_negative_score_min, capped at max_negatives_kept
/// by score), and refit on positives plus the retained set. The first chunk
/// doubles as the initial negative set. Identical seeds and inputs give
/// bit-identical models.
inline DetectorModel minibootstrap_train(const TrainingData& data, const DetectorParams& params,
                                         std::uint64_t rng_seed, TrainStats* stats = nullptr) {
  params.validate();
  if (data.num_classes != params.num_classes) {
    throw InvalidInput("minibootstrap_train: class count mismatch");
  }
  for (int c = 0; c < data.num_classes; ++c) {
    if (data.positives[static_cast<std::size_t>(c)].empty()) {
      throw TrainingError("minibootstrap_train: class " + std::to_string(c) +
                          " has no positive examples");
    }
  }
  if (data.negatives.empty()) {
    throw TrainingError("minibootstrap_train: empty negatives pool");
  }

  // One sigma for the whole model, from a pooled subsample (median heuristic).
  double sigma = params.sigma;
  if (sigma <= 0.0) {
    std::vector<const Eigen::VectorXd*> pooled;
    for (const auto& cls : data.positives) {
      for (const auto& v : cls) pooled.push_back(&v);
    }
    for (const auto& v : data.negatives) pooled.push_back(&v);
    Eigen::MatrixXd all(static_cast<Eigen::Index>(pooled.size()), params.feature_dim);
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      all.row(static_cast<Eigen::Index>(i)) = *pooled[i];
    }
    std::mt19937_64 rng = make_rng(rng_seed, {detail::kSeedSigma});
    sigma = detail::median_heuristic_sigma(all, rng);
  }

  const MinibootstrapParams& mb = params.bootstrap;
  const std::size_t pool_size = data.negatives.size();
  const std::size_t chunk_count = std::min<std::size_t>(
      static_cast<std::size_t>(mb.n_batches),
      (pool_size + static_cast<std::size_t>(mb.batch_size) - 1) /
          static_cast<std::size_t>(mb.batch_size));

  DetectorModel model;
  model.params = params;
  model.params.sigma = sigma;
  model.classifiers.resize(static_cast<std::size_t>(params.num_classes));
  if (stats != nullptr) {
    stats->retained_negatives.assign(static_cast<std::size_t>(params.num_classes), 0);
    stats->fits_performed.assign(static_cast<std::size_t>(params.num_classes), 0);
    stats->sigma = sigma;
  }

  for (int c = 0; c < params.num_classes; ++c) {
    const auto& pos = data.positives[static_cast<std::size_t>(c)];

    std::vector<std::size_t> order(pool_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng =
        make_rng(rng_seed, {detail::kSeedShuffle, static_cast<std::uint64_t>(c)});
    for (std::size_t i = 0; i + 1 < pool_size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool_size - 1);
      std::swap(order[i], order[pick(shuffle_rng)]);
    }

    int fits = 0;
    auto fit = [&](std::span<const std::pair<const Eigen::VectorXd*, double>> negs) {
      const Eigen::Index n = static_cast<Eigen::Index>(pos.size() + negs.size());
      Eigen::MatrixXd x = detail::stack_rows(pos, negs, params.feature_dim);
      Eigen::VectorXd y(n);
      y.head(static_cast<Eigen::Index>(pos.size())).setConstant(1.0);
      y.tail(static_cast<Eigen::Index>(negs.size())).setConstant(-1.0);
      const int m = std::min<int>(params.nystrom_centers, static_cast<int>(n));
      const std::uint64_t fit_seed = mix_seed(
          rng_seed, {detail::kSeedFit, static_cast<std::uint64_t>(c),
                     static_cast<std::uint64_t>(fits)});
      ++fits;
      return nystrom_fit(x, y, m, sigma, params.lambda, fit_seed);
    };

    // Retained hard negatives, each with the score it was retained at.
    std::vector<std::pair<const Eigen::VectorXd*, double>> retained;
    ClassClassifier clf;
    for (std::size_t chunk = 0; chunk < chunk_count; ++chunk) {
      const std::size_t begin = chunk * static_cast<std::size_t>(mb.batch_size);
      const std::size_t end =
          std::min(pool_size, begin + static_cast<std::size_t>(mb.batch_size));
      std::vector<std::pair<const Eigen::VectorXd*, double>> chunk_negs;
      chunk_negs.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        chunk_negs.emplace_back(&data.negatives[order[i]], 0.0);
      }
      if (chunk == 0) clf = fit(chunk_negs);

      Eigen::MatrixXd cx(static_cast<Eigen::Index>(chunk_negs.size()), params.feature_dim);
      for (std::size_t i = 0; i < chunk_negs.size(); ++i) {
        cx.row(static_cast<Eigen::Index>(i)) = *chunk_negs[i].first;
      }
      const Eigen::VectorXd scores = clf.score_batch(cx);
      for (std::size_t i = 0; i < chunk_negs.size(); ++i) {
        const double s = scores(static_cast<Eigen::Index>(i));
        if (s >= mb.hard_negative_score_min) {
          retained.emplace_back(chunk_negs[i].first, s);
        }
      }
      if (retained.size() > static_cast<std::size_t>(mb.max_negatives_kept)) {
        std::stable_sort(retained.begin(), retained.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        retained.resize(static_cast<std::size_t>(mb.max_negatives_kept));
      }
      // A refit with no negatives at all would collapse to an always-positive
      // classifier; keep the current one until some hard negative shows up.
      if (!retained.empty()) clf = fit(retained);
    }
    if (chunk_count == 0) {
      // Defensive; pool emptiness is rejected above.
      throw TrainingError("minibootstrap_train: no negative chunks");
    }
    model.classifiers[static_cast<std::size_t>(c)] = std::move(clf);
    if (stats != nullptr) {
      stats->retained_negatives[static_cast<std::size_t>(c)] = static_cast<int>(retained.size());
      stats->fits_performed[static_cast<std::size_t>(c)] = fits;
    }
  }

  if (!data.refiner_pairs.empty()) {
    model.refiner = rls_fit_refiner(data.refiner_pairs, params.refiner_ridge);
  }
  return model;
}

/// Run the model on one frame: per-region class margins, argmax class,
/// sigmoid confidence, confidence thresholding, box refinement, per-class NMS.
/// Result is sorted by descending confidence.
inline std::vector<Detection> detect(const DetectorModel& model, const Frame& frame) {
  if (frame.regions.empty()) return {};
  const int d = model.params.feature_dim;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(frame.regions.size()), d);
  for (std::size_t i = 0; i < frame.regions.size(); ++i) {
    if (frame.regions[i].vector.size() != d) {
      throw InvalidInput("detect: feature dimension mismatch");
    }
    x.row(static_cast<Eigen::Index>(i)) = frame.regions[i].vector;
  }

  const int n_classes = model.num_classes();
  Eigen::MatrixXd margins(x.rows(), n_classes);
  for (int c = 0; c < n_classes; ++c) {
    margins.col(c) = model.classifiers[static_cast<std::size_t>(c)].score_batch(x);
  }

  std::vector<Detection> raw;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    int best_class = 0;
    double best_margin = margins(i, 0);
    for (int c = 1; c < n_classes; ++c) {
      if (margins(i, c) > best_margin) {
        best_margin = margins(i, c);
        best_class = c;
      }
    }
    const double conf =
        confidence_from_margin(best_margin, model.params.confidence_temperature);
    if (conf < model.params.confidence_threshold) continue;
    const RegionFeature& region = frame.regions[static_cast<std::size_t>(i)];
    Detection det;
    det.box = model.refiner.refine(region.source_box, region.vector);
    det.class_id = best_class;
    det.confidence = conf;
    det.margin = best_margin;
    det.frame_id = frame.id;
    det.region_index = static_cast<int>(i);
    raw.push_back(det);
  }
  return nms(raw, model.params.nms_threshold);
}

}  // namespace wsod
