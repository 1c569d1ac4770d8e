#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wsod/al_policies.hpp"
#include "wsod/csv.hpp"
#include "wsod/data.hpp"
#include "wsod/detector.hpp"
#include "wsod/errors.hpp"
#include "wsod/scoring.hpp"
#include "wsod/ssl_policies.hpp"
#include "wsod/voc_eval.hpp"

namespace wsod {

struct SeedResult {
  DetectorModel model;
  double seconds = 0.0;
};

/// Train the seed detector on the labeled set alone.
inline SeedResult supervised_phase(const LabeledSet& labeled, const DetectorParams& params) {
  const auto start = std::chrono::steady_clock::now();
  const TrainingData data = assemble_training_data(labeled.frames, params);
  SeedResult result;
  result.model = minibootstrap_train(data, params, params.train_seed);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

/// Everything one refinement pass needs besides the data: the query policy and
/// budget, the optional self-training policy, the retraining recipe, and the
/// seeds. retrain carries the same field meanings as for the seed phase;
/// passing the seed's own parameters with an unchanged train_seed makes a
/// no-op pass (k = 0, self-training off) reproduce the seed model bit for bit.
struct PhaseSetup {
  AlPolicyConfig al;
  int k_total = 0;
  std::optional<SsConfig> ss;
  DetectorParams retrain;
  int civ_stitches = 3;
  std::uint64_t phase_seed = 0;
};

struct DecisionRecord {
  int frame_id = -1;
  double score = 0.0;
  std::string decision;  // "query", "pseudo", or "skip"
  std::string policy;
};

struct PhaseReport {
  int n_stream = 0;
  int k_total = 0;
  int queries_used = 0;
  int n_pseudo_frames = 0;
  double ss_fraction = 0.0;
  std::optional<double> pseudo_precision;
  std::optional<double> pseudo_recall;
  int civ_placement_warnings = 0;
  double seconds = 0.0;
  std::vector<DecisionRecord> decisions;
};

struct PhaseResult {
  DetectorModel model;
  PhaseReport report;
  LabeledSet augmented;
};

namespace detail {

/// Seed tags for the phase's independent RNG streams.
enum : std::uint64_t { kSeedCoin = 0xb1, kSeedPool = 0xb2 };

/// Fold one pseudo-label into the training material: positives go in directly
/// (with a refiner pair when the source proposal overlaps the pseudo box
/// enough), asserted negatives join the background pool.
inline void apply_pseudo_label(TrainingData& data, const PseudoLabel& label,
                               const DetectorParams& params) {
  for (std::size_t i = 0; i < label.positive_annotations.size(); ++i) {
    const Annotation& ann = label.positive_annotations[i];
    const RegionFeature& region = label.positive_regions[i];
    if (ann.class_id < 0 || ann.class_id >= params.num_classes) {
      throw InvalidInput("pseudo label: class id out of range");
    }
    data.positives[static_cast<std::size_t>(ann.class_id)].push_back(region.vector);
    if (iou(region.source_box, ann.box) >= params.refiner_iou_min) {
      data.refiner_pairs.push_back({region.vector, region.source_box, ann.box});
    }
  }
  for (const RegionFeature& region : label.negative_regions) {
    data.negatives.push_back(region.vector);
  }
}

/// Pseudo-positive quality against the stream's hidden ground truth. Purely
/// diagnostic; meaningless (and absent) when the stream carries no GT.
inline void pseudo_quality(const std::vector<const Frame*>& pseudo_frames,
                           const std::vector<PseudoLabel>& labels, PhaseReport& report) {
  int correct = 0;
  int total_pos = 0;
  int gt_total = 0;
  int gt_matched = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Frame& frame = *pseudo_frames[i];
    gt_total += static_cast<int>(frame.gt.size());
    std::vector<char> taken(frame.gt.size(), 0);
    for (const Annotation& ann : labels[i].positive_annotations) {
      ++total_pos;
      int best = -1;
      double best_iou = 0.5;
      for (std::size_t g = 0; g < frame.gt.size(); ++g) {
        if (taken[g] || frame.gt[g].class_id != ann.class_id) continue;
        const double ov = iou(ann.box, frame.gt[g].box);
        if (ov >= best_iou) {
          best_iou = ov;
          best = static_cast<int>(g);
        }
      }
      if (best >= 0) {
        taken[static_cast<std::size_t>(best)] = 1;
        ++correct;
        ++gt_matched;
      }
    }
  }
  if (total_pos > 0) {
    report.pseudo_precision = static_cast<double>(correct) / static_cast<double>(total_pos);
  }
  if (gt_total > 0) {
    report.pseudo_recall = static_cast<double>(gt_matched) / static_cast<double>(gt_total);
  }
}

struct FrameVerdict {
  const Frame* frame = nullptr;
  double civ_value = 0.0;
  std::vector<Detection> dets;
  ConsistencyScore civ;
};

}  // namespace detail

/// One single-pass refinement over the unlabeled stream: detect with the seed
/// model, score consistency against the labeled pool, let the query policy
/// spend its budget (stream policies decide frame by frame; pool policies
/// score the whole stream first and select once at the end), send queries to
/// the oracle, offer every non-queried frame to the self-training policy, and
/// retrain once on the augmented set. A frame never contributes both an oracle
/// answer and a pseudo-label.
inline PhaseResult weakly_supervised_phase(const DetectorModel& seed, const LabeledSet& labeled,
                                           UnlabeledStream& stream, const LabelOracle& oracle,
                                           const PhaseSetup& setup) {
  if (setup.k_total < 0) throw InvalidConfig("phase: k_total must be >= 0");
  setup.al.validate();
  if (setup.ss) setup.ss->validate();
  if (labeled.frames.empty()) throw InvalidInput("phase: empty labeled set");
  const auto start = std::chrono::steady_clock::now();

  PhaseResult out;
  out.augmented.frames = labeled.frames;
  PhaseReport& report = out.report;
  report.k_total = setup.k_total;
  const std::string policy = al_variant_name(setup.al.variant);

  UnlabeledStream::Cursor cursor = stream.consume();
  const int n_stream = static_cast<int>(stream.size());
  report.n_stream = n_stream;

  std::vector<PseudoLabel> pseudo_labels;
  std::vector<const Frame*> pseudo_frames;

  auto record = [&](const Frame& frame, double score, const char* decision) {
    report.decisions.push_back(DecisionRecord{frame.id, score, decision, policy});
  };
  auto query_frame = [&](const Frame& frame) {
    Frame answered = frame;
    answered.gt = oracle.answer(frame.id);
    out.augmented.frames.push_back(std::move(answered));
    ++report.queries_used;
  };
  auto try_pseudo = [&](const Frame& frame, const std::vector<Detection>& dets,
                        const ConsistencyScore& civ) {
    if (!setup.ss) return false;
    std::optional<PseudoLabel> label = ss_decide(frame, dets, civ, *setup.ss);
    if (!label) return false;
    pseudo_frames.push_back(&frame);
    pseudo_labels.push_back(std::move(*label));
    ++report.n_pseudo_frames;
    return true;
  };

  if (is_pool_variant(setup.al.variant)) {
    // Pool baselines: score everything in the one allowed pass, then select.
    std::vector<detail::FrameVerdict> sweep;
    sweep.reserve(static_cast<std::size_t>(n_stream));
    while (const Frame* frame = cursor.next()) {
      detail::FrameVerdict v;
      v.frame = frame;
      v.dets = detect(seed, *frame);
      v.civ = civ_score(*frame, v.dets, labeled.frames, seed, setup.civ_stitches,
                        setup.phase_seed);
      v.civ_value = v.civ.value;
      report.civ_placement_warnings += v.civ.placement_failures;
      sweep.push_back(std::move(v));
    }

    std::mt19937_64 pool_rng = make_rng(setup.phase_seed, {detail::kSeedPool});
    std::vector<int> candidates;
    for (std::size_t i = 0; i < sweep.size(); ++i) {
      if (sweep[i].civ_value < setup.al.tau) candidates.push_back(static_cast<int>(i));
    }
    std::vector<int> selected_candidates;
    if (setup.al.variant == AlVariant::uniform_pool) {
      std::vector<double> scores;
      scores.reserve(candidates.size());
      for (int i : candidates) scores.push_back(sweep[static_cast<std::size_t>(i)].civ_value);
      // Candidates are already below tau; any threshold above their range keeps
      // them all, so selection reduces to a uniform draw of k.
      selected_candidates =
          pool_select_uniform(scores, setup.al.tau + 1.0, setup.k_total, pool_rng);
    } else {
      std::vector<Eigen::VectorXd> features;
      features.reserve(candidates.size());
      for (int i : candidates) {
        features.push_back(frame_mean_feature(*sweep[static_cast<std::size_t>(i)].frame,
                                              seed.params.feature_dim));
      }
      const int k = std::min<int>(setup.k_total, static_cast<int>(candidates.size()));
      selected_candidates = pool_select_kmeans(features, k, 100, pool_rng);
    }
    std::vector<char> chosen(sweep.size(), 0);
    for (int c : selected_candidates) {
      chosen[static_cast<std::size_t>(candidates[static_cast<std::size_t>(c)])] = 1;
    }

    for (std::size_t i = 0; i < sweep.size(); ++i) {
      const detail::FrameVerdict& v = sweep[i];
      if (chosen[i]) {
        query_frame(*v.frame);
        record(*v.frame, v.civ_value, "query");
      } else if (try_pseudo(*v.frame, v.dets, v.civ)) {
        record(*v.frame, v.civ_value, "pseudo");
      } else {
        record(*v.frame, v.civ_value, "skip");
      }
    }
  } else {
    BudgetState state;
    state.k_total = setup.k_total;
    state.n_u = n_stream;
    int index = 0;
    while (const Frame* frame = cursor.next()) {
      const std::vector<Detection> dets = detect(seed, *frame);
      const ConsistencyScore civ = civ_score(*frame, dets, labeled.frames, seed,
                                             setup.civ_stitches, setup.phase_seed);
      report.civ_placement_warnings += civ.placement_failures;
      std::mt19937_64 coin_rng = make_rng(
          setup.phase_seed, {detail::kSeedCoin, static_cast<std::uint64_t>(frame->id)});
      const StreamDecision decision = stream_decide(civ, index, state, setup.al, coin_rng);
      if (decision == StreamDecision::Query) {
        query_frame(*frame);
        record(*frame, civ.value, "query");
      } else if (try_pseudo(*frame, dets, civ)) {
        record(*frame, civ.value, "pseudo");
      } else {
        record(*frame, civ.value, "skip");
      }
      ++index;
    }
  }

  if (report.queries_used > setup.k_total) {
    throw ContractViolation("phase: annotation budget exceeded");
  }
  report.ss_fraction =
      n_stream > 0 ? ss_fraction(report.n_pseudo_frames, n_stream) : 0.0;
  detail::pseudo_quality(pseudo_frames, pseudo_labels, report);

  TrainingData data = assemble_training_data(out.augmented.frames, setup.retrain);
  for (const PseudoLabel& label : pseudo_labels) {
    detail::apply_pseudo_label(data, label, setup.retrain);
  }
  out.model = minibootstrap_train(data, setup.retrain, setup.retrain.train_seed);

  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

struct EvalResult {
  std::vector<std::optional<double>> per_class_ap;
  double map = 0.0;
  int n_classes_evaluated = 0;
};

/// mAP at IoU 0.5 of the model's detections over an annotated set.
inline EvalResult evaluate(const DetectorModel& model, const LabeledSet& test) {
  std::vector<Detection> dets;
  std::vector<GroundTruth> gts;
  for (const Frame& frame : test.frames) {
    std::vector<Detection> frame_dets = detect(model, frame);
    dets.insert(dets.end(), frame_dets.begin(), frame_dets.end());
    for (const Annotation& ann : frame.gt) gts.push_back(GroundTruth{frame.id, ann});
  }
  EvalResult result;
  result.per_class_ap = per_class_ap(dets, gts, model.params.num_classes, 0.5);
  std::vector<double> present;
  for (const auto& ap : result.per_class_ap) {
    if (ap) present.push_back(*ap);
  }
  result.n_classes_evaluated = static_cast<int>(present.size());
  result.map = present.empty() ? 0.0 : map_score(present);
  return result;
}

inline void to_json(nlohmann::json& j, const DecisionRecord& r) {
  j = nlohmann::json{
      {"frame_id", r.frame_id}, {"score", r.score}, {"decision", r.decision}, {"policy", r.policy}};
}

inline void to_json(nlohmann::json& j, const PhaseReport& r) {
  j = nlohmann::json{{"n_stream", r.n_stream},
                     {"k_total", r.k_total},
                     {"queries_used", r.queries_used},
                     {"n_pseudo_frames", r.n_pseudo_frames},
                     {"ss_fraction", r.ss_fraction},
                     {"civ_placement_warnings", r.civ_placement_warnings},
                     {"seconds", r.seconds},
                     {"decisions", r.decisions}};
  j["pseudo_precision"] = r.pseudo_precision ? nlohmann::json(*r.pseudo_precision)
                                             : nlohmann::json(nullptr);
  j["pseudo_recall"] =
      r.pseudo_recall ? nlohmann::json(*r.pseudo_recall) : nlohmann::json(nullptr);
}

/// Per-frame audit trail of the pass, one row per stream frame.
inline void write_decision_log(const std::string& path, const PhaseReport& report) {
  CsvWriter csv(path);
  csv.row({"frame_id", "score", "decision", "policy"});
  for (const DecisionRecord& r : report.decisions) {
    csv.row({std::to_string(r.frame_id), format_double(r.score), r.decision, r.policy});
  }
}

}  // namespace wsod
