#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wsod/errors.hpp"
#include "wsod/random.hpp"
#include "wsod/scoring.hpp"

namespace wsod {

enum class AlVariant {
  uniform_pool,
  kmeans_pool,
  coin_flip,
  fixed_window,
  adaptive_window,
};

inline bool is_pool_variant(AlVariant v) {
  return v == AlVariant::uniform_pool || v == AlVariant::kmeans_pool;
}

inline std::string al_variant_name(AlVariant v) {
  switch (v) {
    case AlVariant::uniform_pool: return "uniform_pool";
    case AlVariant::kmeans_pool: return "kmeans_pool";
    case AlVariant::coin_flip: return "coin_flip";
    case AlVariant::fixed_window: return "fixed_window";
    case AlVariant::adaptive_window: return "adaptive_window";
  }
  throw InvalidInput("unknown AL variant");
}

inline AlVariant al_variant_from_name(const std::string& name) {
  if (name == "uniform_pool") return AlVariant::uniform_pool;
  if (name == "kmeans_pool") return AlVariant::kmeans_pool;
  if (name == "coin_flip") return AlVariant::coin_flip;
  if (name == "fixed_window") return AlVariant::fixed_window;
  if (name == "adaptive_window") return AlVariant::adaptive_window;
  throw InvalidConfig("unknown AL policy name: " + name);
}

/// Manual-annotation budget bookkeeping for one stream pass. n_u is the
/// stream length, known a priori. last_seen_index enforces stream order.
struct BudgetState {
  int k_total = 0;
  int k_used = 0;
  int n_u = 0;
  std::optional<int> last_selected_index;
  int last_seen_index = -1;

  bool exhausted() const { return k_used >= k_total; }
};

struct AlPolicyConfig {
  AlVariant variant = AlVariant::adaptive_window;
  double tau = 0.4;
  int delta_fixed = 6;
  double alpha = 0.5;
  double coin_prob = 0.5;

  void validate() const {
    if (delta_fixed < 0) throw InvalidConfig("al policy: delta_fixed must be >= 0");
    if (!(coin_prob > 0.0 && coin_prob <= 1.0)) {
      throw InvalidConfig("al policy: coin_prob must be in (0,1]");
    }
    if (alpha <= 0.0) throw InvalidConfig("al policy: alpha must be positive");
  }
};

/// Query-suppression window that scales with the stream: Delta = round of
/// n_u * alpha / k. For fixed k it grows linearly with the stream length, so a
/// full budget spreads over the whole exploration session.
inline int adaptive_window(int n_u, int k, double alpha) {
  if (n_u < 1) throw InvalidInput("adaptive_window: n_u must be >= 1");
  if (k < 1) throw InvalidInput("adaptive_window: k must be >= 1");
  if (!(alpha > 0.0 && alpha < static_cast<double>(k))) {
    throw InvalidConfig("adaptive_window: alpha must be in (0, k)");
  }
  const long delta = std::lround(static_cast<double>(n_u) * alpha / static_cast<double>(k));
  return static_cast<int>(std::max(0L, delta));
}

enum class StreamDecision { Query, Skip };

namespace detail {

/// The shared stream rule: budget first, then the uncertainty condition, then
/// the per-variant diversity gate. Decisions are irrevocable.
inline StreamDecision stream_decide_impl(bool uncertain, int index, BudgetState& state,
                                         const AlPolicyConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (is_pool_variant(cfg.variant)) {
    throw InvalidConfig("stream_decide: " + al_variant_name(cfg.variant) +
                        " is a pool policy");
  }
  if (index <= state.last_seen_index) {
    throw ContractViolation("stream_decide: stream indices must be strictly increasing");
  }
  state.last_seen_index = index;

  if (state.exhausted()) return StreamDecision::Skip;
  if (!uncertain) return StreamDecision::Skip;

  switch (cfg.variant) {
    case AlVariant::coin_flip: {
      std::bernoulli_distribution flip(cfg.coin_prob);
      if (!flip(rng)) return StreamDecision::Skip;
      break;
    }
    case AlVariant::fixed_window:
    case AlVariant::adaptive_window: {
      const int delta = cfg.variant == AlVariant::fixed_window
                            ? cfg.delta_fixed
                            : adaptive_window(state.n_u, state.k_total, cfg.alpha);
      if (state.last_selected_index && index - *state.last_selected_index <= delta) {
        return StreamDecision::Skip;
      }
      break;
    }
    default:
      break;
  }

  state.last_selected_index = index;
  ++state.k_used;
  return StreamDecision::Query;
}

}  // namespace detail

/// Consistency scores: low value means the model disagrees with itself, so
/// below-tau is uncertain.
inline StreamDecision stream_decide(const ConsistencyScore& score, int index, BudgetState& state,
                                    const AlPolicyConfig& cfg, std::mt19937_64& rng) {
  return detail::stream_decide_impl(score.value < cfg.tau, index, state, cfg, rng);
}

/// Uncertainty scores point the other way: above-tau is uncertain.
inline StreamDecision stream_decide(const UncertaintyScore& score, int index, BudgetState& state,
                                    const AlPolicyConfig& cfg, std::mt19937_64& rng) {
  return detail::stream_decide_impl(score.value > cfg.tau, index, state, cfg, rng);
}

/// Uniform sample without replacement of min(k, candidates) indices from the
/// below-threshold candidates. Returned sorted ascending.
inline std::vector<int> pool_select_uniform(std::span<const double> scores, double tau, int k,
                                            std::mt19937_64& rng) {
  if (k < 0) throw InvalidInput("pool_select_uniform: k must be >= 0");
  std::vector<int> candidates;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] < tau) candidates.push_back(static_cast<int>(i));
  }
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), candidates.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

namespace detail {

inline Eigen::Index nearest_row(const Eigen::MatrixXd& points, const Eigen::VectorXd& target,
                                std::span<const char> excluded) {
  Eigen::Index best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if (!excluded.empty() && excluded[static_cast<std::size_t>(i)]) continue;
    const double d = (points.row(i).transpose() - target).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Diversity selection: Lloyd's algorithm with kmeans++ seeding over the
/// candidate features, then per cluster the candidate nearest its centroid,
/// deduplicated greedily in cluster order (tie-break lowest index). Returns k
/// distinct indices, sorted ascending.
inline std::vector<int> pool_select_kmeans(std::span<const Eigen::VectorXd> features, int k,
                                           int max_iters, std::mt19937_64& rng) {
  const int n = static_cast<int>(features.size());
  if (k > n) throw InvalidInput("pool_select_kmeans: k exceeds the candidate count");
  if (k < 0) throw InvalidInput("pool_select_kmeans: k must be >= 0");
  if (k == 0) return {};
  if (max_iters < 1) throw InvalidConfig("pool_select_kmeans: max_iters must be >= 1");
  const Eigen::Index d = features.front().size();
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    if (features[static_cast<std::size_t>(i)].size() != d) {
      throw InvalidInput("pool_select_kmeans: inconsistent feature dims");
    }
    x.row(i) = features[static_cast<std::size_t>(i)];
  }

  // kmeans++ seeding; identical points give zero weights, then the lowest
  // unused index fills in.
  Eigen::MatrixXd centroids(k, d);
  std::vector<char> used(static_cast<std::size_t>(n), 0);
  {
    std::uniform_int_distribution<int> first(0, n - 1);
    const int f = first(rng);
    centroids.row(0) = x.row(f);
    used[static_cast<std::size_t>(f)] = 1;
  }
  Eigen::VectorXd d2 = (x.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    int chosen = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng);
      for (int i = 0; i < n; ++i) {
        target -= d2(i);
        if (target <= 0.0) {
          chosen = i;
          break;
        }
      }
      if (chosen < 0) chosen = n - 1;
    } else {
      for (int i = 0; i < n; ++i) {
        if (!used[static_cast<std::size_t>(i)]) {
          chosen = i;
          break;
        }
      }
      if (chosen < 0) chosen = 0;
    }
    centroids.row(c) = x.row(chosen);
    used[static_cast<std::size_t>(chosen)] = 1;
    d2 = d2.cwiseMin((x.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }

  std::vector<int> assignment(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x.row(i) - centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dd = (x.row(i) - centroids.row(c)).squaredNorm();
        if (dd < best_d) {
          best_d = dd;
          best = c;
        }
      }
      assignment[static_cast<std::size_t>(i)] = best;
    }
    Eigen::MatrixXd next = Eigen::MatrixXd::Zero(k, d);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      next.row(assignment[static_cast<std::size_t>(i)]) += x.row(i);
      ++counts[static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)])];
    }
    double movement = 0.0;
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] == 0) continue;  // empty cluster keeps its centroid
      next.row(c) /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      movement = std::max(movement, (next.row(c) - centroids.row(c)).norm());
      centroids.row(c) = next.row(c);
    }
    if (movement < 1e-6) break;
  }

  // One representative per cluster: the nearest candidate, skipping indices
  // already claimed by earlier clusters so the result has k distinct members.
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  std::vector<int> selected;
  selected.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const Eigen::Index pick = detail::nearest_row(x, centroids.row(c).transpose(), taken);
    if (pick < 0) throw ContractViolation("pool_select_kmeans: ran out of candidates");
    taken[static_cast<std::size_t>(pick)] = 1;
    selected.push_back(static_cast<int>(pick));
  }
  std::sort(selected.begin(), selected.end());
  return selected;
}

}  // namespace wsod
