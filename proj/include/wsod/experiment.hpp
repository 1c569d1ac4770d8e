#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wsod/csv.hpp"
#include "wsod/errors.hpp"
#include "wsod/harness.hpp"
#include "wsod/model_io.hpp"
#include "wsod/pipeline.hpp"
#include "wsod/random.hpp"

namespace wsod {

inline constexpr int kConfigSchemaVersion = 1;

/// Declarative description of one experiment family: the world, the detector
/// recipe, policy thresholds, the budget grid, and the trial/seed plan.
struct ExperimentConfig {
  WorldConfig world;
  DetectorParams detector;
  AlPolicyConfig al;
  SsConfig ss;
  std::vector<std::string> policies = {"uniform_pool", "kmeans_pool", "coin_flip",
                                       "fixed_window", "adaptive_window"};
  std::vector<int> budgets = {10, 25, 50, 100};
  int n_trials = 3;
  int civ_stitches = 3;
  std::uint64_t master_seed = 0;
  double small_shift_source_fraction = 0.15;
  int workers = 1;
  bool write_decision_logs = false;
  std::string output_dir = "out";

  void validate() const {
    world.validate();
    al.validate();
    ss.validate();
    if (n_trials < 1) throw InvalidConfig("experiment: n_trials must be >= 1");
    if (civ_stitches < 1) throw InvalidConfig("experiment: civ_stitches must be >= 1");
    if (budgets.empty()) throw InvalidConfig("experiment: budget list must be nonempty");
    for (int k : budgets) {
      if (k < 0 || k > world.n_stream) {
        throw InvalidConfig("experiment: budgets must lie in [0, n_stream]");
      }
    }
    if (policies.empty()) throw InvalidConfig("experiment: policy list must be nonempty");
    for (const std::string& p : policies) al_variant_from_name(p);
    if (!(small_shift_source_fraction > 0.0 && small_shift_source_fraction <= 1.0)) {
      throw InvalidConfig("experiment: small_shift_source_fraction must be in (0,1]");
    }
    if (workers < 1) throw InvalidConfig("experiment: workers must be >= 1");
  }
};

namespace detail {

enum : std::uint64_t {
  kSeedWorld = 0xe1,
  kSeedTrain = 0xe2,
  kSeedPhase = 0xe3,
  kSeedShiftPhase = 0xe4,
  kSeedSubsample = 0xe5,
};

template <typename T>
T json_value(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

}  // namespace detail

inline WorldConfig world_from_config(const nlohmann::json& j, WorldConfig base = {}) {
  base.num_classes = detail::json_value(j, "num_classes", base.num_classes);
  base.feature_dim = detail::json_value(j, "feature_dim", base.feature_dim);
  base.n_labeled = detail::json_value(j, "n_labeled", base.n_labeled);
  base.n_stream = detail::json_value(j, "n_stream", base.n_stream);
  base.n_test = detail::json_value(j, "n_test", base.n_test);
  base.class_spacing = detail::json_value(j, "class_spacing", base.class_spacing);
  base.noise_scale = detail::json_value(j, "noise_scale", base.noise_scale);
  base.shift_magnitude = detail::json_value(j, "shift_magnitude", base.shift_magnitude);
  base.scene_width = detail::json_value(j, "scene_width", base.scene_width);
  base.scene_height = detail::json_value(j, "scene_height", base.scene_height);
  base.min_objects = detail::json_value(j, "min_objects", base.min_objects);
  base.max_objects = detail::json_value(j, "max_objects", base.max_objects);
  base.background_proposals =
      detail::json_value(j, "background_proposals", base.background_proposals);
  base.redundancy_run_length =
      detail::json_value(j, "redundancy_run_length", base.redundancy_run_length);
  base.min_box_size = detail::json_value(j, "min_box_size", base.min_box_size);
  base.max_box_size = detail::json_value(j, "max_box_size", base.max_box_size);
  base.seed = detail::json_value(j, "seed", base.seed);
  return base;
}

inline DetectorParams detector_from_config(const nlohmann::json& j, DetectorParams base = {}) {
  base.lambda = detail::json_value(j, "lambda", base.lambda);
  base.sigma = detail::json_value(j, "sigma", base.sigma);
  base.nystrom_centers = detail::json_value(j, "nystrom_centers", base.nystrom_centers);
  base.bootstrap.n_batches = detail::json_value(j, "n_batches", base.bootstrap.n_batches);
  base.bootstrap.batch_size = detail::json_value(j, "batch_size", base.bootstrap.batch_size);
  base.bootstrap.hard_negative_score_min = detail::json_value(
      j, "hard_negative_score_min", base.bootstrap.hard_negative_score_min);
  base.bootstrap.max_negatives_kept =
      detail::json_value(j, "max_negatives_kept", base.bootstrap.max_negatives_kept);
  base.refiner_ridge = detail::json_value(j, "refiner_ridge", base.refiner_ridge);
  base.refiner_iou_min = detail::json_value(j, "refiner_iou_min", base.refiner_iou_min);
  base.positive_iou_min = detail::json_value(j, "positive_iou_min", base.positive_iou_min);
  base.background_iou_max =
      detail::json_value(j, "background_iou_max", base.background_iou_max);
  base.confidence_threshold =
      detail::json_value(j, "confidence_threshold", base.confidence_threshold);
  base.nms_threshold = detail::json_value(j, "nms_threshold", base.nms_threshold);
  base.confidence_temperature =
      detail::json_value(j, "confidence_temperature", base.confidence_temperature);
  return base;
}

inline AlPolicyConfig al_from_config(const nlohmann::json& j, AlPolicyConfig base = {}) {
  if (j.contains("variant")) base.variant = al_variant_from_name(j.at("variant").get<std::string>());
  base.tau = detail::json_value(j, "tau", base.tau);
  base.delta_fixed = detail::json_value(j, "delta_fixed", base.delta_fixed);
  base.alpha = detail::json_value(j, "alpha", base.alpha);
  base.coin_prob = detail::json_value(j, "coin_prob", base.coin_prob);
  return base;
}

inline SsConfig ss_from_config(const nlohmann::json& j, SsConfig base = {}) {
  if (j.contains("variant")) base.variant = ss_variant_from_name(j.at("variant").get<std::string>());
  base.tau_ss = detail::json_value(j, "tau_ss", base.tau_ss);
  base.confidence_min = detail::json_value(j, "confidence_min", base.confidence_min);
  base.negative_iou_max = detail::json_value(j, "negative_iou_max", base.negative_iou_max);
  return base;
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  if (j.contains("schema_version") && j.at("schema_version").get<int>() != kConfigSchemaVersion) {
    throw InvalidConfig("experiment config: unsupported schema_version");
  }
  ExperimentConfig cfg;
  if (j.contains("world")) cfg.world = world_from_config(j.at("world"), cfg.world);
  if (j.contains("detector")) cfg.detector = detector_from_config(j.at("detector"), cfg.detector);
  if (j.contains("al")) cfg.al = al_from_config(j.at("al"), cfg.al);
  if (j.contains("ss")) cfg.ss = ss_from_config(j.at("ss"), cfg.ss);
  cfg.policies = detail::json_value(j, "policies", cfg.policies);
  cfg.budgets = detail::json_value(j, "budgets", cfg.budgets);
  cfg.n_trials = detail::json_value(j, "n_trials", cfg.n_trials);
  cfg.civ_stitches = detail::json_value(j, "civ_stitches", cfg.civ_stitches);
  cfg.master_seed = detail::json_value(j, "master_seed", cfg.master_seed);
  cfg.small_shift_source_fraction = detail::json_value(j, "small_shift_source_fraction",
                                                       cfg.small_shift_source_fraction);
  cfg.workers = detail::json_value(j, "workers", cfg.workers);
  cfg.write_decision_logs =
      detail::json_value(j, "write_decision_logs", cfg.write_decision_logs);
  cfg.output_dir = detail::json_value(j, "output_dir", cfg.output_dir);
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config: invalid json in " + path + ": " + e.what());
  }
  return experiment_from_json(j);
}

/// One experiment cell: a (policy, budget, trial) combination, plus the shift
/// level for shift-study rows. Failed cells keep their error text and are
/// excluded from files and aggregates.
struct TrialResult {
  std::string shift_level;
  std::string policy;
  int budget = 0;
  int trial = 0;
  double map = 0.0;
  double ss_fraction = 0.0;
  int queries_used = 0;
  double seed_seconds = 0.0;
  double phase_seconds = 0.0;
  bool ok = true;
  std::string error;
};

struct AggregateResult {
  std::string shift_level;
  std::string policy;
  int budget = 0;
  int n = 0;
  double mean_map = 0.0;
  double std_map = 0.0;
  double mean_ss_fraction = 0.0;
  double mean_queries = 0.0;
};

/// Group successful rows by (shift_level, policy, budget) in first-appearance
/// order; standard deviation is the sample estimate (0 for a single trial).
inline std::vector<AggregateResult> aggregate_results(std::span<const TrialResult> rows) {
  std::vector<AggregateResult> out;
  std::vector<std::vector<double>> maps;
  auto slot = [&](const TrialResult& r) -> std::size_t {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].shift_level == r.shift_level && out[i].policy == r.policy &&
          out[i].budget == r.budget) {
        return i;
      }
    }
    AggregateResult agg;
    agg.shift_level = r.shift_level;
    agg.policy = r.policy;
    agg.budget = r.budget;
    out.push_back(std::move(agg));
    maps.emplace_back();
    return out.size() - 1;
  };
  for (const TrialResult& r : rows) {
    if (!r.ok) continue;
    const std::size_t i = slot(r);
    out[i].n += 1;
    maps[i].push_back(r.map);
    out[i].mean_ss_fraction += r.ss_fraction;
    out[i].mean_queries += static_cast<double>(r.queries_used);
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    AggregateResult& agg = out[i];
    const double n = static_cast<double>(agg.n);
    agg.mean_map = std::accumulate(maps[i].begin(), maps[i].end(), 0.0) / n;
    double ss = 0.0;
    for (double m : maps[i]) ss += (m - agg.mean_map) * (m - agg.mean_map);
    agg.std_map = agg.n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    agg.mean_ss_fraction /= n;
    agg.mean_queries /= n;
  }
  return out;
}

namespace detail {

/// Run independent jobs on a small worker pool. Jobs must not touch shared
/// mutable state; each writes only its own result slot.
inline void run_jobs(std::vector<std::function<void()>>& jobs, int workers) {
  if (workers <= 1 || jobs.size() <= 1) {
    for (auto& job : jobs) job();
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      jobs[i]();
    }
  };
  std::vector<std::thread> pool;
  const int n = std::min<int>(workers, static_cast<int>(jobs.size()));
  pool.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
}

inline DetectorParams trial_params(const ExperimentConfig& cfg, int trial) {
  DetectorParams params = cfg.detector;
  params.num_classes = cfg.world.num_classes;
  params.feature_dim = cfg.world.feature_dim;
  params.train_seed = mix_seed(cfg.master_seed, {kSeedTrain, static_cast<std::uint64_t>(trial)});
  return params;
}

}  // namespace detail

/// Deterministic subsample of a labeled set that keeps every class
/// represented: a seeded shuffle picks ceil(fraction * n) frames, then frames
/// containing any missing class are swapped in from the remainder.
inline LabeledSet subsample_labeled(const LabeledSet& input, double fraction, int num_classes,
                                    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw InvalidConfig("subsample: fraction must be in (0,1]");
  }
  const std::size_t n = input.frames.size();
  if (n == 0) throw InvalidInput("subsample: empty labeled set");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng = make_rng(seed, {detail::kSeedSubsample});
  for (std::size_t i = 0; i + 1 < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::size_t take = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n)));
  take = std::clamp<std::size_t>(take, 1, n);

  std::vector<char> covered(static_cast<std::size_t>(num_classes), 0);
  auto cover = [&](const Frame& f) {
    for (const Annotation& a : f.gt) {
      if (a.class_id >= 0 && a.class_id < num_classes) {
        covered[static_cast<std::size_t>(a.class_id)] = 1;
      }
    }
  };
  LabeledSet out;
  for (std::size_t i = 0; i < take; ++i) {
    out.frames.push_back(input.frames[order[i]]);
    cover(out.frames.back());
  }
  for (std::size_t i = take; i < n; ++i) {
    const bool all = std::all_of(covered.begin(), covered.end(), [](char c) { return c != 0; });
    if (all) break;
    const Frame& f = input.frames[order[i]];
    const bool helps = std::any_of(f.gt.begin(), f.gt.end(), [&](const Annotation& a) {
      return a.class_id >= 0 && a.class_id < num_classes &&
             !covered[static_cast<std::size_t>(a.class_id)];
    });
    if (helps) {
      out.frames.push_back(f);
      cover(out.frames.back());
    }
  }
  return out;
}

struct ExperimentOutput {
  std::vector<TrialResult> rows;
  std::vector<AggregateResult> aggregate;
  int failed_cells = 0;
};

/// The budget-sweep experiment: per trial, one shared world and one seed
/// model; every (policy, budget) cell refines that same seed on a fresh copy
/// of the same stream (paired curves), with self-training off. A "seed" row at
/// budget 0 anchors each trial.
inline ExperimentOutput run_budget_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentOutput out;
  for (int trial = 0; trial < cfg.n_trials; ++trial) {
    WorldConfig wcfg = cfg.world;
    wcfg.seed = mix_seed(cfg.master_seed, {detail::kSeedWorld, static_cast<std::uint64_t>(trial)});
    const World world = generate_world(wcfg);
    const DetectorParams params = detail::trial_params(cfg, trial);
    const TableOracle oracle = TableOracle::from_frames(world.target.frames());

    TrialResult seed_row;
    seed_row.policy = "seed";
    seed_row.trial = trial;
    SeedResult seed;
    try {
      seed = supervised_phase(world.source, params);
      seed_row.map = evaluate(seed.model, world.target_test).map;
      seed_row.seed_seconds = seed.seconds;
    } catch (const std::exception& e) {
      seed_row.ok = false;
      seed_row.error = e.what();
      std::cerr << "[sweep] trial " << trial << " seed phase failed: " << e.what() << '\n';
      ++out.failed_cells;
      out.rows.push_back(std::move(seed_row));
      continue;
    }
    out.rows.push_back(std::move(seed_row));

    std::vector<TrialResult> cells;
    std::vector<std::function<void()>> jobs;
    for (int k : cfg.budgets) {
      for (const std::string& policy : cfg.policies) {
        TrialResult row;
        row.policy = policy;
        row.budget = k;
        row.trial = trial;
        row.seed_seconds = seed.seconds;
        cells.push_back(std::move(row));
      }
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      jobs.push_back([&, i] {
        TrialResult& row = cells[i];
        try {
          PhaseSetup setup;
          setup.al = cfg.al;
          setup.al.variant = al_variant_from_name(row.policy);
          setup.k_total = row.budget;
          setup.retrain = params;
          setup.civ_stitches = cfg.civ_stitches;
          setup.phase_seed = mix_seed(
              cfg.master_seed, {detail::kSeedPhase, static_cast<std::uint64_t>(row.trial),
                                static_cast<std::uint64_t>(row.budget)});
          UnlabeledStream stream = world.target;
          const PhaseResult res =
              weakly_supervised_phase(seed.model, world.source, stream, oracle, setup);
          row.map = evaluate(res.model, world.target_test).map;
          row.queries_used = res.report.queries_used;
          row.ss_fraction = res.report.ss_fraction;
          row.phase_seconds = res.report.seconds;
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
      });
    }
    detail::run_jobs(jobs, cfg.workers);
    for (TrialResult& row : cells) {
      if (!row.ok) {
        std::cerr << "[sweep] cell policy=" << row.policy << " k=" << row.budget << " trial="
                  << row.trial << " failed: " << row.error << '\n';
        ++out.failed_cells;
      }
      out.rows.push_back(std::move(row));
    }
  }
  out.aggregate = aggregate_results(out.rows);
  return out;
}

/// The shift-study experiment: for each trial, a large-shift world (as
/// configured) and a small-shift twin (shift 0, seed trained on a subsampled
/// source so improvement has headroom); per world, a seed row plus one row per
/// self-training policy, all with the annotation budget at 0.
inline ExperimentOutput run_shift_study(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentOutput out;
  const std::vector<SsVariant> variants = {SsVariant::SsBaseline, SsVariant::SsPosOnly};
  for (int trial = 0; trial < cfg.n_trials; ++trial) {
    for (int level = 0; level < 2; ++level) {
      const bool large = level == 0;
      const std::string shift_name = large ? "large" : "small";
      WorldConfig wcfg = cfg.world;
      wcfg.seed =
          mix_seed(cfg.master_seed, {detail::kSeedWorld, static_cast<std::uint64_t>(trial)});
      if (!large) wcfg.shift_magnitude = 0.0;
      World world;
      LabeledSet source;
      DetectorParams params = detail::trial_params(cfg, trial);
      SeedResult seed;
      TrialResult seed_row;
      seed_row.shift_level = shift_name;
      seed_row.policy = "seed";
      seed_row.trial = trial;
      try {
        world = generate_world(wcfg);
        source = large ? world.source
                       : subsample_labeled(world.source, cfg.small_shift_source_fraction,
                                           cfg.world.num_classes, wcfg.seed);
        seed = supervised_phase(source, params);
        seed_row.map = evaluate(seed.model, world.target_test).map;
        seed_row.seed_seconds = seed.seconds;
      } catch (const std::exception& e) {
        seed_row.ok = false;
        seed_row.error = e.what();
        std::cerr << "[shift] trial " << trial << " " << shift_name
                  << " seed phase failed: " << e.what() << '\n';
        ++out.failed_cells;
        out.rows.push_back(std::move(seed_row));
        continue;
      }
      out.rows.push_back(std::move(seed_row));

      const TableOracle oracle = TableOracle::from_frames(world.target.frames());
      for (std::size_t v = 0; v < variants.size(); ++v) {
        TrialResult row;
        row.shift_level = shift_name;
        row.policy = ss_variant_name(variants[v]);
        row.trial = trial;
        row.seed_seconds = seed.seconds;
        try {
          PhaseSetup setup;
          setup.al = cfg.al;
          setup.al.variant = AlVariant::adaptive_window;
          setup.k_total = 0;
          setup.ss = cfg.ss;
          setup.ss->variant = variants[v];
          setup.retrain = params;
          setup.civ_stitches = cfg.civ_stitches;
          setup.phase_seed = mix_seed(
              cfg.master_seed, {detail::kSeedShiftPhase, static_cast<std::uint64_t>(trial),
                                static_cast<std::uint64_t>(level)});
          UnlabeledStream stream = world.target;
          const PhaseResult res =
              weakly_supervised_phase(seed.model, source, stream, oracle, setup);
          row.map = evaluate(res.model, world.target_test).map;
          row.ss_fraction = res.report.ss_fraction;
          row.queries_used = res.report.queries_used;
          row.phase_seconds = res.report.seconds;
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
          std::cerr << "[shift] cell policy=" << row.policy << " shift=" << shift_name
                    << " trial=" << trial << " failed: " << e.what() << '\n';
          ++out.failed_cells;
        }
        out.rows.push_back(std::move(row));
      }
    }
  }
  out.aggregate = aggregate_results(out.rows);
  return out;
}

inline void write_sweep_csvs(const std::string& dir, const ExperimentOutput& out) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter csv(dir + "/results_trials.csv");
    csv.row({"policy", "budget", "trial", "map", "queries_used", "ss_fraction"});
    for (const TrialResult& r : out.rows) {
      if (!r.ok) continue;
      csv.row({r.policy, std::to_string(r.budget), std::to_string(r.trial), format_double(r.map),
               std::to_string(r.queries_used), format_double(r.ss_fraction)});
    }
  }
  {
    CsvWriter csv(dir + "/results_aggregate.csv");
    csv.row({"policy", "budget", "n_trials", "mean_map", "std_map", "mean_queries",
             "mean_ss_fraction"});
    for (const AggregateResult& a : out.aggregate) {
      csv.row({a.policy, std::to_string(a.budget), std::to_string(a.n), format_double(a.mean_map),
               format_double(a.std_map), format_double(a.mean_queries),
               format_double(a.mean_ss_fraction)});
    }
  }
  {
    // Wall-clock times vary run to run, so they live apart from the
    // deterministic tables.
    CsvWriter csv(dir + "/timings.csv");
    csv.row({"policy", "budget", "trial", "seed_seconds", "phase_seconds"});
    for (const TrialResult& r : out.rows) {
      if (!r.ok) continue;
      csv.row({r.policy, std::to_string(r.budget), std::to_string(r.trial),
               format_double(r.seed_seconds), format_double(r.phase_seconds)});
    }
  }
}

inline void write_shift_csvs(const std::string& dir, const ExperimentOutput& out) {
  std::filesystem::create_directories(dir);
  {
    CsvWriter csv(dir + "/shift_trials.csv");
    csv.row({"shift", "policy", "trial", "map", "ss_fraction"});
    for (const TrialResult& r : out.rows) {
      if (!r.ok) continue;
      csv.row({r.shift_level, r.policy, std::to_string(r.trial), format_double(r.map),
               format_double(r.ss_fraction)});
    }
  }
  {
    CsvWriter csv(dir + "/shift_aggregate.csv");
    csv.row({"shift", "policy", "n_trials", "mean_map", "std_map", "mean_ss_fraction"});
    for (const AggregateResult& a : out.aggregate) {
      csv.row({a.shift_level, a.policy, std::to_string(a.n), format_double(a.mean_map),
               format_double(a.std_map), format_double(a.mean_ss_fraction)});
    }
  }
  {
    std::ofstream table(dir + "/shift_table.txt");
    if (!table) throw IoError("shift study: cannot open shift_table.txt");
    table << "policy";
    for (const char* shift : {"large", "small"}) table << '\t' << shift << " mAP";
    table << '\n';
    for (const char* policy : {"seed", "ss_baseline", "ss_pos_only"}) {
      table << policy;
      for (const char* shift : {"large", "small"}) {
        const AggregateResult* found = nullptr;
        for (const AggregateResult& a : out.aggregate) {
          if (a.policy == policy && a.shift_level == shift) {
            found = &a;
            break;
          }
        }
        if (found != nullptr) {
          char buf[64];
          std::snprintf(buf, sizeof(buf), "%.3f +- %.3f", found->mean_map, found->std_map);
          table << '\t' << buf;
        } else {
          table << '\t' << "n/a";
        }
      }
      table << '\n';
    }
  }
}

/// Per-policy plot-ready CSVs of (budget, mean mAP, stddev), sorted by budget.
/// Returns the written paths.
inline std::vector<std::string> emit_plots_data(std::span<const AggregateResult> aggregate,
                                                const std::string& dir) {
  if (aggregate.empty()) throw InvalidInput("emit_plots_data: no results");
  std::filesystem::create_directories(dir);
  std::vector<std::string> policies;
  for (const AggregateResult& a : aggregate) {
    if (std::find(policies.begin(), policies.end(), a.policy) == policies.end()) {
      policies.push_back(a.policy);
    }
  }
  std::vector<std::string> written;
  for (const std::string& policy : policies) {
    std::vector<const AggregateResult*> rows;
    for (const AggregateResult& a : aggregate) {
      if (a.policy == policy) rows.push_back(&a);
    }
    std::sort(rows.begin(), rows.end(),
              [](const AggregateResult* a, const AggregateResult* b) {
                return a->budget < b->budget;
              });
    const std::string path = dir + "/plot_" + policy + ".csv";
    CsvWriter csv(path);
    csv.row({"budget", "mean_map", "std_map"});
    for (const AggregateResult* a : rows) {
      csv.row({std::to_string(a->budget), format_double(a->mean_map), format_double(a->std_map)});
    }
    written.push_back(path);
  }
  return written;
}

/// Rebuild aggregate rows from a results_aggregate.csv written by
/// write_sweep_csvs (the `report` subcommand's input).
inline std::vector<AggregateResult> read_aggregate_csv(const std::string& path) {
  const std::vector<std::vector<std::string>> rows = read_csv(path);
  if (rows.size() < 2) throw IoError("aggregate csv: no data rows in " + path);
  const std::vector<std::string>& header = rows.front();
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw IoError("aggregate csv: missing column " + name);
  };
  const std::size_t c_policy = col("policy");
  const std::size_t c_budget = col("budget");
  const std::size_t c_n = col("n_trials");
  const std::size_t c_mean = col("mean_map");
  const std::size_t c_std = col("std_map");
  std::vector<AggregateResult> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    AggregateResult a;
    a.policy = r.at(c_policy);
    a.budget = std::stoi(r.at(c_budget));
    a.n = std::stoi(r.at(c_n));
    a.mean_map = std::stod(r.at(c_mean));
    a.std_map = std::stod(r.at(c_std));
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace wsod
