#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>
#include <vector>

#include "wsod/data.hpp"
#include "wsod/errors.hpp"
#include "wsod/geometry.hpp"
#include "wsod/random.hpp"

namespace wsod {

/// Synthetic detection world: class-conditional Gaussian features in d
/// dimensions, rectangular scenes with jittered proposals, temporal redundancy
/// runs in the target stream, and a parametric shift of all class (and
/// background) distributions between the source and target domains.
struct WorldConfig {
  int num_classes = 5;
  int feature_dim = 16;
  int n_labeled = 500;
  int n_stream = 1000;
  int n_test = 300;
  double class_spacing = 2.0;
  double noise_scale = 0.3;
  double shift_magnitude = 1.2;
  double scene_width = 100.0;
  double scene_height = 100.0;
  int min_objects = 1;
  int max_objects = 3;
  int background_proposals = 10;
  int redundancy_run_length = 10;
  double min_box_size = 8.0;
  double max_box_size = 24.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_classes < 1) throw InvalidConfig("world: num_classes must be >= 1");
    if (feature_dim < num_classes + 1) {
      throw InvalidConfig("world: feature_dim must be >= num_classes + 1");
    }
    if (n_labeled < 1 || n_stream < 1 || n_test < 1) {
      throw InvalidConfig("world: all set sizes must be >= 1");
    }
    if (noise_scale <= 0.0) throw InvalidConfig("world: noise_scale must be positive");
    if (shift_magnitude < 0.0) throw InvalidConfig("world: shift_magnitude must be >= 0");
    if (min_objects < 1 || max_objects < min_objects) {
      throw InvalidConfig("world: objects-per-frame range is invalid");
    }
    if (background_proposals < 0) {
      throw InvalidConfig("world: background_proposals must be >= 0");
    }
    if (redundancy_run_length < 1) {
      throw InvalidConfig("world: redundancy_run_length must be >= 1");
    }
    if (!(min_box_size > 0.0 && max_box_size >= min_box_size)) {
      throw InvalidConfig("world: box size range is invalid");
    }
    if (max_box_size > scene_width || max_box_size > scene_height) {
      throw InvalidConfig("world: boxes do not fit in the scene");
    }
    // Distinct basis-vector means sit class_spacing * sqrt(2) apart; demand
    // clear separation relative to the noise so learnability is by
    // construction, not by luck.
    if (class_spacing * std::numbers::sqrt2 <= 4.0 * noise_scale) {
      throw InvalidConfig("world: class means closer than 4x noise_scale");
    }
  }
};

struct World {
  WorldConfig config;
  LabeledSet source;
  UnlabeledStream target;
  LabeledSet target_test;
};

namespace detail {

enum : std::uint64_t {
  kSeedShiftDir = 0xd1,
  kSeedBase = 0xd2,
  kSeedFrame = 0xd3,
};

enum class Domain : std::uint64_t { source = 0, target = 1 };

struct WorldGeometry {
  std::vector<Eigen::VectorXd> class_means;  // per class, then background last
  std::vector<Eigen::VectorXd> shift_dirs;   // unit displacement directions
};

/// Class c sits at class_spacing * e_c, the background at class_spacing * e_C.
/// In the target domain every class distribution is displaced toward the
/// background mean (the new conditions wash out what made the class
/// recognizable), while the background moves along a spare basis axis when the
/// dimension allows and a seeded random unit vector otherwise.
inline WorldGeometry world_geometry(const WorldConfig& cfg) {
  const int c = cfg.num_classes;
  const int d = cfg.feature_dim;
  WorldGeometry geo;
  for (int i = 0; i <= c; ++i) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    mean(i) = cfg.class_spacing;
    geo.class_means.push_back(std::move(mean));
  }
  const Eigen::VectorXd& bg_mean = geo.class_means[static_cast<std::size_t>(c)];
  for (int i = 0; i < c; ++i) {
    geo.shift_dirs.push_back(
        (bg_mean - geo.class_means[static_cast<std::size_t>(i)]).normalized());
  }
  Eigen::VectorXd bg_dir = Eigen::VectorXd::Zero(d);
  if (d >= c + 2) {
    bg_dir(c + 1) = 1.0;
  } else {
    std::mt19937_64 rng = make_rng(cfg.seed, {kSeedShiftDir});
    std::normal_distribution<double> gauss(0.0, 1.0);
    do {
      for (int j = 0; j < d; ++j) bg_dir(j) = gauss(rng);
    } while (bg_dir.norm() < 1e-9);
    bg_dir.normalize();
  }
  geo.shift_dirs.push_back(std::move(bg_dir));
  return geo;
}

inline Eigen::VectorXd gaussian_vector(int dim, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = scale * gauss(rng);
  return v;
}

struct SceneObject {
  int class_id = 0;
  BoundingBox box;
  Eigen::VectorXd latent;
};

/// One base scene: object classes, non-overlapping boxes, per-object latent
/// features, and latent background features. Redundancy runs replay a base
/// scene with per-frame jitter.
struct BaseScene {
  std::vector<SceneObject> objects;
  std::vector<Eigen::VectorXd> background_latents;
};

inline BoundingBox sample_box(const WorldConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> size(cfg.min_box_size, cfg.max_box_size);
  const double w = size(rng);
  const double h = size(rng);
  std::uniform_real_distribution<double> px(0.0, cfg.scene_width - w);
  std::uniform_real_distribution<double> py(0.0, cfg.scene_height - h);
  const double x = px(rng);
  const double y = py(rng);
  return BoundingBox{x, y, x + w, y + h};
}

/// Displacement for one latent. The per-latent magnitude is uniform on
/// [0, 2 * shift_magnitude], so the mean displacement equals shift_magnitude
/// while each scene mixes barely-moved and heavily-moved instances.
inline Eigen::VectorXd sample_shift(const WorldConfig& cfg, const Eigen::VectorXd& dir,
                                    Domain domain, std::mt19937_64& rng) {
  if (domain == Domain::source || cfg.shift_magnitude == 0.0) {
    return Eigen::VectorXd::Zero(cfg.feature_dim);
  }
  std::uniform_real_distribution<double> travel(0.0, 2.0 * cfg.shift_magnitude);
  return travel(rng) * dir;
}

inline BaseScene make_base_scene(const WorldConfig& cfg, const WorldGeometry& geo,
                                 Domain domain, std::mt19937_64& rng) {
  BaseScene scene;
  std::uniform_int_distribution<int> count(cfg.min_objects, cfg.max_objects);
  std::uniform_int_distribution<int> klass(0, cfg.num_classes - 1);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    SceneObject obj;
    obj.class_id = klass(rng);
    bool placed = false;
    for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
      obj.box = sample_box(cfg, rng);
      placed = true;
      for (const SceneObject& other : scene.objects) {
        if (iou(obj.box, other.box) >= 0.3) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) {
      throw InvalidConfig("world: cannot place objects without overlap (scene too crowded)");
    }
    const std::size_t c = static_cast<std::size_t>(obj.class_id);
    obj.latent = geo.class_means[c] + sample_shift(cfg, geo.shift_dirs[c], domain, rng) +
                 gaussian_vector(cfg.feature_dim, cfg.noise_scale, rng);
    scene.objects.push_back(std::move(obj));
  }
  const std::size_t bg = static_cast<std::size_t>(cfg.num_classes);
  for (int i = 0; i < cfg.background_proposals; ++i) {
    scene.background_latents.push_back(
        geo.class_means[bg] + sample_shift(cfg, geo.shift_dirs[bg], domain, rng) +
        gaussian_vector(cfg.feature_dim, cfg.noise_scale, rng));
  }
  return scene;
}

inline BoundingBox translate_clamped(const BoundingBox& box, double dx, double dy,
                                     const WorldConfig& cfg) {
  const double w = box.width();
  const double h = box.height();
  const double x = std::clamp(box.x_min + dx, 0.0, cfg.scene_width - w);
  const double y = std::clamp(box.y_min + dy, 0.0, cfg.scene_height - h);
  return BoundingBox{x, y, x + w, y + h};
}

/// Proposal box for one ground-truth object: jittered but guaranteed to keep
/// IoU >= 0.5 (falls back to the exact box), so no object is proposal-starved.
inline BoundingBox jitter_proposal(const BoundingBox& gt, const WorldConfig& cfg,
                                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ux(-0.1 * gt.width(), 0.1 * gt.width());
  std::uniform_real_distribution<double> uy(-0.1 * gt.height(), 0.1 * gt.height());
  for (int attempt = 0; attempt < 20; ++attempt) {
    const BoundingBox candidate = translate_clamped(gt, ux(rng), uy(rng), cfg);
    if (iou(candidate, gt) >= 0.5) return candidate;
  }
  return gt;
}

/// Materialize one frame from a base scene: ground truth boxes drift a little,
/// features get within-run observation jitter (0.3 x noise), background boxes
/// are re-placed away from the ground truth.
inline Frame materialize_frame(const WorldConfig& cfg, const BaseScene& base, int frame_id,
                               int sequence_pos, std::mt19937_64& rng) {
  Frame frame;
  frame.id = frame_id;
  frame.sequence_pos = sequence_pos;
  frame.scene = Scene{cfg.scene_width, cfg.scene_height};
  const double jitter_scale = 0.3 * cfg.noise_scale;

  for (const SceneObject& obj : base.objects) {
    std::uniform_real_distribution<double> drift(-0.05 * cfg.min_box_size,
                                                 0.05 * cfg.min_box_size);
    const BoundingBox gt_box = translate_clamped(obj.box, drift(rng), drift(rng), cfg);
    frame.gt.push_back(Annotation{gt_box, obj.class_id});

    RegionFeature region;
    region.vector = obj.latent + gaussian_vector(cfg.feature_dim, jitter_scale, rng);
    region.source_box = jitter_proposal(gt_box, cfg, rng);
    region.frame_id = frame_id;
    frame.regions.push_back(std::move(region));
  }

  for (const Eigen::VectorXd& latent : base.background_latents) {
    BoundingBox box;
    bool placed = false;
    for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
      box = sample_box(cfg, rng);
      placed = true;
      for (const Annotation& ann : frame.gt) {
        if (iou(box, ann.box) >= 0.3) {
          placed = false;
          break;
        }
      }
    }
    if (!placed) continue;
    RegionFeature region;
    region.vector = latent + gaussian_vector(cfg.feature_dim, jitter_scale, rng);
    region.source_box = box;
    region.frame_id = frame_id;
    frame.regions.push_back(std::move(region));
  }
  return frame;
}

/// Generate n frames of one domain. run_length > 1 groups consecutive frames
/// into redundancy runs sharing a base scene.
inline std::vector<Frame> generate_frames(const WorldConfig& cfg, const WorldGeometry& geo,
                                          Domain domain, int n, int first_id, int run_length) {
  std::vector<Frame> frames;
  frames.reserve(static_cast<std::size_t>(n));
  BaseScene base;
  int base_index = -1;
  for (int i = 0; i < n; ++i) {
    const int wanted_base = i / run_length;
    if (wanted_base != base_index) {
      base_index = wanted_base;
      std::mt19937_64 base_rng =
          make_rng(cfg.seed, {kSeedBase, static_cast<std::uint64_t>(domain),
                              static_cast<std::uint64_t>(base_index)});
      base = make_base_scene(cfg, geo, domain, base_rng);
    }
    std::mt19937_64 frame_rng =
        make_rng(cfg.seed, {kSeedFrame, static_cast<std::uint64_t>(domain),
                            static_cast<std::uint64_t>(i)});
    frames.push_back(materialize_frame(cfg, base, first_id + i, i, frame_rng));
  }
  return frames;
}

}  // namespace detail

/// Build the three disjoint sets: an annotated source-domain set, the
/// target-domain exploration stream (with hidden ground truth for the oracle
/// and diagnostics), and an annotated target-domain test set. Bit-identical
/// under a fixed config.
inline World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  const detail::WorldGeometry geo = detail::world_geometry(cfg);

  World world;
  world.config = cfg;
  world.source.frames =
      detail::generate_frames(cfg, geo, detail::Domain::source, cfg.n_labeled, 0, 1);
  std::vector<Frame> stream =
      detail::generate_frames(cfg, geo, detail::Domain::target, cfg.n_stream, cfg.n_labeled,
                              cfg.redundancy_run_length);
  world.target = UnlabeledStream(std::move(stream));
  // The test set reuses the target-domain generator with frame indices offset
  // past the stream so its base scenes and ids never collide with it.
  std::vector<Frame> test_frames;
  test_frames.reserve(static_cast<std::size_t>(cfg.n_test));
  {
    WorldConfig test_cfg = cfg;
    test_cfg.seed = mix_seed(cfg.seed, {0xd4});
    test_frames = detail::generate_frames(test_cfg, geo, detail::Domain::target, cfg.n_test,
                                          cfg.n_labeled + cfg.n_stream, 1);
  }
  world.target_test.frames = std::move(test_frames);
  return world;
}

/// Mean per-class displacement of feature centroids between two annotated
/// domains, using each region's best-overlapping ground truth (IoU >= 0.5) as
/// its class. Quantifies what the shift knob did; monotone in shift_magnitude.
inline double shift_report(const LabeledSet& source, const LabeledSet& target, int num_classes,
                           int feature_dim) {
  if (source.frames.empty() || target.frames.empty()) {
    throw InvalidInput("shift_report: both sets must be nonempty");
  }
  auto centroids = [&](const LabeledSet& set) {
    std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(num_classes),
                                      Eigen::VectorXd::Zero(feature_dim));
    std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
    for (const Frame& frame : set.frames) {
      for (const RegionFeature& region : frame.regions) {
        double best_iou = 0.5;
        int best_class = -1;
        for (const Annotation& ann : frame.gt) {
          const double ov = iou(region.source_box, ann.box);
          if (ov >= best_iou) {
            best_iou = ov;
            best_class = ann.class_id;
          }
        }
        if (best_class >= 0) {
          sums[static_cast<std::size_t>(best_class)] += region.vector;
          ++counts[static_cast<std::size_t>(best_class)];
        }
      }
    }
    for (int c = 0; c < num_classes; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        sums[static_cast<std::size_t>(c)] /= static_cast<double>(counts[static_cast<std::size_t>(c)]);
      }
    }
    return std::make_pair(sums, counts);
  };
  const auto [src_c, src_n] = centroids(source);
  const auto [tgt_c, tgt_n] = centroids(target);
  double total = 0.0;
  int classes = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (src_n[static_cast<std::size_t>(c)] == 0 || tgt_n[static_cast<std::size_t>(c)] == 0) {
      continue;
    }
    total += (src_c[static_cast<std::size_t>(c)] - tgt_c[static_cast<std::size_t>(c)]).norm();
    ++classes;
  }
  if (classes == 0) throw InvalidInput("shift_report: no class observed in both domains");
  return total / static_cast<double>(classes);
}

inline double shift_report(const World& world) {
  LabeledSet stream_as_labeled;
  stream_as_labeled.frames = world.target.frames();
  return shift_report(world.source, stream_as_labeled, world.config.num_classes,
                      world.config.feature_dim);
}

}  // namespace wsod
