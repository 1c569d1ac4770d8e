#include <catch2/catch_amalgamated.hpp>

#include <wsod/random.hpp>
#include <wsod/ssl_policies.hpp>

#include <vector>

using wsod::BoundingBox;
using wsod::ConsistencyScore;
using wsod::Detection;
using wsod::Frame;
using wsod::RegionFeature;
using wsod::SsConfig;
using wsod::SsVariant;

namespace {

ConsistencyScore consistency(double v) {
  ConsistencyScore s;
  s.value = v;
  return s;
}

Frame grid_frame(int n_regions) {
  Frame f;
  f.id = 5;
  f.scene = {200, 200};
  for (int i = 0; i < n_regions; ++i) {
    RegionFeature r;
    r.vector = Eigen::VectorXd::Constant(2, static_cast<double>(i));
    const double x = 25.0 * i;
    r.source_box = {x, 0, x + 20, 20};
    r.frame_id = 5;
    f.regions.push_back(std::move(r));
  }
  return f;
}

Detection det_on(const Frame& f, int region, double conf, int class_id) {
  Detection d;
  d.box = f.regions[static_cast<std::size_t>(region)].source_box;
  d.class_id = class_id;
  d.confidence = conf;
  d.frame_id = f.id;
  d.region_index = region;
  return d;
}

}  // namespace

TEST_CASE("ssl variant names round trip") {
  CHECK(wsod::ss_variant_from_name("ss_baseline") == SsVariant::SsBaseline);
  CHECK(wsod::ss_variant_from_name("ss_pos_only") == SsVariant::SsPosOnly);
  CHECK(wsod::ss_variant_name(SsVariant::SsPosOnly) == "ss_pos_only");
  CHECK_THROWS_AS(wsod::ss_variant_from_name("nope"), wsod::InvalidConfig);
}

TEST_CASE("low consistency frames contribute nothing") {
  const Frame f = grid_frame(4);
  std::vector<Detection> dets{det_on(f, 0, 0.99, 1)};
  SsConfig cfg;
  cfg.variant = SsVariant::SsBaseline;
  CHECK_FALSE(wsod::ss_decide(f, dets, consistency(0.59), cfg).has_value());
  CHECK(wsod::ss_decide(f, dets, consistency(0.60), cfg).has_value());
}

TEST_CASE("baseline variant asserts non-overlapping regions as background") {
  const Frame f = grid_frame(6);
  std::vector<Detection> dets{
      det_on(f, 0, 0.9, 1),
      det_on(f, 2, 0.85, 0),
      det_on(f, 4, 0.5, 0),  // below confidence_min, not a positive
  };
  SsConfig cfg;
  cfg.variant = SsVariant::SsBaseline;
  const auto label = wsod::ss_decide(f, dets, consistency(0.8), cfg);
  REQUIRE(label.has_value());
  CHECK(label->frame_id == f.id);
  CHECK(label->provenance == SsVariant::SsBaseline);
  REQUIRE(label->positive_annotations.size() == 2);
  CHECK(label->positive_annotations[0].class_id == 1);
  CHECK(label->positive_annotations[1].class_id == 0);
  REQUIRE(label->positive_regions.size() == 2);
  CHECK(label->positive_regions[0].source_box.x_min == f.regions[0].source_box.x_min);
  // grid regions are disjoint, so the four non-positive ones are negatives
  REQUIRE(label->negative_regions.size() == 4);
  for (const auto& neg : label->negative_regions) {
    for (const auto& pos : label->positive_annotations) {
      CHECK(wsod::iou(neg.source_box, pos.box) < cfg.negative_iou_max);
    }
  }
}

TEST_CASE("baseline with no confident detections asserts everything negative") {
  const Frame f = grid_frame(5);
  std::vector<Detection> dets{det_on(f, 1, 0.7, 0)};
  SsConfig cfg;
  cfg.variant = SsVariant::SsBaseline;
  const auto label = wsod::ss_decide(f, dets, consistency(0.9), cfg);
  REQUIRE(label.has_value());
  CHECK(label->positive_annotations.empty());
  CHECK(label->negative_regions.size() == 5);
}

TEST_CASE("pos-only variant abstains without confident detections") {
  const Frame f = grid_frame(5);
  std::vector<Detection> dets{det_on(f, 1, 0.7, 0)};
  SsConfig cfg;
  cfg.variant = SsVariant::SsPosOnly;
  CHECK_FALSE(wsod::ss_decide(f, dets, consistency(0.9), cfg).has_value());
}

TEST_CASE("pos-only keeps the baseline positives and drops its negatives") {
  auto rng = wsod::make_rng(61, {1});
  std::uniform_real_distribution<double> conf(0.0, 1.0);
  std::uniform_int_distribution<int> n_det(0, 5);
  std::uniform_int_distribution<int> cls(0, 2);
  for (int it = 0; it < 100; ++it) {
    const Frame f = grid_frame(8);
    std::vector<Detection> dets;
    const int n = n_det(rng);
    for (int i = 0; i < n; ++i) {
      dets.push_back(det_on(f, i, conf(rng), cls(rng)));
    }
    SsConfig base;
    base.variant = SsVariant::SsBaseline;
    SsConfig pos;
    pos.variant = SsVariant::SsPosOnly;
    const auto lb = wsod::ss_decide(f, dets, consistency(0.9), base);
    const auto lp = wsod::ss_decide(f, dets, consistency(0.9), pos);
    REQUIRE(lb.has_value());
    if (lb->positive_annotations.empty()) {
      CHECK_FALSE(lp.has_value());
      continue;
    }
    REQUIRE(lp.has_value());
    CHECK(lp->negative_regions.empty());
    REQUIRE(lp->positive_annotations.size() == lb->positive_annotations.size());
    for (std::size_t i = 0; i < lp->positive_annotations.size(); ++i) {
      CHECK(lp->positive_annotations[i].class_id == lb->positive_annotations[i].class_id);
      CHECK(lp->positive_annotations[i].box.x_min == lb->positive_annotations[i].box.x_min);
    }
  }
}

TEST_CASE("detections must reference frame regions") {
  const Frame f = grid_frame(3);
  Detection d = det_on(f, 0, 0.95, 0);
  d.region_index = 9;
  SsConfig cfg;
  CHECK_THROWS_AS(wsod::ss_decide(f, std::vector<Detection>{d}, consistency(0.9), cfg),
                  wsod::InvalidInput);
}

TEST_CASE("ssl config validation") {
  SsConfig cfg;
  cfg.confidence_min = 1.5;
  CHECK_THROWS_AS(cfg.validate(), wsod::InvalidConfig);
  cfg = SsConfig{};
  cfg.negative_iou_max = 0.0;
  CHECK_THROWS_AS(cfg.validate(), wsod::InvalidConfig);
  cfg = SsConfig{};
  cfg.negative_iou_max = 1.0;
  CHECK_THROWS_AS(cfg.validate(), wsod::InvalidConfig);
}

TEST_CASE("selected fraction") {
  CHECK(wsod::ss_fraction(12, 100) == Catch::Approx(0.12).margin(1e-12));
  CHECK(wsod::ss_fraction(0, 100) == 0.0);
  CHECK(wsod::ss_fraction(35, 35) == 1.0);
  CHECK_THROWS_AS(wsod::ss_fraction(1, 0), wsod::InvalidInput);
  CHECK_THROWS_AS(wsod::ss_fraction(-1, 10), wsod::InvalidInput);
  CHECK_THROWS_AS(wsod::ss_fraction(11, 10), wsod::InvalidInput);
}
