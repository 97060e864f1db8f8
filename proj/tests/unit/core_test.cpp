#include <doctest.h>

#include <random>

#include "herdpipe/core/geometry.hpp"
#include "herdpipe/error.hpp"
#include "support/oracle.hpp"

using namespace herdpipe;

TEST_CASE("iou examples") {
  const BBox a{0, 0, 10, 10};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, {20, 20, 30, 30}) == 0.0);
  // intersection 50, union 150
  CHECK(iou(a, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("iou of degenerate boxes is zero") {
  const BBox point{5, 5, 5, 5};
  CHECK(iou(point, point) == 0.0);
  CHECK(iou(point, {0, 0, 10, 10}) == 0.0);
  const BBox line{0, 0, 10, 0};
  CHECK(iou(line, line) == 0.0);
}

TEST_CASE("iou properties over random boxes") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int i = 0; i < 5000; ++i) {
    auto make = [&] {
      double x0 = u(rng), x1 = u(rng), y0 = u(rng), y1 = u(rng);
      return BBox{std::min(x0, x1), std::min(y0, y1), std::max(x0, x1), std::max(y0, y1)};
    };
    const BBox a = make();
    const BBox b = make();
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, b) >= 0.0);
    CHECK(iou(a, b) <= 1.0);
    if (a.area() > 0.0) CHECK(iou(a, a) == 1.0);
  }
}

TEST_CASE("clip_to_image") {
  CHECK(clip_to_image({-5, -5, 10, 10}, 100, 100) == BBox{0, 0, 10, 10});
  CHECK(clip_to_image({0, 0, 10, 10}, 100, 100) == BBox{0, 0, 10, 10});
  CHECK(clip_to_image({90, 90, 150, 120}, 100, 100) == BBox{90, 90, 100, 100});
  CHECK_THROWS_AS(clip_to_image({200, 200, 300, 300}, 100, 100), ContractError);
  // Touching the right edge only.
  CHECK_THROWS_AS(clip_to_image({100, 10, 120, 20}, 100, 100), ContractError);
  CHECK_THROWS_AS(clip_to_image({0, 0, 1, 1}, 0, 100), ContractError);
  // A degenerate box inside the image is legal.
  CHECK(clip_to_image({5, 5, 5, 5}, 10, 10) == BBox{5, 5, 5, 5});
  for (double x = -20; x < 120; x += 7) {
    try {
      const BBox c = clip_to_image({x, x, x + 30, x + 15}, 100, 100);
      CHECK(is_valid(c));
      CHECK(c.x_max <= 100);
      CHECK(c.y_max <= 100);
    } catch (const ContractError&) {
    }
  }
}

TEST_CASE("box and class-set validation") {
  CHECK(is_valid({0, 0, 0, 0}));
  CHECK_FALSE(is_valid({-1, 0, 2, 2}));
  CHECK_FALSE(is_valid({3, 0, 2, 2}));
  CHECK_FALSE(is_valid({0, 0, std::numeric_limits<double>::infinity(), 2}));
  CHECK_THROWS_AS(validate(BBox{3, 0, 2, 2}), ContractError);

  CHECK_THROWS_AS(ClassSet(std::vector<std::string>{}), ConfigError);
  CHECK_THROWS_AS(ClassSet({"camel", "camel"}), ConfigError);
  const ClassSet cs({"camel", "Camel", "rope"});
  CHECK(cs.id_of("Camel") == 1);
  CHECK_FALSE(cs.find("pole").has_value());
  try {
    cs.id_of("pole");
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(std::string(e.what()).find("camel, Camel, rope") != std::string::npos);
  }
}

TEST_CASE("annotated image validation") {
  const ClassSet cs({"a", "b"});
  AnnotatedImage img{"x", 10, 10, {{{0, 0, 10, 10}, 1}}, {}, {}};
  CHECK_NOTHROW(validate(img, cs));
  img.boxes[0].bbox.x_max = 11;
  CHECK_THROWS_AS(validate(img, cs), ContractError);
  img.boxes[0].bbox.x_max = 10;
  img.boxes[0].class_id = 2;
  CHECK_THROWS_AS(validate(img, cs), DatasetError);
  img.boxes[0].class_id = 0;
  img.scores = {0.5, 0.6};
  CHECK_THROWS_AS(validate(img, cs), ContractError);
  img.scores = {1.5};
  CHECK_THROWS_AS(validate(img, cs), ContractError);
  img.scores = {};
  img.masks = {MaskAnnotation{0, 2, 2, RunLength{{1, 2}}}};
  CHECK_THROWS_AS(validate(img, cs), ContractError);
  img.masks = {MaskAnnotation{0, 2, 2, RunLength{{1, 2, 1}}}};
  CHECK_NOTHROW(validate(img, cs));
  img.masks = {MaskAnnotation{0, 2, 2, Polygon{{{0, 0}, {2, 0}}}}};
  CHECK_THROWS_AS(validate(img, cs), ContractError);
}

TEST_CASE("match_detections examples") {
  const std::vector<GroundTruthBox> one_gt{{{0, 0, 10, 10}, 0}};
  SUBCASE("perfect match") {
    const std::vector<Detection> dets{{{0, 0, 10, 10}, 0, 0.9}};
    const auto m = match_detections(dets, one_gt, 0.5, 0);
    CHECK(m.true_positives() == 1);
    CHECK(m.false_positives() == 0);
    CHECK(m.false_negatives() == 0);
  }
  SUBCASE("two detections on one ground truth") {
    const std::vector<Detection> dets{{{0, 0, 10, 9}, 0, 0.8}, {{0, 0, 10, 10}, 0, 0.9}};
    const auto m = match_detections(dets, one_gt, 0.5, 0);
    CHECK(m.detections[1].verdict == Verdict::kTruePositive);
    CHECK(m.detections[0].verdict == Verdict::kFalsePositive);
    const auto o = oracle::exhaustive_match(dets, one_gt, 0.5, 0);
    CHECK(o[1] == std::optional<std::size_t>(0));
    CHECK_FALSE(o[0].has_value());
  }
  SUBCASE("no detections") {
    const std::vector<GroundTruthBox> gts{{{0, 0, 1, 1}, 0}, {{2, 2, 3, 3}, 0}, {{4, 4, 5, 5}, 0}};
    const auto m = match_detections({}, gts, 0.5, 0);
    CHECK(m.false_negatives() == 3);
    CHECK(m.true_positives() == 0);
  }
  SUBCASE("class restriction") {
    const std::vector<Detection> dets{{{0, 0, 10, 10}, 1, 0.9}};
    const auto m = match_detections(dets, one_gt, 0.5, 0);
    CHECK(m.detections[0].verdict == Verdict::kIgnored);
    CHECK(m.false_negatives() == 1);
    const auto m1 = match_detections(dets, one_gt, 0.5, 1);
    CHECK(m1.false_positives() == 1);
    CHECK(m1.false_negatives() == 0);
  }
  SUBCASE("confidence tie keeps index order") {
    const std::vector<Detection> dets{{{0, 0, 10, 9}, 0, 0.5}, {{0, 0, 10, 10}, 0, 0.5}};
    const auto m = match_detections(dets, one_gt, 0.5, 0);
    CHECK(m.detections[0].verdict == Verdict::kTruePositive);
    CHECK(m.detections[1].verdict == Verdict::kFalsePositive);
  }
  SUBCASE("invalid threshold") {
    CHECK_THROWS_AS(match_detections({}, one_gt, 0.0, 0), ConfigError);
    CHECK_THROWS_AS(match_detections({}, one_gt, 1.5, 0), ConfigError);
    CHECK_NOTHROW(match_detections({}, one_gt, 1.0, 0));
  }
}

TEST_CASE("greedy matching agrees with the exhaustive oracle") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> thr_dist(0.05, 1.0);
  for (int trial = 0; trial < 3000; ++trial) {
    auto inst = oracle::random_instance(rng, 1, 6, 2);
    const auto& gts = inst.gts[0].boxes;
    const auto& dets = inst.preds[0];
    const double thr = thr_dist(rng);
    for (std::size_t c = 0; c < inst.n_classes; ++c) {
      const auto m = match_detections(dets, gts, thr, c);
      const auto o = oracle::exhaustive_match(dets, gts, thr, c);
      std::size_t class_dets = 0;
      std::size_t class_gts = 0;
      for (auto& d : dets) class_dets += d.class_id == c;
      for (auto& g : gts) class_gts += g.class_id == c;
      CHECK(m.true_positives() + m.false_negatives() == class_gts);
      CHECK(m.true_positives() + m.false_positives() == class_dets);
      for (std::size_t d = 0; d < dets.size(); ++d) {
        if (dets[d].class_id != c) continue;
        if (o[d]) {
          REQUIRE(m.detections[d].verdict == Verdict::kTruePositive);
          CHECK(m.detections[d].gt_index == *o[d]);
        } else {
          CHECK(m.detections[d].verdict == Verdict::kFalsePositive);
        }
      }
    }
  }
}

TEST_CASE("raising the IoU threshold never increases true positives") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    auto inst = oracle::random_instance(rng, 1, 8, 1);
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    for (double thr = 0.05; thr <= 1.0; thr += 0.05) {
      const auto tp = match_detections(inst.preds[0], inst.gts[0].boxes, thr, 0).true_positives();
      CHECK(tp <= prev);
      prev = tp;
    }
  }
}
