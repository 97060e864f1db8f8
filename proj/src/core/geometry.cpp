#include "herdpipe/core/geometry.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "herdpipe/error.hpp"

namespace herdpipe {

double iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox clip_to_image(const BBox& box, double width, double height) {
  if (!(width > 0.0 && height > 0.0)) throw ContractError("image dimensions must be positive");
  const double ow = std::min(box.x_max, width) - std::max(box.x_min, 0.0);
  const double oh = std::min(box.y_max, height) - std::max(box.y_min, 0.0);
  const bool outside = ow < 0.0 || oh < 0.0 || (ow == 0.0 && box.width() > 0.0) ||
                       (oh == 0.0 && box.height() > 0.0);
  if (outside) {
    throw ContractError(fmt::format("box ({}, {}, {}, {}) lies outside the {}x{} image", box.x_min,
                                    box.y_min, box.x_max, box.y_max, width, height));
  }
  return {std::clamp(box.x_min, 0.0, width), std::clamp(box.y_min, 0.0, height),
          std::clamp(box.x_max, 0.0, width), std::clamp(box.y_max, 0.0, height)};
}

std::size_t MatchResult::true_positives() const noexcept {
  return static_cast<std::size_t>(std::count_if(detections.begin(), detections.end(), [](auto& d) {
    return d.verdict == Verdict::kTruePositive;
  }));
}

std::size_t MatchResult::false_positives() const noexcept {
  return static_cast<std::size_t>(std::count_if(detections.begin(), detections.end(), [](auto& d) {
    return d.verdict == Verdict::kFalsePositive;
  }));
}

std::size_t MatchResult::false_negatives() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt_matched.size(); ++i) {
    if (gt_in_class[i] && !gt_matched[i]) ++n;
  }
  return n;
}

std::vector<std::size_t> confidence_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                             double iou_threshold, ClassId class_id) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError(fmt::format("IoU threshold {} outside (0, 1]", iou_threshold));
  }
  MatchResult result;
  result.iou_threshold = iou_threshold;
  result.detections.resize(dets.size());
  result.gt_matched.assign(gts.size(), false);
  result.gt_in_class.resize(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) result.gt_in_class[g] = gts[g].class_id == class_id;

  for (std::size_t d : confidence_order(dets)) {
    if (dets[d].class_id != class_id) continue;
    double best = -1.0;
    std::size_t best_gt = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (!result.gt_in_class[g] || result.gt_matched[g]) continue;
      const double overlap = iou(dets[d].bbox, gts[g].bbox);
      if (overlap >= iou_threshold && overlap > best) {
        best = overlap;
        best_gt = g;
      }
    }
    if (best >= 0.0) {
      result.gt_matched[best_gt] = true;
      result.detections[d] = {Verdict::kTruePositive, best_gt};
    } else {
      result.detections[d] = {Verdict::kFalsePositive, 0};
    }
  }
  return result;
}

}  // namespace herdpipe
