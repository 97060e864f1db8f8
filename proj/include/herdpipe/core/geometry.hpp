#pragma once

#include <span>
#include <vector>

#include "herdpipe/core/types.hpp"

namespace herdpipe {

// |A ∩ B| / |A ∪ B|, or 0 when the union is empty.
double iou(const BBox& a, const BBox& b) noexcept;

// Clamps `box` into [0,width]x[0,height]. A box with no overlap with the
// image (touching an edge does not count as overlap for a box with area) is
// rejected with ContractError.
BBox clip_to_image(const BBox& box, double width, double height);

enum class Verdict { kTruePositive, kFalsePositive, kIgnored };

struct MatchResult {
  struct DetectionVerdict {
    Verdict verdict = Verdict::kIgnored;
    std::size_t gt_index = 0;  // meaningful for kTruePositive only
  };

  // Indexed like the input detections; detections of other classes are kIgnored.
  std::vector<DetectionVerdict> detections;
  // Indexed like the input ground truths; entries of other classes stay unset
  // and are excluded from the counts.
  std::vector<bool> gt_matched;
  std::vector<bool> gt_in_class;
  double iou_threshold = 0.5;

  std::size_t true_positives() const noexcept;
  std::size_t false_positives() const noexcept;
  std::size_t false_negatives() const noexcept;
};

// Greedy one-to-one matching restricted to `class_id`. Detections are visited
// by descending confidence (ties: ascending index); each claims the unmatched
// ground truth of the same class with the highest IoU >= iou_threshold (ties:
// lowest ground-truth index).
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruthBox> gts,
                             double iou_threshold, ClassId class_id);

// Visiting order used by every greedy matcher: descending confidence, then
// ascending index.
std::vector<std::size_t> confidence_order(std::span<const Detection> dets);

}  // namespace herdpipe
