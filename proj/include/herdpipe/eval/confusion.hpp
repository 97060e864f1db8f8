#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/core/types.hpp"

namespace herdpipe::eval {

// (n+1)x(n+1) matrix over n classes plus a trailing background class. Rows are
// predicted classes, columns true classes.
class ConfusionMatrix {
 public:
  enum class Mode { kCounts, kColumnNormalized };

  explicit ConfusionMatrix(std::vector<std::string> classes, Mode mode = Mode::kCounts);

  std::size_t dim() const noexcept { return classes_.size() + 1; }
  std::size_t background() const noexcept { return classes_.size(); }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  Mode mode() const noexcept { return mode_; }

  double at(std::size_t predicted, std::size_t truth) const;
  double& at(std::size_t predicted, std::size_t truth);
  double column_sum(std::size_t truth) const;

  // Divides each column by its sum; all-zero columns stay zero.
  ConfusionMatrix normalized() const;

  nlohmann::ordered_json to_json() const;
  static ConfusionMatrix from_json(const nlohmann::json& j);
  // Text table, "True ->" across and "Predicted v" down.
  std::string render() const;

 private:
  std::vector<std::string> classes_;
  Mode mode_;
  std::vector<double> cells_;  // row-major
};

// Detections below `confidence_threshold` are discarded; the rest are paired
// with ground truth by class-agnostic greedy IoU matching, then tallied by
// (predicted class, true class), with background for unmatched ones.
ConfusionMatrix confusion_matrix(std::span<const AnnotatedImage> ground_truth,
                                 std::span<const AnnotatedImage> predictions,
                                 const ClassSet& classes, double iou_threshold,
                                 double confidence_threshold);

}  // namespace herdpipe::eval
