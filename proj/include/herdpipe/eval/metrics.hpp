#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/core/types.hpp"

namespace herdpipe::eval {

// 0.50:0.05:0.95
std::vector<double> default_iou_sweep();

struct EvalConfig {
  ClassSet classes;
  std::vector<double> iou_thresholds = default_iou_sweep();
  int confidence_steps = 101;
  // IoU used for the confidence curves and the reported recall.
  double curve_iou = 0.5;

  void validate() const;
};

struct PRPoint {
  double confidence = 0.0;
  double precision = 0.0;
  double recall = 0.0;

  friend bool operator==(const PRPoint&, const PRPoint&) = default;
};

// Zero denominators score 1.0: no predictions means no false alarms, no
// ground truth means nothing was missed.
double precision(std::size_t tp, std::size_t fp) noexcept;
double recall(std::size_t tp, std::size_t fn) noexcept;
double f1(double p, double r) noexcept;

// Predictions are AnnotatedImages whose ids name ground-truth images; boxes
// without scores count as confidence 1.0. Images absent from `predictions`
// contribute no detections.
std::vector<PRPoint> pr_curve(std::span<const AnnotatedImage> ground_truth,
                              std::span<const AnnotatedImage> predictions, ClassId class_id,
                              double iou_threshold);

// Sum over n of (R_n - R_{n-1}) * P_n with R_0 = 0.
double ap_from_curve(std::span<const PRPoint> points);

struct ConfidencePoint {
  double cutoff = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassCurves {
  std::string name;
  std::vector<ConfidencePoint> confidence;
  std::vector<PRPoint> pr;
};

struct EvalReport {
  std::vector<std::string> classes;
  std::vector<double> iou_thresholds;
  std::vector<std::size_t> gt_counts;
  // Classes without ground truth are left out of every class mean.
  std::vector<bool> evaluated;
  // ap[class][threshold]
  std::vector<std::vector<double>> ap;
  std::vector<double> ap50_per_class;
  std::vector<double> recall_per_class;
  // Mean-class AP at each threshold of the sweep.
  std::vector<double> mean_ap;

  double overall_ap = 0.0;  // per-class AP averaged over the sweep, then over classes
  double ap50 = 0.0;        // mean-class AP at IoU 0.50
  double map = 0.0;         // sum of mean_ap / k
  double overall_recall = 0.0;

  std::vector<ClassCurves> curves;  // per class, then an "all" aggregate
};

EvalReport evaluate(std::span<const AnnotatedImage> ground_truth,
                    std::span<const AnnotatedImage> predictions, const EvalConfig& cfg);

// Sum of per-threshold mean-class APs divided by their count k.
double mean_over_sweep(std::span<const double> per_threshold_ap);

nlohmann::ordered_json to_json(const EvalReport& report);
// Columns: Class, AP, Recall, AP_valid0.50, AP_valid0.95.
std::string render_table(const EvalReport& report);
// Header: class,cutoff,precision,recall,f1
std::string curves_csv(const EvalReport& report);

}  // namespace herdpipe::eval
