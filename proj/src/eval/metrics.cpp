#include "herdpipe/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "herdpipe/core/csv.hpp"
#include "herdpipe/core/geometry.hpp"
#include "herdpipe/error.hpp"

namespace herdpipe::eval {

namespace {

struct ScoredDetection {
  double confidence;
  bool true_positive;
};

struct ClassMatches {
  std::vector<ScoredDetection> dets;  // descending confidence
  std::size_t gt_count = 0;
};

// predictions re-indexed by ground-truth image position; nullptr where an image has none.
std::vector<const AnnotatedImage*> align_predictions(std::span<const AnnotatedImage> gts,
                                                     std::span<const AnnotatedImage> preds) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (!index.emplace(gts[i].id, i).second) {
      throw DatasetError("duplicate ground-truth image id '" + gts[i].id + "'");
    }
  }
  std::vector<const AnnotatedImage*> aligned(gts.size(), nullptr);
  for (const auto& p : preds) {
    auto it = index.find(p.id);
    if (it == index.end()) throw DatasetError("prediction for unknown image id '" + p.id + "'");
    if (aligned[it->second] != nullptr) {
      throw DatasetError("duplicate predictions for image id '" + p.id + "'");
    }
    aligned[it->second] = &p;
  }
  return aligned;
}

ClassMatches collect(std::span<const AnnotatedImage> gts,
                     const std::vector<const AnnotatedImage*>& aligned, ClassId class_id,
                     double iou_threshold) {
  ClassMatches out;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (const auto& g : gts[i].boxes) {
      if (g.class_id == class_id) ++out.gt_count;
    }
    if (aligned[i] == nullptr) continue;
    const auto dets = aligned[i]->detections();
    const auto match = match_detections(dets, gts[i].boxes, iou_threshold, class_id);
    for (std::size_t d = 0; d < dets.size(); ++d) {
      if (match.detections[d].verdict == Verdict::kIgnored) continue;
      out.dets.push_back(
          {dets[d].confidence, match.detections[d].verdict == Verdict::kTruePositive});
    }
  }
  // Stable: equal confidences keep (image, detection) order.
  std::stable_sort(out.dets.begin(), out.dets.end(),
                   [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
  return out;
}

std::vector<PRPoint> curve_from(const ClassMatches& m) {
  std::vector<PRPoint> points;
  points.reserve(m.dets.size());
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& d : m.dets) {
    (d.true_positive ? tp : fp) += 1;
    points.push_back({d.confidence, precision(tp, fp), recall(tp, m.gt_count - tp)});
  }
  return points;
}

double final_recall(const ClassMatches& m) {
  const auto tp = static_cast<std::size_t>(
      std::count_if(m.dets.begin(), m.dets.end(), [](auto& d) { return d.true_positive; }));
  return recall(tp, m.gt_count - tp);
}

std::vector<ConfidencePoint> confidence_curve(const ClassMatches& m, int steps) {
  std::vector<ConfidencePoint> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int j = 0; j < steps; ++j) {
    const double cutoff = static_cast<double>(j) / (steps - 1);
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (const auto& d : m.dets) {
      if (d.confidence < cutoff) break;
      (d.true_positive ? tp : fp) += 1;
    }
    const double p = precision(tp, fp);
    const double r = recall(tp, m.gt_count - tp);
    out.push_back({cutoff, p, r, f1(p, r)});
  }
  return out;
}

double mean_of(const std::vector<double>& values, const std::vector<bool>& use) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!use[i]) continue;
    sum += values[i];
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

void check_classes(std::span<const AnnotatedImage> images, const ClassSet& classes,
                   const char* what) {
  for (const auto& img : images) {
    for (const auto& b : img.boxes) {
      if (!classes.contains(b.class_id)) {
        throw DatasetError(fmt::format("{} image '{}' has class id {} outside the {}-class set",
                                       what, img.id, b.class_id, classes.size()));
      }
    }
    if (!img.scores.empty() && img.scores.size() != img.boxes.size()) {
      throw DatasetError(fmt::format("{} image '{}' has {} scores for {} boxes", what, img.id,
                                     img.scores.size(), img.boxes.size()));
    }
  }
}

}  // namespace

std::vector<double> default_iou_sweep() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

void EvalConfig::validate() const {
  if (classes.empty()) throw ConfigError("evaluation needs a non-empty class set");
  if (iou_thresholds.empty()) throw ConfigError("evaluation needs at least one IoU threshold");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const double t = iou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) throw ConfigError(fmt::format("IoU threshold {} outside (0, 1]", t));
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw ConfigError("IoU thresholds must be strictly increasing");
    }
  }
  if (confidence_steps < 2) throw ConfigError("confidence_steps must be >= 2");
  if (!(curve_iou > 0.0 && curve_iou <= 1.0)) throw ConfigError("curve_iou outside (0, 1]");
}

double precision(std::size_t tp, std::size_t fp) noexcept {
  if (tp + fp == 0) return 1.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double recall(std::size_t tp, std::size_t fn) noexcept {
  if (tp + fn == 0) return 1.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double f1(double p, double r) noexcept {
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

std::vector<PRPoint> pr_curve(std::span<const AnnotatedImage> ground_truth,
                              std::span<const AnnotatedImage> predictions, ClassId class_id,
                              double iou_threshold) {
  const auto aligned = align_predictions(ground_truth, predictions);
  return curve_from(collect(ground_truth, aligned, class_id, iou_threshold));
}

double ap_from_curve(std::span<const PRPoint> points) {
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t n = 0; n < points.size(); ++n) {
    const auto& pt = points[n];
    if (pt.recall < prev_recall) {
      throw ContractError(fmt::format("recall decreases at point {} ({} < {})", n, pt.recall,
                                      prev_recall));
    }
    ap += (pt.recall - prev_recall) * pt.precision;
    prev_recall = pt.recall;
  }
  return ap;
}

double mean_over_sweep(std::span<const double> per_threshold_ap) {
  if (per_threshold_ap.empty()) return 0.0;
  double sum = 0.0;
  for (double v : per_threshold_ap) sum += v;
  return sum / static_cast<double>(per_threshold_ap.size());
}

EvalReport evaluate(std::span<const AnnotatedImage> ground_truth,
                    std::span<const AnnotatedImage> predictions, const EvalConfig& cfg) {
  cfg.validate();
  check_classes(ground_truth, cfg.classes, "ground-truth");
  check_classes(predictions, cfg.classes, "prediction");
  const auto aligned = align_predictions(ground_truth, predictions);

  const std::size_t n_classes = cfg.classes.size();
  const std::size_t k = cfg.iou_thresholds.size();

  EvalReport r;
  r.classes = cfg.classes.names();
  r.iou_thresholds = cfg.iou_thresholds;
  r.gt_counts.assign(n_classes, 0);
  r.evaluated.assign(n_classes, false);
  r.ap.assign(n_classes, std::vector<double>(k, 0.0));
  r.ap50_per_class.assign(n_classes, 0.0);
  r.recall_per_class.assign(n_classes, 0.0);

  std::vector<double> class_sweep_ap(n_classes, 0.0);
  std::vector<ClassMatches> at_curve_iou;
  at_curve_iou.reserve(n_classes);

  for (ClassId c = 0; c < n_classes; ++c) {
    for (std::size_t t = 0; t < k; ++t) {
      const auto m = collect(ground_truth, aligned, c, cfg.iou_thresholds[t]);
      r.gt_counts[c] = m.gt_count;
      r.ap[c][t] = ap_from_curve(curve_from(m));
    }
    r.evaluated[c] = r.gt_counts[c] > 0;
    class_sweep_ap[c] = mean_over_sweep(r.ap[c]);
    r.ap50_per_class[c] = ap_from_curve(curve_from(collect(ground_truth, aligned, c, 0.5)));
    at_curve_iou.push_back(collect(ground_truth, aligned, c, cfg.curve_iou));
    r.recall_per_class[c] = final_recall(at_curve_iou.back());
  }

  r.mean_ap.assign(k, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    std::vector<double> column(n_classes);
    for (ClassId c = 0; c < n_classes; ++c) column[c] = r.ap[c][t];
    r.mean_ap[t] = mean_of(column, r.evaluated);
  }
  r.map = mean_over_sweep(r.mean_ap);
  r.overall_ap = mean_of(class_sweep_ap, r.evaluated);
  r.ap50 = mean_of(r.ap50_per_class, r.evaluated);
  r.overall_recall = mean_of(r.recall_per_class, r.evaluated);

  ClassCurves all{"all", {}, {}};
  std::size_t n_eval = 0;
  for (ClassId c = 0; c < n_classes; ++c) {
    ClassCurves cc{r.classes[c], confidence_curve(at_curve_iou[c], cfg.confidence_steps),
                   curve_from(at_curve_iou[c])};
    if (r.evaluated[c]) {
      if (all.confidence.empty()) all.confidence.assign(cc.confidence.size(), {});
      for (std::size_t j = 0; j < cc.confidence.size(); ++j) {
        all.confidence[j].cutoff = cc.confidence[j].cutoff;
        all.confidence[j].precision += cc.confidence[j].precision;
        all.confidence[j].recall += cc.confidence[j].recall;
        all.confidence[j].f1 += cc.confidence[j].f1;
      }
      ++n_eval;
    }
    r.curves.push_back(std::move(cc));
  }
  for (auto& p : all.confidence) {
    p.precision /= static_cast<double>(n_eval);
    p.recall /= static_cast<double>(n_eval);
    p.f1 /= static_cast<double>(n_eval);
  }
  r.curves.push_back(std::move(all));
  return r;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["AP"] = report.overall_ap;
  j["Recall"] = report.overall_recall;
  j["AP_valid0.50"] = report.ap50;
  j["AP_valid0.95"] = report.map;
  j["iou_thresholds"] = report.iou_thresholds;
  j["mean_ap_per_threshold"] = report.mean_ap;
  auto& classes = j["classes"] = nlohmann::ordered_json::array();
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    nlohmann::ordered_json cj;
    cj["name"] = report.classes[c];
    cj["ground_truths"] = report.gt_counts[c];
    cj["evaluated"] = static_cast<bool>(report.evaluated[c]);
    cj["AP"] = mean_over_sweep(report.ap[c]);
    cj["Recall"] = report.recall_per_class[c];
    cj["AP_valid0.50"] = report.ap50_per_class[c];
    cj["ap_per_threshold"] = report.ap[c];
    classes.push_back(std::move(cj));
  }
  auto& curves = j["curves"] = nlohmann::ordered_json::array();
  for (const auto& cc : report.curves) {
    nlohmann::ordered_json cj;
    cj["class"] = cc.name;
    auto& conf = cj["confidence"] = nlohmann::ordered_json::array();
    for (const auto& p : cc.confidence) conf.push_back({p.cutoff, p.precision, p.recall, p.f1});
    auto& pr = cj["precision_recall"] = nlohmann::ordered_json::array();
    for (const auto& p : cc.pr) pr.push_back({p.confidence, p.precision, p.recall});
    curves.push_back(std::move(cj));
  }
  return j;
}

std::string render_table(const EvalReport& report) {
  std::size_t width = 5;
  for (const auto& n : report.classes) width = std::max(width, n.size());
  std::string out = fmt::format("{:<{}}  {:>8}  {:>8}  {:>12}  {:>12}\n", "Class", width, "AP",
                                "Recall", "AP_valid0.50", "AP_valid0.95");
  out += fmt::format("{:<{}}  {:>8.5f}  {:>8.5f}  {:>12.5f}  {:>12.5f}\n", "all", width,
                     report.overall_ap, report.overall_recall, report.ap50, report.map);
  for (std::size_t c = 0; c < report.classes.size(); ++c) {
    if (!report.evaluated[c]) {
      out += fmt::format("{:<{}}  {:>8}  {:>8}  {:>12}  {:>12}\n", report.classes[c], width, "-",
                         "-", "-", "-");
      continue;
    }
    const double sweep = mean_over_sweep(report.ap[c]);
    out += fmt::format("{:<{}}  {:>8.5f}  {:>8.5f}  {:>12.5f}  {:>12.5f}\n", report.classes[c],
                       width, sweep, report.recall_per_class[c], report.ap50_per_class[c], sweep);
  }
  if (!report.iou_thresholds.empty()) {
    out += fmt::format("AP_valid0.95 = mean AP over IoU {:.2f}:{:.2f} (k = {})\n",
                       report.iou_thresholds.front(), report.iou_thresholds.back(),
                       report.iou_thresholds.size());
  }
  return out;
}

std::string curves_csv(const EvalReport& report) {
  std::string out = "class,cutoff,precision,recall,f1\n";
  for (const auto& cc : report.curves) {
    for (const auto& p : cc.confidence) {
      out += fmt::format("{},{},{:.6f},{:.6f},{:.6f}\n", csv::quote(cc.name), p.cutoff,
                         p.precision, p.recall, p.f1);
    }
  }
  return out;
}

}  // namespace herdpipe::eval
