#include "herdpipe/eval/confusion.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

#include "herdpipe/core/geometry.hpp"
#include "herdpipe/error.hpp"

namespace herdpipe::eval {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> classes, Mode mode)
    : classes_(std::move(classes)), mode_(mode), cells_(dim() * dim(), 0.0) {}

double ConfusionMatrix::at(std::size_t predicted, std::size_t truth) const {
  if (predicted >= dim() || truth >= dim()) throw ContractError("confusion-matrix index out of range");
  return cells_[predicted * dim() + truth];
}

double& ConfusionMatrix::at(std::size_t predicted, std::size_t truth) {
  if (predicted >= dim() || truth >= dim()) throw ContractError("confusion-matrix index out of range");
  return cells_[predicted * dim() + truth];
}

double ConfusionMatrix::column_sum(std::size_t truth) const {
  double sum = 0.0;
  for (std::size_t p = 0; p < dim(); ++p) sum += at(p, truth);
  return sum;
}

ConfusionMatrix ConfusionMatrix::normalized() const {
  ConfusionMatrix out(classes_, Mode::kColumnNormalized);
  for (std::size_t t = 0; t < dim(); ++t) {
    const double sum = column_sum(t);
    if (sum == 0.0) continue;
    for (std::size_t p = 0; p < dim(); ++p) out.at(p, t) = at(p, t) / sum;
  }
  return out;
}

nlohmann::ordered_json ConfusionMatrix::to_json() const {
  nlohmann::ordered_json j;
  j["classes"] = classes_;
  j["mode"] = mode_ == Mode::kCounts ? "counts" : "column-normalized";
  auto& rows = j["cells"] = nlohmann::ordered_json::array();
  for (std::size_t p = 0; p < dim(); ++p) {
    std::vector<double> row(cells_.begin() + static_cast<std::ptrdiff_t>(p * dim()),
                            cells_.begin() + static_cast<std::ptrdiff_t>((p + 1) * dim()));
    rows.push_back(row);
  }
  return j;
}

ConfusionMatrix ConfusionMatrix::from_json(const nlohmann::json& j) {
  try {
    const auto mode_name = j.at("mode").get<std::string>();
    Mode mode;
    if (mode_name == "counts") {
      mode = Mode::kCounts;
    } else if (mode_name == "column-normalized") {
      mode = Mode::kColumnNormalized;
    } else {
      throw ParseError("unknown confusion-matrix mode '" + mode_name + "'");
    }
    ConfusionMatrix m(j.at("classes").get<std::vector<std::string>>(), mode);
    const auto& rows = j.at("cells");
    if (!rows.is_array() || rows.size() != m.dim()) {
      throw ParseError(fmt::format("confusion matrix needs {} rows", m.dim()));
    }
    for (std::size_t p = 0; p < m.dim(); ++p) {
      if (!rows[p].is_array() || rows[p].size() != m.dim()) {
        throw ParseError(fmt::format("confusion-matrix row {} needs {} cells", p, m.dim()));
      }
      for (std::size_t t = 0; t < m.dim(); ++t) {
        const double v = rows[p][t].get<double>();
        if (v < 0.0) throw ParseError("negative confusion-matrix cell");
        m.at(p, t) = v;
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("confusion matrix: ") + e.what());
  }
}

std::string ConfusionMatrix::render() const {
  std::vector<std::string> labels = classes_;
  labels.push_back("background");
  std::size_t w = std::string_view("Predicted v").size();
  for (const auto& l : labels) w = std::max(w, l.size());
  std::size_t cw = 6;
  for (const auto& l : labels) cw = std::max(cw, l.size());

  auto cell = [&](double v) {
    return mode_ == Mode::kCounts ? fmt::format("{:>{}}", static_cast<long long>(v), cw)
                                  : fmt::format("{:>{}.2f}", v, cw);
  };
  std::string out = fmt::format("{:<{}}", "True ->", w);
  for (const auto& l : labels) out += fmt::format("  {:>{}}", l, cw);
  out += fmt::format("\n{:<{}}\n", "Predicted v", w);
  for (std::size_t p = 0; p < dim(); ++p) {
    out += fmt::format("{:<{}}", labels[p], w);
    for (std::size_t t = 0; t < dim(); ++t) out += "  " + cell(at(p, t));
    out += '\n';
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const AnnotatedImage> ground_truth,
                                 std::span<const AnnotatedImage> predictions,
                                 const ClassSet& classes, double iou_threshold,
                                 double confidence_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ConfigError(fmt::format("IoU threshold {} outside (0, 1]", iou_threshold));
  }
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    throw ConfigError(fmt::format("confidence threshold {} outside [0, 1]", confidence_threshold));
  }
  ConfusionMatrix m(classes.names());
  const std::size_t bg = m.background();

  std::map<std::string, const AnnotatedImage*> by_id;
  for (const auto& p : predictions) by_id[p.id] = &p;
  for (const auto& p : predictions) {
    const bool known = std::any_of(ground_truth.begin(), ground_truth.end(),
                                   [&](const auto& g) { return g.id == p.id; });
    if (!known) throw DatasetError("prediction for unknown image id '" + p.id + "'");
  }

  for (const auto& img : ground_truth) {
    std::vector<Detection> dets;
    if (auto it = by_id.find(img.id); it != by_id.end()) {
      for (const auto& d : it->second->detections()) {
        if (d.confidence >= confidence_threshold) dets.push_back(d);
      }
    }
    std::vector<bool> gt_used(img.boxes.size(), false);
    for (std::size_t d : confidence_order(dets)) {
      double best = -1.0;
      std::size_t best_gt = 0;
      for (std::size_t g = 0; g < img.boxes.size(); ++g) {
        if (gt_used[g]) continue;
        const double overlap = iou(dets[d].bbox, img.boxes[g].bbox);
        if (overlap >= iou_threshold && overlap > best) {
          best = overlap;
          best_gt = g;
        }
      }
      if (best >= 0.0) {
        gt_used[best_gt] = true;
        m.at(dets[d].class_id, img.boxes[best_gt].class_id) += 1.0;
      } else {
        m.at(dets[d].class_id, bg) += 1.0;
      }
    }
    for (std::size_t g = 0; g < img.boxes.size(); ++g) {
      if (!gt_used[g]) m.at(bg, img.boxes[g].class_id) += 1.0;
    }
  }
  return m;
}

}  // namespace herdpipe::eval
