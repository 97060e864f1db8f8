#include "herdpipe/core/types.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include <fmt/format.h>

#include "herdpipe/error.hpp"

namespace herdpipe {

bool is_valid(const BBox& box) noexcept {
  const double v[] = {box.x_min, box.y_min, box.x_max, box.y_max};
  for (double c : v) {
    if (!std::isfinite(c) || c < 0.0) return false;
  }
  return box.x_min <= box.x_max && box.y_min <= box.y_max;
}

void validate(const BBox& box) {
  if (!is_valid(box)) {
    throw ContractError(fmt::format("invalid box ({}, {}, {}, {})", box.x_min, box.y_min,
                                    box.x_max, box.y_max));
  }
}

ClassSet::ClassSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ConfigError("class set must not be empty");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw ConfigError("class name must not be empty");
    if (!seen.insert(n).second) throw ConfigError("duplicate class name '" + n + "'");
  }
}

const std::string& ClassSet::name(ClassId id) const {
  if (!contains(id)) {
    throw DatasetError(fmt::format("class id {} out of range (have {})", id, names_.size()));
  }
  return names_[id];
}

std::optional<ClassId> ClassSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

ClassId ClassSet::id_of(const std::string& name) const {
  if (auto id = find(name)) return *id;
  throw DatasetError(
      fmt::format("unknown class '{}'; known classes: {}", name, fmt::join(names_, ", ")));
}

void validate(const MaskAnnotation& mask) {
  if (mask.width <= 0 || mask.height <= 0) {
    throw ContractError("mask dimensions must be positive");
  }
  if (const auto* rle = std::get_if<RunLength>(&mask.encoding)) {
    const auto total = std::accumulate(rle->counts.begin(), rle->counts.end(), std::uint64_t{0});
    const auto expected = static_cast<std::uint64_t>(mask.width) * mask.height;
    if (total != expected) {
      throw ContractError(fmt::format("run-length total {} != {}x{}", total, mask.width, mask.height));
    }
  } else {
    const auto& poly = std::get<Polygon>(mask.encoding);
    if (poly.vertices.size() < 3) throw ContractError("polygon needs at least 3 vertices");
    for (const auto& [x, y] : poly.vertices) {
      if (!(x >= 0.0 && y >= 0.0 && x <= mask.width && y <= mask.height)) {
        throw ContractError(fmt::format("polygon vertex ({}, {}) outside {}x{}", x, y, mask.width,
                                        mask.height));
      }
    }
  }
}

std::vector<Detection> AnnotatedImage::detections() const {
  std::vector<Detection> out;
  out.reserve(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    out.push_back({boxes[i].bbox, boxes[i].class_id, scores.empty() ? 1.0 : scores[i]});
  }
  return out;
}

void validate(const AnnotatedImage& image, const ClassSet& classes) {
  if (image.width <= 0 || image.height <= 0) {
    throw ContractError(fmt::format("image '{}' has no dimensions", image.id));
  }
  for (const auto& gt : image.boxes) {
    validate(gt.bbox);
    if (gt.bbox.x_max > image.width || gt.bbox.y_max > image.height) {
      throw ContractError(fmt::format("box outside image '{}' ({}x{})", image.id, image.width,
                                      image.height));
    }
    if (!classes.contains(gt.class_id)) {
      throw DatasetError(fmt::format("class id {} out of range in image '{}'", gt.class_id, image.id));
    }
  }
  if (!image.scores.empty()) {
    if (image.scores.size() != image.boxes.size()) {
      throw ContractError(fmt::format("image '{}': {} scores for {} boxes", image.id,
                                      image.scores.size(), image.boxes.size()));
    }
    for (double s : image.scores) {
      if (!(s >= 0.0 && s <= 1.0)) {
        throw ContractError(fmt::format("image '{}': confidence {} outside [0,1]", image.id, s));
      }
    }
  }
  if (!image.masks.empty()) {
    if (image.masks.size() != image.boxes.size()) {
      throw ContractError(fmt::format("image '{}': {} masks for {} boxes", image.id,
                                      image.masks.size(), image.boxes.size()));
    }
    for (const auto& m : image.masks) validate(m);
  }
}

}  // namespace herdpipe
