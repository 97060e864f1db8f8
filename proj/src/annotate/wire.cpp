#include "herdpipe/annotate/wire.hpp"

#include <cmath>
#include <initializer_list>
#include <string_view>

#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/net/backend.hpp"

namespace herdpipe::annotate {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void reject(const nlohmann::json& j, std::string_view what) {
  throw ProtocolError(fmt::format("{} in payload: {}", what, net::excerpt(j.dump())));
}

void only_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
               std::string_view what) {
  if (!j.is_object()) reject(j, fmt::format("{} must be an object", what));
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) reject(j, fmt::format("unexpected key '{}' in {}", key, what));
  }
}

const nlohmann::json& need(const nlohmann::json& j, const char* key, std::string_view what) {
  if (!j.contains(key)) reject(j, fmt::format("{} lacks '{}'", what, key));
  return j[key];
}

double number(const nlohmann::json& root, const nlohmann::json& v, std::string_view what) {
  if (!v.is_number()) reject(root, fmt::format("{} must be a number", what));
  const double d = v.get<double>();
  if (!std::isfinite(d)) reject(root, fmt::format("{} must be finite", what));
  return d;
}

std::string string_field(const nlohmann::json& root, const nlohmann::json& v, std::string_view what) {
  if (!v.is_string()) reject(root, fmt::format("{} must be a string", what));
  return v.get<std::string>();
}

BBox box_from(const nlohmann::json& root, const nlohmann::json& v, std::string_view what) {
  if (!v.is_array() || v.size() != 4) reject(root, fmt::format("{} must be [x_min, y_min, x_max, y_max]", what));
  const BBox b{number(root, v[0], what), number(root, v[1], what), number(root, v[2], what),
               number(root, v[3], what)};
  if (b.x_min > b.x_max || b.y_min > b.y_max) reject(root, fmt::format("{} has min > max", what));
  return b;
}

ImageRef image_from(const nlohmann::json& j, std::string_view what) {
  const bool has_path = j.contains("image_path");
  const bool has_b64 = j.contains("image_b64");
  if (has_path == has_b64) reject(j, fmt::format("{} needs exactly one of image_path, image_b64", what));
  ImageRef ref;
  if (has_path) ref.path = string_field(j, j["image_path"], "image_path");
  if (has_b64) ref.b64 = string_field(j, j["image_b64"], "image_b64");
  if (ref.path.empty() && ref.b64.empty()) reject(j, "empty image reference");
  return ref;
}

void put_image(ojson& j, const ImageRef& ref) {
  if (!ref.b64.empty()) {
    j["image_b64"] = ref.b64;
  } else {
    j["image_path"] = ref.path;
  }
}

ojson box_json(const BBox& b) { return ojson::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

void model_fields(const nlohmann::json& j, std::string& model, double& latency, std::string_view what) {
  model = string_field(j, need(j, "model", what), "model");
  latency = number(j, need(j, "latency_ms", what), "latency_ms");
  if (latency < 0.0) reject(j, "latency_ms must be non-negative");
}

}  // namespace

void TeacherRequest::validate() const {
  if (prompts.empty()) throw ContractError("teacher request needs at least one prompt");
  for (const auto& p : prompts) {
    if (p.empty()) throw ContractError("teacher prompts must be non-empty");
  }
  for (double t : {box_threshold, text_threshold}) {
    if (!(t > 0.0 && t <= 1.0)) throw ContractError("teacher thresholds must lie in (0, 1]");
  }
  if (image.path.empty() == image.b64.empty()) {
    throw ContractError("teacher request needs exactly one of image path or inline image");
  }
}

ojson to_json(const TeacherRequest& r) {
  ojson j;
  put_image(j, r.image);
  j["prompts"] = r.prompts;
  j["box_threshold"] = r.box_threshold;
  j["text_threshold"] = r.text_threshold;
  return j;
}

ojson to_json(const TeacherResponse& r) {
  ojson dets = ojson::array();
  for (const auto& d : r.detections) {
    dets.push_back(ojson{{"bbox", box_json(d.bbox)}, {"prompt_index", d.prompt_index}, {"confidence", d.confidence}});
  }
  return ojson{{"detections", std::move(dets)}, {"model", r.model}, {"latency_ms", r.latency_ms}};
}

ojson to_json(const SegmenterRequest& r) {
  ojson j;
  put_image(j, r.image);
  ojson boxes = ojson::array();
  for (const auto& b : r.boxes) boxes.push_back(box_json(b));
  j["boxes"] = std::move(boxes);
  return j;
}

ojson to_json(const SegmenterResponse& r) {
  ojson masks = ojson::array();
  for (const auto& m : r.masks) {
    if (const auto* rle = std::get_if<RunLength>(&m)) {
      masks.push_back(ojson{{"rle", rle->counts}});
    } else {
      ojson pts = ojson::array();
      for (const auto& [x, y] : std::get<Polygon>(m).vertices) pts.push_back(ojson::array({x, y}));
      masks.push_back(ojson{{"polygon", std::move(pts)}});
    }
  }
  return ojson{{"masks", std::move(masks)}, {"model", r.model}, {"latency_ms", r.latency_ms}};
}

TeacherRequest teacher_request_from_json(const nlohmann::json& j) {
  only_keys(j, {"image_b64", "image_path", "prompts", "box_threshold", "text_threshold"}, "detect request");
  TeacherRequest r;
  r.image = image_from(j, "detect request");
  const auto& prompts = need(j, "prompts", "detect request");
  if (!prompts.is_array()) reject(j, "prompts must be an array");
  for (const auto& p : prompts) r.prompts.push_back(string_field(j, p, "prompt"));
  r.box_threshold = number(j, need(j, "box_threshold", "detect request"), "box_threshold");
  r.text_threshold = number(j, need(j, "text_threshold", "detect request"), "text_threshold");
  try {
    r.validate();
  } catch (const ContractError& e) {
    reject(j, e.what());
  }
  return r;
}

TeacherResponse teacher_response_from_json(const nlohmann::json& j, std::size_t n_prompts) {
  only_keys(j, {"detections", "model", "latency_ms"}, "detect response");
  TeacherResponse r;
  const auto& dets = need(j, "detections", "detect response");
  if (!dets.is_array()) reject(j, "detections must be an array");
  for (const auto& d : dets) {
    only_keys(d, {"bbox", "prompt_index", "confidence"}, "detection");
    TeacherDetection td;
    td.bbox = box_from(j, need(d, "bbox", "detection"), "bbox");
    const auto& idx = need(d, "prompt_index", "detection");
    if (!idx.is_number_integer() || idx.get<long long>() < 0 ||
        static_cast<std::size_t>(idx.get<long long>()) >= n_prompts) {
      reject(j, fmt::format("prompt_index must be an integer in [0, {})", n_prompts));
    }
    td.prompt_index = idx.get<std::size_t>();
    td.confidence = number(j, need(d, "confidence", "detection"), "confidence");
    if (td.confidence < 0.0 || td.confidence > 1.0) reject(j, "confidence outside [0, 1]");
    r.detections.push_back(td);
  }
  model_fields(j, r.model, r.latency_ms, "detect response");
  return r;
}

SegmenterRequest segmenter_request_from_json(const nlohmann::json& j) {
  only_keys(j, {"image_b64", "image_path", "boxes"}, "segment request");
  SegmenterRequest r;
  r.image = image_from(j, "segment request");
  const auto& boxes = need(j, "boxes", "segment request");
  if (!boxes.is_array()) reject(j, "boxes must be an array");
  for (const auto& b : boxes) r.boxes.push_back(box_from(j, b, "box"));
  return r;
}

SegmenterResponse segmenter_response_from_json(const nlohmann::json& j, std::size_t n_boxes) {
  only_keys(j, {"masks", "model", "latency_ms"}, "segment response");
  SegmenterResponse r;
  const auto& masks = need(j, "masks", "segment response");
  if (!masks.is_array()) reject(j, "masks must be an array");
  if (masks.size() != n_boxes) {
    reject(j, fmt::format("segmenter returned {} masks for {} boxes", masks.size(), n_boxes));
  }
  for (const auto& m : masks) {
    only_keys(m, {"rle", "polygon"}, "mask");
    if (m.contains("rle") == m.contains("polygon")) reject(j, "mask needs exactly one of rle, polygon");
    if (m.contains("rle")) {
      RunLength rle;
      if (!m["rle"].is_array()) reject(j, "rle must be an array");
      for (const auto& c : m["rle"]) {
        if (!c.is_number_integer() || c.get<long long>() < 0 || c.get<long long>() > 0xffffffffLL) {
          reject(j, "rle counts must be non-negative integers");
        }
        rle.counts.push_back(c.get<std::uint32_t>());
      }
      r.masks.emplace_back(std::move(rle));
    } else {
      Polygon poly;
      if (!m["polygon"].is_array()) reject(j, "polygon must be an array");
      for (const auto& p : m["polygon"]) {
        if (!p.is_array() || p.size() != 2) reject(j, "polygon vertices must be [x, y]");
        poly.vertices.emplace_back(number(j, p[0], "polygon x"), number(j, p[1], "polygon y"));
      }
      r.masks.emplace_back(std::move(poly));
    }
  }
  model_fields(j, r.model, r.latency_ms, "segment response");
  return r;
}

}  // namespace herdpipe::annotate
