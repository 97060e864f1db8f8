#pragma once

#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/core/types.hpp"

namespace herdpipe::annotate {

// Exactly one of path / b64 is set.
struct ImageRef {
  std::string path;
  std::string b64;

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct TeacherRequest {
  std::string image_id;  // in-process only, never sent
  ImageRef image;
  std::vector<std::string> prompts;
  double box_threshold = 0.35;
  double text_threshold = 0.25;

  // Non-empty prompts, thresholds in (0, 1], one image reference.
  void validate() const;
  friend bool operator==(const TeacherRequest&, const TeacherRequest&) = default;
};

struct TeacherDetection {
  BBox bbox;  // absolute pixels
  std::size_t prompt_index = 0;
  double confidence = 0.0;

  friend bool operator==(const TeacherDetection&, const TeacherDetection&) = default;
};

struct TeacherResponse {
  std::vector<TeacherDetection> detections;
  std::string model;
  double latency_ms = 0.0;

  friend bool operator==(const TeacherResponse&, const TeacherResponse&) = default;
};

using MaskShape = std::variant<RunLength, Polygon>;

struct SegmenterRequest {
  std::string image_id;  // in-process only, never sent
  ImageRef image;
  std::vector<BBox> boxes;

  friend bool operator==(const SegmenterRequest&, const SegmenterRequest&) = default;
};

// One mask per request box, same order. RLE runs are row-major over the
// whole image and start with a background run.
struct SegmenterResponse {
  std::vector<MaskShape> masks;
  std::string model;
  double latency_ms = 0.0;

  friend bool operator==(const SegmenterResponse&, const SegmenterResponse&) = default;
};

nlohmann::ordered_json to_json(const TeacherRequest& r);
nlohmann::ordered_json to_json(const TeacherResponse& r);
nlohmann::ordered_json to_json(const SegmenterRequest& r);
nlohmann::ordered_json to_json(const SegmenterResponse& r);

// Strict schema checks; violations are ProtocolErrors quoting the payload.
TeacherRequest teacher_request_from_json(const nlohmann::json& j);
// Prompt indices must be below n_prompts.
TeacherResponse teacher_response_from_json(const nlohmann::json& j, std::size_t n_prompts);
SegmenterRequest segmenter_request_from_json(const nlohmann::json& j);
// The mask count must equal n_boxes.
SegmenterResponse segmenter_response_from_json(const nlohmann::json& j, std::size_t n_boxes);

}  // namespace herdpipe::annotate
