#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/annotate/backends.hpp"
#include "herdpipe/io/manifest.hpp"

namespace herdpipe::annotate {

struct AnnotateOptions {
  // Prompt i labels class i of the manifest's class set. Empty means the
  // class names themselves.
  std::vector<std::string> prompts;
  double box_threshold = 0.35;
  double text_threshold = 0.25;
  int max_concurrent = 1;
  // Send pixels inline as base64 instead of a path the backend can read.
  bool inline_images = false;
  // Keep teacher confidences as scores on the stored boxes.
  bool keep_scores = false;
  // Manifest paths are relative to this directory.
  std::filesystem::path image_root;
};

struct AnnotationFailure {
  std::string image_id;
  std::string stage;  // "detect" or "segment"
  std::string message;
};

struct AnnotateResult {
  io::Dataset detections;
  io::Dataset segmentation;  // empty without a segmenter
  bool segmented = false;
  std::vector<AnnotationFailure> failures;

  bool partial() const noexcept { return !failures.empty(); }
};

// Loop 1 asks the teacher about every image, keeps detections at or above
// box_threshold, clips them to the image and stores them in input order.
// Loop 2, when a segmenter is given, asks for one mask per stored box.
// An image whose backend call fails is left out and listed in `failures`.
AnnotateResult annotate_dataset(const io::DatasetManifest& images, const AnnotateOptions& options,
                                Teacher& teacher, Segmenter* segmenter = nullptr);

// Writes detections.json, segmentation.json (when segmented) and
// failures.json as COCO JSON / plain JSON under `dir`.
void persist(const AnnotateResult& result, const std::filesystem::path& dir);

nlohmann::ordered_json to_json(const std::vector<AnnotationFailure>& failures);

}  // namespace herdpipe::annotate
