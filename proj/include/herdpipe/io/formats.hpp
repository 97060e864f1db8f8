#pragma once

#include <string>
#include <string_view>

#include "herdpipe/core/types.hpp"
#include "herdpipe/io/manifest.hpp"

namespace herdpipe::io {

// YOLO text: one `class cx cy w h` line per box, geometry normalized by the
// image size with 6 decimals. Boxes must already lie inside the image.
std::string write_yolo_txt(const AnnotatedImage& image);
// The returned image has an empty id; the caller names it.
AnnotatedImage parse_yolo_txt(std::string_view text, int width, int height,
                              const ClassSet& classes);

// COCO-style document with images, categories and annotations. String image
// ids, split and source travel as extra image keys; masks become
// `segmentation`, detection confidences become `score`.
std::string write_coco_json(const Dataset& dataset);
Dataset parse_coco_json(std::string_view text);

// Pascal VOC: integer, 1-based bndbox corners. `filename` names the image
// file; parse takes the image id from its stem.
std::string write_voc_xml(const AnnotatedImage& image, const ClassSet& classes,
                          std::string_view filename);
AnnotatedImage parse_voc_xml(std::string_view text, const ClassSet& classes);

// Flat CSV, one row per box ordered by (image id, box index). The text holds
// no image sizes, so parsing needs the manifest.
std::string write_csv(const Dataset& dataset);
Dataset parse_csv(std::string_view text, const DatasetManifest& manifest);

}  // namespace herdpipe::io
