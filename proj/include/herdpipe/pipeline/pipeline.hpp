#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/io/manifest.hpp"
#include "herdpipe/pipeline/raster.hpp"

namespace herdpipe::pipeline {

struct PipelineConfig {
  int frame_stride = 10;
  double brightness_factor = 1.2;
  double contrast_factor = 1.5;
  std::array<double, 3> normalize_mean{0.5, 0.5, 0.5};
  std::array<double, 3> normalize_std{0.5, 0.5, 0.5};
  int noise_kernel = 3;
  std::array<double, 3> split_fractions{0.7, 0.2, 0.1};  // train, valid, test
  double crop_max_zoom = 0.35;
  double grayscale_fraction = 0.20;
  int outputs_per_train_image = 2;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// Keys mirror the field names; absent keys keep their defaults, unknown keys
// are a ConfigError.
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const PipelineConfig& cfg);

// Indices 0, stride, 2*stride, ... below frame_count.
std::vector<int> frame_indices(int frame_count, int stride);

struct ExtractedFrame {
  int index = 0;
  std::string name;  // <video-id>_<index>.png
  RasterImage image;
};

// Decodes `video` and keeps every stride-th frame. The frame callback keeps
// memory bounded for long videos.
void extract_frames(const std::filesystem::path& video, const std::string& video_id, int stride,
                    const std::function<void(ExtractedFrame&&)>& on_frame);

// Brightness, contrast, then a k x k box mean with edge-replicate padding.
// Normalization is not applied to pixels; see normalization_metadata.
RasterImage preprocess(const RasterImage& img, const PipelineConfig& cfg);
io::Normalization normalization_metadata(const PipelineConfig& cfg);

// Per-split sizes for n items: each split but the last gets round-half-up(n*f)
// capped by what remains; the last takes the rest.
std::array<std::size_t, 3> split_counts(std::size_t n, const std::array<double, 3>& fractions);

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<std::string> ids;   // input order
  std::vector<io::Split> splits;  // parallel to ids

  std::array<std::size_t, 3> counts() const;
  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

// Seeded shuffle, then contiguous train/valid/test blocks of split_counts size.
SplitAssignment split(const std::vector<std::string>& ids, const std::array<double, 3>& fractions,
                      std::uint64_t seed);
// Rewrites each record's split; every record must be assigned.
void apply_split(io::DatasetManifest& manifest, const SplitAssignment& assignment);

// Pixel rectangle inside the source image.
struct CropWindow {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const CropWindow&, const CropWindow&) = default;
};

struct AugmentChoice {
  std::string source_id;
  std::string output_id;  // <source>_aug<k>
  double zoom = 0.0;
  CropWindow window;
  bool grayscale = false;
};

// Boxes moved into the window's frame and clipped to it; boxes keeping less
// than 10% of their area are dropped. Masks are dropped.
AnnotatedImage crop_annotations(const AnnotatedImage& img, const CropWindow& window);
// Crop, then optional luma conversion round(0.299R + 0.587G + 0.114B).
RasterImage apply_augmentation(const RasterImage& img, const AugmentChoice& choice);

struct AugmentResult {
  io::Dataset dataset;                // originals followed in place by their copies
  std::vector<AugmentChoice> choices;  // one per generated copy
};

// Plans and applies the annotation side of augmentation for the train split.
// Valid and test records pass through unchanged.
AugmentResult augment_train(const io::Dataset& dataset, const PipelineConfig& cfg);

}  // namespace herdpipe::pipeline
