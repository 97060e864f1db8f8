#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace herdpipe::pipeline {

// 8-bit samples, row-major, channels interleaved (RGB order for 3 channels).
struct RasterImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> samples;

  RasterImage() = default;
  RasterImage(int w, int h, int c, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y, int c) {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return samples[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;
};

// Positive size, 1 or 3 channels, sample count = width*height*channels.
void validate(const RasterImage& img);

// PNG or JPEG. Alpha is discarded; 16-bit images are rejected.
RasterImage read_image(const std::filesystem::path& file);
void write_png(const std::filesystem::path& file, const RasterImage& img);

}  // namespace herdpipe::pipeline
