#include "herdpipe/pipeline/raster.hpp"

#include <fmt/format.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "herdpipe/error.hpp"
#include "raster_cv.hpp"

namespace herdpipe::pipeline {

RasterImage::RasterImage(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      samples(static_cast<std::size_t>(w) * h * c, fill) {
  validate(*this);
}

void validate(const RasterImage& img) {
  if (img.width <= 0 || img.height <= 0) {
    throw ContractError(fmt::format("image has no dimensions ({}x{})", img.width, img.height));
  }
  if (img.channels != 1 && img.channels != 3) {
    throw ContractError(fmt::format("unsupported channel count {}", img.channels));
  }
  const auto expected = static_cast<std::size_t>(img.width) * img.height * img.channels;
  if (img.samples.size() != expected) {
    throw ContractError(fmt::format("{} samples for a {}x{}x{} image", img.samples.size(),
                                    img.width, img.height, img.channels));
  }
}

namespace detail {

RasterImage from_mat(const cv::Mat& mat, const std::string& what) {
  if (mat.depth() != CV_8U) throw IoError(fmt::format("'{}': only 8-bit images are supported", what));
  cv::Mat rgb;
  switch (mat.channels()) {
    case 1: rgb = mat; break;
    case 3: cv::cvtColor(mat, rgb, cv::COLOR_BGR2RGB); break;
    case 4: cv::cvtColor(mat, rgb, cv::COLOR_BGRA2RGB); break;
    default: throw IoError(fmt::format("'{}': unsupported channel count {}", what, mat.channels()));
  }
  if (!rgb.isContinuous()) rgb = rgb.clone();
  RasterImage img;
  img.width = rgb.cols;
  img.height = rgb.rows;
  img.channels = rgb.channels();
  img.samples.assign(rgb.data, rgb.data + rgb.total() * rgb.elemSize());
  return img;
}

}  // namespace detail

RasterImage read_image(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw IoError(fmt::format("'{}' does not exist", file.string()));
  const cv::Mat mat = cv::imread(file.string(), cv::IMREAD_UNCHANGED);
  if (mat.empty()) throw IoError(fmt::format("'{}' is not a readable PNG or JPEG image", file.string()));
  return detail::from_mat(mat, file.string());
}

void write_png(const std::filesystem::path& file, const RasterImage& img) {
  validate(img);
  const int type = img.channels == 1 ? CV_8UC1 : CV_8UC3;
  const cv::Mat view(img.height, img.width, type, const_cast<std::uint8_t*>(img.samples.data()));
  cv::Mat bgr;
  if (img.channels == 3) {
    cv::cvtColor(view, bgr, cv::COLOR_RGB2BGR);
  } else {
    bgr = view;
  }
  std::error_code ec;
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path(), ec);
  bool ok = false;
  try {
    ok = cv::imwrite(file.string(), bgr);
  } catch (const cv::Exception& e) {
    throw IoError(fmt::format("cannot write '{}': {}", file.string(), e.what()));
  }
  if (!ok) throw IoError(fmt::format("cannot write '{}'", file.string()));
}

}  // namespace herdpipe::pipeline
