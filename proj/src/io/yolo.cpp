#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/io/formats.hpp"
#include "text_util.hpp"

namespace herdpipe::io {

std::string write_yolo_txt(const AnnotatedImage& image) {
  if (image.width <= 0 || image.height <= 0) {
    throw ContractError(fmt::format("image '{}' has no dimensions", image.id));
  }
  const double w = image.width;
  const double h = image.height;
  std::string out;
  for (const auto& gt : image.boxes) {
    const auto& b = gt.bbox;
    if (!is_valid(b) || b.x_max > w || b.y_max > h) {
      throw ContractError(fmt::format("box ({}, {}, {}, {}) outside image '{}' ({}x{}); clip first",
                                      b.x_min, b.y_min, b.x_max, b.y_max, image.id, image.width,
                                      image.height));
    }
    out += fmt::format("{} {:.6f} {:.6f} {:.6f} {:.6f}\n", gt.class_id, (b.x_min + b.x_max) / 2.0 / w,
                       (b.y_min + b.y_max) / 2.0 / h, b.width() / w, b.height() / h);
  }
  return out;
}

AnnotatedImage parse_yolo_txt(std::string_view text, int width, int height,
                              const ClassSet& classes) {
  if (width <= 0 || height <= 0) throw ContractError("image dimensions must be positive");
  constexpr double kSlack = 1e-6;  // one unit in the last written decimal
  AnnotatedImage img;
  img.width = width;
  img.height = height;
  const auto lines = detail::split_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const int line_no = static_cast<int>(n) + 1;
    const auto fields = detail::split_whitespace(lines[n]);
    if (fields.size() != 5) {
      throw ParseError(fmt::format("expected 5 fields, got {}", fields.size()), line_no);
    }
    const auto cls = detail::parse_index(fields[0]);
    if (!cls) throw ParseError(fmt::format("class id '{}' is not an integer", fields[0]), line_no);
    if (!classes.contains(*cls)) {
      throw ParseError(fmt::format("class id {} out of range ({} classes)", *cls, classes.size()),
                       line_no);
    }
    double v[4];
    for (int i = 0; i < 4; ++i) {
      const auto d = detail::parse_double(fields[i + 1]);
      if (!d) throw ParseError(fmt::format("'{}' is not a number", fields[i + 1]), line_no);
      if (*d < 0.0 || *d > 1.0) {
        throw ParseError(fmt::format("value {} outside [0, 1]", fields[i + 1]), line_no);
      }
      v[i] = *d;
    }
    const double x0 = v[0] - v[2] / 2.0;
    const double x1 = v[0] + v[2] / 2.0;
    const double y0 = v[1] - v[3] / 2.0;
    const double y1 = v[1] + v[3] / 2.0;
    if (x0 < -kSlack || y0 < -kSlack || x1 > 1.0 + kSlack || y1 > 1.0 + kSlack) {
      throw ParseError("box extends outside the image", line_no);
    }
    auto clamp01 = [](double x) { return std::min(1.0, std::max(0.0, x)); };
    img.boxes.push_back({{clamp01(x0) * width, clamp01(y0) * height, clamp01(x1) * width,
                          clamp01(y1) * height},
                         *cls});
  }
  return img;
}

}  // namespace herdpipe::io
