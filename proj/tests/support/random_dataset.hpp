#pragma once

// Random datasets for format round-trip tests.

#include <random>
#include <string>

#include "herdpipe/io/manifest.hpp"

namespace testdata {

using namespace herdpipe;

struct DatasetOptions {
  bool masks = false;
  bool scores = false;
  bool integer_boxes = false;
  int max_side = 1000;
};

inline RunLength encode_bits(const std::vector<std::uint8_t>& bits) {
  RunLength rle;
  std::uint8_t current = 0;
  std::uint32_t count = 0;
  for (auto b : bits) {
    if (b != current) {
      rle.counts.push_back(count);
      count = 0;
      current = b;
    }
    ++count;
  }
  rle.counts.push_back(count);
  return rle;
}

inline io::Dataset random_dataset(std::mt19937_64& rng, const DatasetOptions& opt) {
  std::uniform_int_distribution<int> n_classes_dist(1, 5);
  std::uniform_int_distribution<int> n_images_dist(0, 6);
  std::uniform_int_distribution<int> n_boxes_dist(0, 5);
  std::uniform_int_distribution<int> side_dist(1, opt.max_side);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  static const char* kNames[] = {"Camel", "Mask", "Pole", "Rope", "a \"quoted\", name"};
  const int n_classes = n_classes_dist(rng);
  std::vector<std::string> names(kNames, kNames + n_classes);

  io::Dataset ds;
  ds.manifest.classes = ClassSet(names);
  const int n_images = n_images_dist(rng);
  for (int i = 0; i < n_images; ++i) {
    io::ManifestRecord r;
    r.id = "img_" + std::to_string(i) + (i % 2 ? "_b" : "");
    r.path = "frames/" + r.id + ".png";
    r.width = side_dist(rng);
    r.height = side_dist(rng);
    r.split = static_cast<io::Split>(rng() % 3);
    r.source = static_cast<io::Source>(rng() % 3);

    AnnotatedImage img{r.id, r.width, r.height, {}, {}, {}};
    const int n_boxes = n_boxes_dist(rng);
    for (int b = 0; b < n_boxes; ++b) {
      auto coord = [&](int extent) {
        double v = unit(rng) * extent;
        return opt.integer_boxes ? std::floor(v) : v;
      };
      double x0 = coord(r.width), x1 = coord(r.width), y0 = coord(r.height), y1 = coord(r.height);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      img.boxes.push_back({{x0, y0, x1, y1}, static_cast<ClassId>(rng() % n_classes)});
      if (opt.scores) img.scores.push_back(std::round(unit(rng) * 1000.0) / 1000.0);
      if (opt.masks) {
        const auto cls = img.boxes.back().class_id;
        if (r.width * r.height <= 4096 && rng() % 2) {
          std::vector<std::uint8_t> bits(static_cast<std::size_t>(r.width) * r.height);
          for (auto& bit : bits) bit = rng() % 3 == 0;
          img.masks.push_back({cls, r.width, r.height, encode_bits(bits)});
        } else {
          Polygon p;
          for (int v = 0; v < 3 + static_cast<int>(rng() % 4); ++v) {
            p.vertices.emplace_back(unit(rng) * r.width, unit(rng) * r.height);
          }
          img.masks.push_back({cls, r.width, r.height, std::move(p)});
        }
      }
    }
    // A dataset either has scores everywhere or nowhere; masks likewise.
    ds.manifest.records.push_back(std::move(r));
    ds.images.push_back(std::move(img));
  }
  return ds;
}

// Box-wise comparison with a per-coordinate tolerance in pixels.
inline bool boxes_close(const AnnotatedImage& a, const AnnotatedImage& b, double tol) {
  if (a.boxes.size() != b.boxes.size()) return false;
  for (std::size_t i = 0; i < a.boxes.size(); ++i) {
    const auto& p = a.boxes[i].bbox;
    const auto& q = b.boxes[i].bbox;
    if (a.boxes[i].class_id != b.boxes[i].class_id) return false;
    if (std::abs(p.x_min - q.x_min) > tol || std::abs(p.y_min - q.y_min) > tol ||
        std::abs(p.x_max - q.x_max) > tol || std::abs(p.y_max - q.y_max) > tol) {
      return false;
    }
  }
  return true;
}

}  // namespace testdata
