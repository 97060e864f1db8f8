#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace herdpipe {

using ClassId = std::size_t;

// Axis-aligned box in absolute pixels, xyxy, top-left origin.
struct BBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }

  friend bool operator==(const BBox&, const BBox&) = default;
};

// Finite, non-negative and ordered.
bool is_valid(const BBox& box) noexcept;
void validate(const BBox& box);

// Ordered, unique, case-sensitive class names; the position is the class id.
class ClassSet {
 public:
  ClassSet() = default;
  explicit ClassSet(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  bool empty() const noexcept { return names_.empty(); }
  const std::string& name(ClassId id) const;
  std::optional<ClassId> find(const std::string& name) const;
  // Throws DatasetError listing the known classes.
  ClassId id_of(const std::string& name) const;
  bool contains(ClassId id) const noexcept { return id < names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const ClassSet&, const ClassSet&) = default;

 private:
  std::vector<std::string> names_;
};

struct Detection {
  BBox bbox;
  ClassId class_id = 0;
  double confidence = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct GroundTruthBox {
  BBox bbox;
  ClassId class_id = 0;

  friend bool operator==(const GroundTruthBox&, const GroundTruthBox&) = default;
};

// Alternating run lengths over row-major pixels, starting with a background
// (0) run. The runs sum to width * height.
struct RunLength {
  std::vector<std::uint32_t> counts;
  friend bool operator==(const RunLength&, const RunLength&) = default;
};

struct Polygon {
  std::vector<std::pair<double, double>> vertices;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

struct MaskAnnotation {
  ClassId class_id = 0;
  int width = 0;
  int height = 0;
  std::variant<RunLength, Polygon> encoding;

  friend bool operator==(const MaskAnnotation&, const MaskAnnotation&) = default;
};

void validate(const MaskAnnotation& mask);

// An image with its label set. `scores` is empty for ground truth and holds
// one confidence per box for model output. `masks` is empty or holds one mask
// per box, in box order.
struct AnnotatedImage {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<GroundTruthBox> boxes;
  std::vector<double> scores;
  std::vector<MaskAnnotation> masks;

  bool has_scores() const noexcept { return !scores.empty(); }
  std::vector<Detection> detections() const;

  friend bool operator==(const AnnotatedImage&, const AnnotatedImage&) = default;
};

// Checks box containment, class ids against `classes`, and the parallel
// score/mask vectors.
void validate(const AnnotatedImage& image, const ClassSet& classes);

}  // namespace herdpipe
