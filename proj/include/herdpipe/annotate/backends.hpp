#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <vector>

#include "herdpipe/annotate/wire.hpp"
#include "herdpipe/io/manifest.hpp"
#include "herdpipe/net/backend.hpp"

namespace herdpipe::annotate {

// Backends must tolerate concurrent calls.
class Teacher {
 public:
  virtual ~Teacher() = default;
  virtual TeacherResponse detect(const TeacherRequest& request) = 0;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual SegmenterResponse segment(const SegmenterRequest& request) = 0;
};

// Test double for both stages. Answers from fixture labels keyed by image id;
// a fixture class whose name is not among the prompts is filtered out.
// Confidences come from the fixture scores, else `confidence`. Masks are the
// fixture mask of an identical fixture box, else the box as a polygon.
class MockOracle final : public Teacher, public Segmenter {
 public:
  explicit MockOracle(io::Dataset fixtures, double confidence = 1.0);

  TeacherResponse detect(const TeacherRequest& request) override;
  SegmenterResponse segment(const SegmenterRequest& request) override;

  // Sleeps up to `max` per call, varied by image id, to scramble completion order.
  void set_jitter(std::chrono::microseconds max) { jitter_ = max; }

  std::vector<TeacherRequest> detect_requests() const;
  std::vector<SegmenterRequest> segment_requests() const;

 private:
  const AnnotatedImage& fixture(const std::string& id) const;
  void wait(const std::string& id) const;

  io::Dataset fixtures_;
  double confidence_;
  std::chrono::microseconds jitter_{0};
  mutable std::mutex mutex_;
  std::vector<TeacherRequest> detect_log_;
  std::vector<SegmenterRequest> segment_log_;
};

// Builds the teacher / segmenter a spec describes. mock-oracle loads its
// fixtures from spec.fixtures (COCO JSON).
std::unique_ptr<Teacher> make_teacher(const net::BackendSpec& spec);
std::unique_ptr<Segmenter> make_segmenter(const net::BackendSpec& spec);

}  // namespace herdpipe::annotate
