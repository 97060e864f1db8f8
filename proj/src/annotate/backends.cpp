#include "herdpipe/annotate/backends.hpp"

#include <functional>
#include <thread>

#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/io/convert.hpp"
#include "herdpipe/net/http.hpp"
#include "herdpipe/net/subprocess.hpp"

namespace herdpipe::annotate {

MockOracle::MockOracle(io::Dataset fixtures, double confidence)
    : fixtures_(std::move(fixtures)), confidence_(confidence) {
  fixtures_.validate();
}

const AnnotatedImage& MockOracle::fixture(const std::string& id) const {
  for (const auto& img : fixtures_.images) {
    if (img.id == id) return img;
  }
  throw BackendError(fmt::format("oracle miss: no fixture labels for image '{}'", id), false);
}

void MockOracle::wait(const std::string& id) const {
  if (jitter_.count() <= 0) return;
  const auto h = std::hash<std::string>{}(id);
  std::this_thread::sleep_for(std::chrono::microseconds(h % static_cast<std::size_t>(jitter_.count())));
}

TeacherResponse MockOracle::detect(const TeacherRequest& request) {
  request.validate();
  {
    std::lock_guard lock(mutex_);
    detect_log_.push_back(request);
  }
  const auto& img = fixture(request.image_id);
  wait(request.image_id);
  TeacherResponse r;
  r.model = "mock-oracle";
  for (std::size_t i = 0; i < img.boxes.size(); ++i) {
    const auto& name = fixtures_.manifest.classes.name(img.boxes[i].class_id);
    const auto it = std::find(request.prompts.begin(), request.prompts.end(), name);
    if (it == request.prompts.end()) continue;
    r.detections.push_back({img.boxes[i].bbox, static_cast<std::size_t>(it - request.prompts.begin()),
                            img.scores.empty() ? confidence_ : img.scores[i]});
  }
  return r;
}

SegmenterResponse MockOracle::segment(const SegmenterRequest& request) {
  {
    std::lock_guard lock(mutex_);
    segment_log_.push_back(request);
  }
  const auto& img = fixture(request.image_id);
  wait(request.image_id);
  SegmenterResponse r;
  r.model = "mock-oracle";
  for (const auto& box : request.boxes) {
    std::optional<MaskShape> shape;
    for (std::size_t i = 0; i < img.masks.size() && !shape; ++i) {
      if (img.boxes[i].bbox == box) shape = img.masks[i].encoding;
    }
    if (!shape) {
      shape = Polygon{{{box.x_min, box.y_min}, {box.x_max, box.y_min}, {box.x_max, box.y_max}, {box.x_min, box.y_max}}};
    }
    r.masks.push_back(std::move(*shape));
  }
  return r;
}

std::vector<TeacherRequest> MockOracle::detect_requests() const {
  std::lock_guard lock(mutex_);
  return detect_log_;
}

std::vector<SegmenterRequest> MockOracle::segment_requests() const {
  std::lock_guard lock(mutex_);
  return segment_log_;
}

namespace {

class HttpTeacher final : public Teacher {
 public:
  explicit HttpTeacher(const net::BackendSpec& spec) : client_(spec) {}
  TeacherResponse detect(const TeacherRequest& request) override {
    request.validate();
    return teacher_response_from_json(client_.post("/v1/detect", to_json(request)), request.prompts.size());
  }

 private:
  net::HttpClient client_;
};

class HttpSegmenter final : public Segmenter {
 public:
  explicit HttpSegmenter(const net::BackendSpec& spec) : client_(spec) {}
  SegmenterResponse segment(const SegmenterRequest& request) override {
    return segmenter_response_from_json(client_.post("/v1/segment", to_json(request)), request.boxes.size());
  }

 private:
  net::HttpClient client_;
};

nlohmann::json parse_line(const std::string& line) {
  try {
    return nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    throw ProtocolError(fmt::format("subprocess response is not JSON: {}", net::excerpt(line)));
  }
}

class SubprocessTeacher final : public Teacher {
 public:
  explicit SubprocessTeacher(const net::BackendSpec& spec) : spec_(spec), process_(spec.command, spec.timeout_ms) {}
  TeacherResponse detect(const TeacherRequest& request) override {
    request.validate();
    const auto line = net::with_retries(spec_, [&] { return process_.request(to_json(request).dump()); });
    return teacher_response_from_json(parse_line(line), request.prompts.size());
  }

 private:
  net::BackendSpec spec_;
  net::LineProcess process_;
};

class SubprocessSegmenter final : public Segmenter {
 public:
  explicit SubprocessSegmenter(const net::BackendSpec& spec) : spec_(spec), process_(spec.command, spec.timeout_ms) {}
  SegmenterResponse segment(const SegmenterRequest& request) override {
    const auto line = net::with_retries(spec_, [&] { return process_.request(to_json(request).dump()); });
    return segmenter_response_from_json(parse_line(line), request.boxes.size());
  }

 private:
  net::BackendSpec spec_;
  net::LineProcess process_;
};

std::unique_ptr<MockOracle> make_mock(const net::BackendSpec& spec) {
  if (spec.fixtures.empty()) throw ConfigError("mock-oracle backend needs a fixtures file");
  return std::make_unique<MockOracle>(io::read_dataset(spec.fixtures, io::Format::kCocoJson));
}

}  // namespace

std::unique_ptr<Teacher> make_teacher(const net::BackendSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case net::BackendKind::kMockOracle: return make_mock(spec);
    case net::BackendKind::kRemoteHttp: return std::make_unique<HttpTeacher>(spec);
    case net::BackendKind::kSubprocess: return std::make_unique<SubprocessTeacher>(spec);
  }
  throw ConfigError("unsupported teacher backend");
}

std::unique_ptr<Segmenter> make_segmenter(const net::BackendSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case net::BackendKind::kMockOracle: return make_mock(spec);
    case net::BackendKind::kRemoteHttp: return std::make_unique<HttpSegmenter>(spec);
    case net::BackendKind::kSubprocess: return std::make_unique<SubprocessSegmenter>(spec);
  }
  throw ConfigError("unsupported segmenter backend");
}

}  // namespace herdpipe::annotate
