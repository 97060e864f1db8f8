#include <doctest.h>

#include <atomic>
#include <filesystem>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "herdpipe/annotate/orchestrator.hpp"
#include "herdpipe/error.hpp"
#include "herdpipe/net/http.hpp"
#include "support/stub_server.hpp"

using namespace herdpipe;
using namespace herdpipe::annotate;
namespace fs = std::filesystem;

namespace {

nlohmann::json load(const std::string& name) {
  return nlohmann::json::parse(io::read_text_file(fs::path(HERDPIPE_FIXTURES) / "wire" / name));
}

io::Dataset fixture_dataset(std::size_t n) {
  io::Dataset ds;
  ds.manifest.classes = ClassSet({"camel", "mask", "pole", "rope"});
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = fmt::format("frame_{:03}", i);
    ds.manifest.records.push_back({id, id + ".png", 640, 480, io::Split::kTrain, io::Source::kFixture});
    AnnotatedImage img{id, 640, 480, {}, {}, {}};
    for (std::size_t b = 0; b < i % 4; ++b) {
      const double x = 10.0 * (i + b);
      img.boxes.push_back({{x, 20.0 + b, x + 50.5, 200.0}, (i + b) % 4});
    }
    ds.images.push_back(std::move(img));
  }
  return ds;
}

// Teacher scripted per image id.
class ScriptedTeacher final : public Teacher {
 public:
  std::function<TeacherResponse(const TeacherRequest&)> fn;
  TeacherResponse detect(const TeacherRequest& r) override { return fn(r); }
};

net::BackendSpec http_spec(const std::string& endpoint, int retries) {
  net::BackendSpec spec;
  spec.kind = net::BackendKind::kRemoteHttp;
  spec.endpoint = endpoint;
  spec.retries = retries;
  spec.backoff_ms = 5;
  spec.timeout_ms = 2000;
  return spec;
}

}  // namespace

TEST_CASE("wire fixtures round trip losslessly") {
  for (const char* name : {"detect_request.json", "detect_response.json", "segment_request.json", "segment_response.json"}) {
    CAPTURE(name);
    const auto j = load(name);
    nlohmann::json back;
    if (std::string(name) == "detect_request.json") back = to_json(teacher_request_from_json(j));
    if (std::string(name) == "detect_response.json") back = to_json(teacher_response_from_json(j, 4));
    if (std::string(name) == "segment_request.json") back = to_json(segmenter_request_from_json(j));
    if (std::string(name) == "segment_response.json") back = to_json(segmenter_response_from_json(j, 2));
    CHECK(back == j);
  }
  const auto resp = teacher_response_from_json(load("detect_response.json"), 4);
  REQUIRE(resp.detections.size() == 2);
  CHECK(resp.detections[0].bbox == BBox{12.5, 40.0, 220.25, 300.0});
  CHECK(resp.detections[1].prompt_index == 3);
  CHECK(resp.model == "groundingdino-swint-ogc");
  CHECK(resp.latency_ms == 184.2);
}

TEST_CASE("wire validators reject malformed payloads") {
  auto resp = load("detect_response.json");
  CHECK_THROWS_AS(teacher_response_from_json(resp, 3), ProtocolError);
  auto bad = resp;
  bad["detections"][0]["confidence"] = 1.5;
  CHECK_THROWS_AS(teacher_response_from_json(bad, 4), ProtocolError);
  bad = resp;
  bad["extra"] = 1;
  CHECK_THROWS_AS(teacher_response_from_json(bad, 4), ProtocolError);
  bad = resp;
  bad.erase("model");
  CHECK_THROWS_AS(teacher_response_from_json(bad, 4), ProtocolError);
  bad = resp;
  bad["detections"][0]["bbox"] = {5, 5, 1, 1};
  CHECK_THROWS_AS(teacher_response_from_json(bad, 4), ProtocolError);
  try {
    bad = resp;
    bad["detections"][0]["prompt_index"] = "zero";
    teacher_response_from_json(bad, 4);
    FAIL("expected ProtocolError");
  } catch (const ProtocolError& e) {
    CHECK(std::string(e.what()).find("groundingdino") != std::string::npos);
  }
  CHECK_THROWS_AS(segmenter_response_from_json(load("segment_response.json"), 3), ProtocolError);
  auto req = load("detect_request.json");
  req["image_b64"] = "AAAA";
  CHECK_THROWS_AS(teacher_request_from_json(req), ProtocolError);
  req = load("detect_request.json");
  req["prompts"] = nlohmann::json::array();
  CHECK_THROWS_AS(teacher_request_from_json(req), ProtocolError);
  req = load("detect_request.json");
  req["box_threshold"] = 0;
  CHECK_THROWS_AS(teacher_request_from_json(req), ProtocolError);
}

TEST_CASE("base64") {
  for (const std::string& s : std::vector<std::string>{"", "a", "ab", "abc", "abcd", std::string("\0\xff\x10", 3)}) {
    CHECK(net::base64_decode(net::base64_encode(s)) == s);
  }
  CHECK(net::base64_encode("camel") == "Y2FtZWw=");
  CHECK_THROWS_AS(net::base64_decode("abc"), ProtocolError);
}

TEST_CASE("mock oracle") {
  const auto ds = fixture_dataset(6);
  MockOracle oracle(ds, 0.8);
  const std::vector<std::string> all{"camel", "mask", "pole", "rope"};
  const TeacherRequest req{"frame_003", {"frame_003.png", ""}, all, 0.35, 0.25};
  const auto r = oracle.detect(req);
  REQUIRE(r.detections.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.detections[i].bbox == ds.images[3].boxes[i].bbox);
    CHECK(r.detections[i].prompt_index == ds.images[3].boxes[i].class_id);
    CHECK(r.detections[i].confidence == 0.8);
  }
  CHECK(oracle.detect(req) == r);

  TeacherRequest partial = req;
  partial.prompts = {"rope", "camel"};
  const auto f = oracle.detect(partial);
  for (const auto& d : f.detections) {
    const auto name = partial.prompts[d.prompt_index];
    CHECK((name == "rope" || name == "camel"));
  }
  // frame_003 holds classes 3, 0, 1 -> rope and camel survive.
  CHECK(f.detections.size() == 2);

  TeacherRequest miss = req;
  miss.image_id = "nope";
  try {
    oracle.detect(miss);
    FAIL("expected oracle miss");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.transient());
    CHECK(std::string(e.what()).find("oracle miss") != std::string::npos);
  }
  CHECK(oracle.detect_requests().size() == 4);

  const SegmenterRequest seg{"frame_003", {"frame_003.png", ""}, {ds.images[3].boxes[0].bbox}};
  const auto masks = oracle.segment(seg);
  REQUIRE(masks.masks.size() == 1);
  CHECK(std::get<Polygon>(masks.masks[0]).vertices.size() == 4);
}

TEST_CASE("annotate with the mock oracle reproduces fixtures in order") {
  const auto ds = fixture_dataset(40);
  for (int workers : {1, 8}) {
    CAPTURE(workers);
    MockOracle oracle(ds);
    oracle.set_jitter(std::chrono::microseconds(3000));
    AnnotateOptions opt;
    opt.max_concurrent = workers;
    const auto result = annotate_dataset(ds.manifest, opt, oracle, &oracle);
    CHECK_FALSE(result.partial());
    CHECK(result.detections.images == ds.images);
    REQUIRE(result.detections.manifest.records.size() == ds.manifest.records.size());
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
      auto rec = ds.manifest.records[i];
      rec.source = io::Source::kTeacherAuto;
      CHECK(result.detections.manifest.records[i] == rec);
      CHECK(result.segmentation.images[i].masks.size() == ds.images[i].boxes.size());
    }
    CHECK(result.segmented);
    // Images without boxes never reach the segmenter.
    CHECK(oracle.segment_requests().size() == 30);
  }
}

TEST_CASE("annotate edge cases") {
  SUBCASE("no images") {
    io::DatasetManifest empty;
    MockOracle oracle(io::Dataset{});
    const auto r = annotate_dataset(empty, {}, oracle, nullptr);
    CHECK(r.detections.images.empty());
    CHECK(r.segmentation.images.empty());
    CHECK_FALSE(r.segmented);
  }
  SUBCASE("confidence filter and clipping") {
    auto ds = fixture_dataset(1);
    ScriptedTeacher teacher;
    teacher.fn = [](const TeacherRequest&) {
      TeacherResponse r;
      r.model = "scripted";
      r.detections = {{{10, 10, 50, 50}, 0, 0.34},
                      {{10, 10, 50, 50}, 1, 0.35},
                      {{-20, 400, 100, 500}, 2, 0.9},
                      {{700, 10, 800, 50}, 3, 0.99}};
      return r;
    };
    AnnotateOptions opt;
    opt.keep_scores = true;
    const auto r = annotate_dataset(ds.manifest, opt, teacher);
    const auto& boxes = r.detections.images[0].boxes;
    REQUIRE(boxes.size() == 2);
    CHECK(boxes[0] == GroundTruthBox{{10, 10, 50, 50}, 1});
    CHECK(boxes[1] == GroundTruthBox{{0, 400, 100, 480}, 2});
    CHECK(r.detections.images[0].scores == std::vector<double>{0.35, 0.9});
    CHECK(r.segmentation.images.empty());
  }
  SUBCASE("per-image failures are recorded and the run continues") {
    const auto ds = fixture_dataset(5);
    MockOracle oracle(ds);
    ScriptedTeacher teacher;
    teacher.fn = [&](const TeacherRequest& r) {
      if (r.image_id == "frame_002") throw BackendError("unreachable", true);
      if (r.image_id == "frame_004") throw ProtocolError("bad payload: {...}");
      return oracle.detect(r);
    };
    AnnotateOptions opt;
    opt.max_concurrent = 3;
    const auto r = annotate_dataset(ds.manifest, opt, teacher, &oracle);
    CHECK(r.partial());
    REQUIRE(r.failures.size() == 2);
    CHECK(r.failures[0].image_id == "frame_002");
    CHECK(r.failures[1].stage == "detect");
    CHECK(r.detections.images.size() == 3);
    CHECK(r.segmentation.images.size() == 3);
  }
  SUBCASE("prompt count must match classes") {
    const auto ds = fixture_dataset(1);
    MockOracle oracle(ds);
    AnnotateOptions opt;
    opt.prompts = {"camel"};
    CHECK_THROWS_AS(annotate_dataset(ds.manifest, opt, oracle), ConfigError);
    opt.prompts = {"a camel next to a pole", "mask", "pole", "rope"};
    CHECK_NOTHROW(annotate_dataset(ds.manifest, opt, oracle));
  }
}

TEST_CASE("http teacher retries transient failures") {
  std::atomic<int> calls{0};
  const auto canned = load("detect_response.json").dump();
  stub::Server server([&](const stub::Request& req) -> stub::Response {
    CHECK(req.path == "/v1/detect");
    if (++calls <= 2) return {500, R"({"error":"busy"})"};
    return {200, canned};
  });
  auto teacher = make_teacher(http_spec(server.endpoint(), 2));
  const TeacherRequest req{"x", {"x.png", ""}, {"camel", "mask", "pole", "rope"}, 0.35, 0.25};
  const auto r = teacher->detect(req);
  CHECK(calls == 3);
  CHECK(nlohmann::json(to_json(r)) == load("detect_response.json"));

  calls = 0;
  auto impatient = make_teacher(http_spec(server.endpoint(), 1));
  try {
    impatient->detect(req);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.transient());
  }
  CHECK(calls == 2);
}

TEST_CASE("http errors are typed") {
  std::string mode;
  std::atomic<int> calls{0};
  stub::Server server([&](const stub::Request&) -> stub::Response {
    ++calls;
    if (mode == "400") return {400, R"({"error":"bad prompt"})"};
    if (mode == "text") return {200, "<html>oops</html>"};
    if (mode == "short") return {200, R"({"masks":[{"rle":[0,1]}],"model":"m","latency_ms":1})"};
    return {200, "{}", 300};
  });
  const TeacherRequest req{"x", {"x.png", ""}, {"camel"}, 0.35, 0.25};
  mode = "400";
  try {
    make_teacher(http_spec(server.endpoint(), 3))->detect(req);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK_FALSE(e.transient());
    CHECK(std::string(e.what()).find("bad prompt") != std::string::npos);
  }
  CHECK(calls == 1);
  mode = "text";
  CHECK_THROWS_AS(make_teacher(http_spec(server.endpoint(), 0))->detect(req), ProtocolError);
  mode = "short";
  const SegmenterRequest seg{"x", {"x.png", ""}, {{0, 0, 1, 1}, {1, 1, 2, 2}}};
  CHECK_THROWS_AS(make_segmenter(http_spec(server.endpoint(), 0))->segment(seg), ProtocolError);
  mode = "slow";
  auto spec = http_spec(server.endpoint(), 0);
  spec.timeout_ms = 50;
  try {
    make_teacher(spec)->detect(req);
    FAIL("expected timeout");
  } catch (const BackendError& e) {
    CHECK(e.transient());
  }
  auto dead = http_spec("http://127.0.0.1:1", 0);
  CHECK_THROWS_AS(make_teacher(dead)->detect(req), BackendError);
}

TEST_CASE("subprocess teacher speaks json lines") {
  net::BackendSpec spec;
  spec.kind = net::BackendKind::kSubprocess;
  spec.command = {"sh", "-c",
                  R"(while read line; do echo '{"detections":[{"bbox":[1,2,3,4],"prompt_index":0,"confidence":0.5}],"model":"sh","latency_ms":0}'; done)"};
  spec.timeout_ms = 5000;
  auto teacher = make_teacher(spec);
  const TeacherRequest req{"x", {"x.png", ""}, {"camel"}, 0.35, 0.25};
  for (int i = 0; i < 3; ++i) {
    const auto r = teacher->detect(req);
    REQUIRE(r.detections.size() == 1);
    CHECK(r.detections[0].bbox == BBox{1, 2, 3, 4});
  }

  spec.command = {"sh", "-c", "read line; echo not-json"};
  CHECK_THROWS_AS(make_teacher(spec)->detect(req), ProtocolError);
  spec.command = {"sh", "-c", "exit 0"};
  spec.retries = 1;
  spec.backoff_ms = 1;
  try {
    make_teacher(spec)->detect(req);
    FAIL("expected BackendError");
  } catch (const BackendError& e) {
    CHECK(e.transient());
  }
  spec.command = {"sh", "-c", "sleep 5"};
  spec.timeout_ms = 100;
  spec.retries = 0;
  CHECK_THROWS_AS(make_teacher(spec)->detect(req), BackendError);
}

TEST_CASE("backend spec parsing") {
  const auto spec = net::backend_spec_from_json(
      nlohmann::json::parse(R"({"kind":"remote-http","endpoint":"http://h:1","retries":0})"));
  CHECK(spec.retries == 0);
  CHECK(spec.backoff_ms == 500);
  CHECK(net::backend_spec_from_json(nlohmann::json::parse(net::to_json(spec).dump())).endpoint == "http://h:1");
  CHECK_THROWS_AS(net::backend_spec_from_json(nlohmann::json::parse(R"({"kind":"grpc"})")), ConfigError);
  CHECK_THROWS_AS(net::backend_spec_from_json(nlohmann::json::parse(R"({"kind":"remote-http","endpoint":"h"})")),
                  ConfigError);
  CHECK_THROWS_AS(
      net::backend_spec_from_json(nlohmann::json::parse(R"({"kind":"subprocess","command":["x"],"timeout_ms":0})")),
      ConfigError);
  CHECK_THROWS_AS(net::backend_spec_from_json(nlohmann::json::parse(R"({"kind":"mock-oracle","retry":1})")),
                  ConfigError);
}
