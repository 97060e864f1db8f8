#include <doctest.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "herdpipe/distill/report.hpp"
#include "herdpipe/distill/trainer.hpp"
#include "herdpipe/error.hpp"
#include "herdpipe/io/manifest.hpp"
#include "support/distill_scripts.hpp"
#include "support/stub_server.hpp"

namespace fs = std::filesystem;
using namespace herdpipe;
using namespace herdpipe::distill;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / fmt::format("herdpipe_distill_{}_{}", name, ::getpid());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// HERDPIPE_UPDATE_GOLDEN=1 rewrites the golden files instead of comparing.
void check_golden(const json& actual, const std::string& name) {
  const fs::path file = fs::path(HERDPIPE_GOLDEN) / name;
  if (std::getenv("HERDPIPE_UPDATE_GOLDEN")) io::write_text_file(file, actual.dump(2) + "\n");
  const auto expected = json::parse(io::read_text_file(file));
  CHECK_MESSAGE(actual == expected, fmt::format("{} differs:\n{}", name, actual.dump(2)));
}

std::vector<RunSummary> published_runs() {
  return load_summaries(json::parse(io::read_text_file(fs::path(HERDPIPE_FIXTURES) / "published_runs.json")));
}

const RunSummary& by_id(const std::vector<RunSummary>& runs, const std::string& id) {
  for (const auto& r : runs) {
    if (r.run_id == id) return r;
  }
  throw std::runtime_error("no run " + id);
}

}  // namespace

TEST_CASE("hyperparameter defaults and parsing") {
  const auto v8 = default_hyperparams("YOLOv8s");
  CHECK(v8.num_epochs == 50);
  CHECK(v8.batch_size == 16);
  CHECK(v8.lr0 == 0.01);
  CHECK(v8.lrf == 0.01);
  CHECK(v8.momentum == 0.937);
  CHECK(v8.weight_decay == 0.001);
  CHECK(v8.optimizer == "SGD");
  CHECK(v8.image_size == 1024);
  const auto v7 = default_hyperparams("YOLOv7");
  CHECK(v7.lrf == 0.1);
  CHECK(v7.weight_decay == 0.0005);
  CHECK(default_hyperparams("YOLOv5").weight_decay == 0.0005);

  CHECK(hyperparams_from_json(json(to_json(v7))) == v7);
  const auto partial = hyperparams_from_json({{"model_variant", "YOLOv7"}, {"num_epochs", 5}});
  CHECK(partial.num_epochs == 5);
  CHECK(partial.lrf == 0.1);
  CHECK_THROWS_AS(hyperparams_from_json({{"learning_rate", 0.1}}), ConfigError);
  CHECK_THROWS_AS(hyperparams_from_json({{"num_epochs", 0}}), ConfigError);
}

TEST_CASE("epoch records parse strictly") {
  const auto j = testdata::epoch_json(2);
  const auto rec = epoch_record_from_json(j);
  CHECK(rec.epoch == 2);
  CHECK(rec.batches == 40);
  CHECK(json(to_json(rec)) == j);

  auto nan = j;
  nan["val"]["cls"] = nullptr;
  CHECK(std::isnan(epoch_record_from_json(nan).val.cls));
  CHECK_FALSE(epoch_record_from_json(nan).val.finite());

  auto over = j;
  over["metrics"]["ap"] = 1.2;
  CHECK_THROWS_AS(epoch_record_from_json(over), ProtocolError);
  auto unknown = j;
  unknown["lr"] = 0.01;
  CHECK_THROWS_AS(epoch_record_from_json(unknown), ProtocolError);
  auto zero = j;
  zero["epoch"] = 0;
  CHECK_THROWS_AS(epoch_record_from_json(zero), ProtocolError);
  CHECK_THROWS_AS(epoch_record_from_json(json::array()), ProtocolError);
}

TEST_CASE("scripted runs match golden records") {
  const auto dataset = testdata::make_yolo_dataset(scratch("golden") / "ds");
  const auto complete = testdata::scripted_run_json("complete", dataset);
  check_golden(complete, "run_complete.json");
  CHECK(complete["status"] == "completed");
  CHECK(complete["epochs"].size() == 3);
  CHECK(complete["checkpoint"] == "weights/epoch3.pt");

  const auto gap = testdata::scripted_run_json("gap", dataset);
  check_golden(gap, "run_gap.json");
  CHECK(gap["status"] == "failed");
  CHECK(gap["epochs"].size() == 2);
  REQUIRE(gap["diagnostics"].size() == 1);
  CHECK(gap["diagnostics"][0].get<std::string>().find("expected epoch 3, got epoch 4") != std::string::npos);

  const auto nan = testdata::scripted_run_json("nan", dataset);
  check_golden(nan, "run_nan.json");
  CHECK(nan["status"] == "failed");
  CHECK(nan["epochs"].size() == 1);
  REQUIRE(nan["diagnostics"].size() == 1);
  CHECK(nan["diagnostics"][0].get<std::string>().find("epoch 2") != std::string::npos);
}

TEST_CASE("run records persist and reload") {
  const auto dir = scratch("persist");
  const auto dataset = testdata::make_yolo_dataset(dir / "ds");
  ScriptedTrainer trainer("run-a", testdata::script("complete"), 3);
  RunOptions opts;
  opts.poll_interval_ms = 0;
  opts.runs_dir = dir / "runs";
  const auto run = run_distillation(dataset, testdata::three_epoch_hyperparams(), trainer, opts);
  CHECK(trainer.start_request()["dataset_path"] == dataset.string());
  CHECK(trainer.start_request()["hyperparams"]["num_epochs"] == 3);
  CHECK(load_run(dir / "runs" / "run-a.json") == run);
  CHECK(summarize(run).metrics.ap == doctest::Approx(0.8));
  CHECK(summarize(run).epochs == 3);
}

TEST_CASE("run preconditions and failure modes") {
  const auto dir = scratch("pre");
  const auto hp = testdata::three_epoch_hyperparams();
  ScriptedTrainer idle("run-x", {});
  RunOptions opts;
  opts.poll_interval_ms = 5;
  opts.stall_timeout_ms = 50;

  fs::create_directories(dir / "empty");
  CHECK_THROWS_AS(run_distillation(dir / "empty", hp, idle, opts), DatasetError);

  const auto dataset = testdata::make_yolo_dataset(dir / "ds");
  const auto stalled = run_distillation(dataset, hp, idle, opts);
  CHECK(stalled.status == RunStatus::kFailed);
  REQUIRE(stalled.diagnostics.size() == 1);
  CHECK(stalled.diagnostics[0].find("no epoch 1") != std::string::npos);

  auto records = testdata::script("complete");
  records.push_back(testdata::epoch_json(4));
  ScriptedTrainer extra("run-extra", records, 10);
  const auto over = run_distillation(dataset, hp, extra, opts);
  CHECK(over.status == RunStatus::kCompleted);
  CHECK(over.epochs.size() == 3);

  auto bad = testdata::script("complete");
  bad[1]["metrics"]["recall"] = -0.1;
  ScriptedTrainer rejecting("run-bad", bad);
  const auto rejected = run_distillation(dataset, hp, rejecting, opts);
  CHECK(rejected.status == RunStatus::kFailed);
  CHECK(rejected.epochs.size() == 1);
  CHECK(rejected.diagnostics[0].find("protocol violation") != std::string::npos);

  ScriptedTrainer unsafe("../escape", testdata::script("complete"));
  CHECK_THROWS_AS(run_distillation(dataset, hp, unsafe, opts), ProtocolError);

  auto no_train = io::load_manifest(dataset / "manifest.json");
  for (auto& r : no_train.records) r.split = io::Split::kValid;
  io::save_manifest(no_train, dataset / "manifest.json");
  CHECK_THROWS_AS(run_distillation(dataset, hp, idle, opts), DatasetError);
}

TEST_CASE("http trainer follows the wire protocol") {
  const auto dataset = testdata::make_yolo_dataset(scratch("http") / "ds");
  std::atomic<int> polls{0};
  stub::Server server([&](const stub::Request& req) -> stub::Response {
    if (req.method == "POST" && req.path == "/v1/train/start") {
      const auto body = json::parse(req.body);
      if (!body.contains("dataset_path") || body["hyperparams"]["num_epochs"] != 3) return {400, "{}"};
      return {200, R"({"run_id":"r-http"})"};
    }
    if (req.method == "GET" && req.path == "/v1/train/r-http/epochs") {
      const int n = ++polls;
      const int from = std::stoi(req.query.substr(req.query.find('=') + 1));
      json out = json::array();
      for (int k = from; k <= std::min(n, 3); ++k) out.push_back(testdata::epoch_json(k));
      return {200, out.dump()};
    }
    return {404, "{}"};
  });
  net::BackendSpec spec;
  spec.kind = net::BackendKind::kRemoteHttp;
  spec.endpoint = server.endpoint();
  spec.backoff_ms = 1;
  auto trainer = make_trainer(spec);
  RunOptions opts;
  opts.poll_interval_ms = 1;
  const auto run = run_distillation(dataset, testdata::three_epoch_hyperparams(), *trainer, opts);
  CHECK(run.run_id == "r-http");
  CHECK(run.status == RunStatus::kCompleted);
  CHECK(run.epochs.size() == 3);
}

TEST_CASE("http trainer errors fail the run with a diagnostic") {
  const auto dataset = testdata::make_yolo_dataset(scratch("http_err") / "ds");
  stub::Server server([](const stub::Request& req) -> stub::Response {
    if (req.path == "/v1/train/start") return {200, R"({"run_id":"r1"})"};
    return {500, "trainer crashed"};
  });
  net::BackendSpec spec;
  spec.kind = net::BackendKind::kRemoteHttp;
  spec.endpoint = server.endpoint();
  spec.retries = 0;
  auto trainer = make_trainer(spec);
  const auto run = run_distillation(dataset, testdata::three_epoch_hyperparams(), *trainer, {});
  CHECK(run.status == RunStatus::kFailed);
  CHECK(run.diagnostics[0].find("trainer error") != std::string::npos);
}

TEST_CASE("published run comparison and selection") {
  const auto runs = published_runs();
  REQUIRE(runs.size() == 10);
  CHECK(select_best(runs, Criterion::kMaxAp) == "yolov8s-e50-s1024");
  CHECK(by_id(runs, select_best(runs, Criterion::kMaxAp)).metrics.ap == 0.80299);
  CHECK(select_best(runs, Criterion::kMaxRecall) == "yolov8s-e25-s1280");
  CHECK(by_id(runs, select_best(runs, Criterion::kMaxRecall)).metrics.recall == 0.7643);
  CHECK(select_best(runs, Criterion::kMaxAp50) == "yolov8s-e25-s800");

  const auto sorted = compare_runs(runs);
  CHECK(sorted.front().run_id == "yolov8s-e50-s1024");
  for (std::size_t i = 1; i < sorted.size(); ++i) CHECK(sorted[i - 1].metrics.ap >= sorted[i].metrics.ap);

  const auto text = render_comparison(sorted);
  CHECK(text.find("0.80299") != std::string::npos);
  CHECK(text.find("0.0051627") != std::string::npos);
  const auto csv = comparison_csv(sorted);
  CHECK(csv.find("yolov8s-e50-s1024,YOLOv8s,50,1024,0.80299,0.7294,0.79274,0.62709,0.7502,0.72657,1.0196\n") !=
        std::string::npos);

  for (const auto& r : runs) CHECK(json(to_json(r)) == json(to_json(run_summary_from_json(json(to_json(r))))));
}

TEST_CASE("profile table renders published figures") {
  const auto runs = published_runs();
  const auto text = render_profiles({by_id(runs, "yolov8s-e50-s1024"), by_id(runs, "yolov7-e50-s640")});
  CHECK(text.find("11.1M") != std::string::npos);
  CHECK(text.find("28.4G") != std::string::npos);
  CHECK(text.find("21.5Mb") != std::string::npos);
  CHECK(text.find(" 182 ") != std::string::npos);
  CHECK(text.find(" 3.4 ") != std::string::npos);
  CHECK(text.find("103.2G") != std::string::npos);
  CHECK(text.find("11.9") != std::string::npos);
}

TEST_CASE("selection ties, singletons and invariance") {
  auto runs = published_runs();
  SUBCASE("ties go to the smaller run id") {
    std::vector<RunSummary> tied = {runs[0], runs[1]};
    tied[0].run_id = "b";
    tied[1].run_id = "a";
    tied[1].metrics = tied[0].metrics;
    CHECK(select_best(tied, Criterion::kMaxAp) == "a");
    CHECK(compare_runs(tied).front().run_id == "a");
  }
  SUBCASE("one run wins every criterion") {
    for (auto c : {Criterion::kMaxAp, Criterion::kMaxAp50, Criterion::kMaxRecall, Criterion::kBalanced}) {
      CHECK(select_best({runs[3]}, c) == runs[3].run_id);
    }
  }
  SUBCASE("argmax ignores input order") {
    for (auto c : {Criterion::kMaxAp, Criterion::kMaxAp50, Criterion::kMaxRecall, Criterion::kBalanced}) {
      const auto expected = select_best(runs, c);
      auto shuffled = runs;
      std::reverse(shuffled.begin(), shuffled.end());
      CHECK(select_best(shuffled, c) == expected);
      std::rotate(shuffled.begin(), shuffled.begin() + 3, shuffled.end());
      CHECK(select_best(shuffled, c) == expected);
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(select_best({}, Criterion::kMaxAp), ContractError);
    auto no_profile = runs;
    no_profile[2].profile.reset();
    CHECK_THROWS_AS(select_best(no_profile, Criterion::kBalanced), ContractError);
    CHECK_THROWS_AS(parse_criterion("fastest"), ConfigError);
    CHECK(parse_criterion("balanced") == Criterion::kBalanced);
  }
}

TEST_CASE("balanced criterion trades accuracy against speed") {
  const auto runs = published_runs();
  const auto best = select_best(runs, Criterion::kBalanced);
  const auto& b = by_id(runs, best);
  CHECK(b.profile->fps > 300);
  CHECK(b.profile->flops < 30e9);
}

TEST_CASE("profiling a stub inference backend") {
  stub::Server server([](const stub::Request& req) -> stub::Response {
    if (req.path == "/v1/model/describe") {
      return {200, R"({"layers":168,"params":11100000,"flops":28400000000,"weight_bytes":21500000})"};
    }
    if (req.path == "/v1/infer") {
      return {200, R"({"detections":[{"bbox":[1,2,3,4],"prompt_index":0,"confidence":0.9}],"model":"stub","latency_ms":10})", 10};
    }
    return {404, "{}"};
  });
  net::BackendSpec spec;
  spec.kind = net::BackendKind::kRemoteHttp;
  spec.endpoint = server.endpoint();
  auto backend = make_inference_backend(spec);
  const auto p = profile_backend(*backend, {net::base64_encode("probe")}, 20);
  CHECK(server.hits() == 1 + 3 + 20);
  CHECK(p.layers == 168);
  CHECK(p.params == 11100000);
  CHECK(p.latency_ms >= 8.0);
  CHECK(p.latency_ms <= 15.0);
  CHECK(p.fps >= 80.0);
  CHECK(p.fps <= 120.0);
  CHECK_THROWS_AS(profile_backend(*backend, {"x"}, 0), ContractError);
}
