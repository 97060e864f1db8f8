#include "herdpipe/distill/trainer.hpp"

#include <chrono>
#include <thread>

#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/io/manifest.hpp"
#include "herdpipe/net/http.hpp"

namespace herdpipe::distill {

namespace fs = std::filesystem;

namespace {

class HttpTrainer final : public Trainer {
 public:
  explicit HttpTrainer(const net::BackendSpec& spec) : client_(spec) {}

  std::string start(const std::string& dataset_path, const Hyperparams& hp) override {
    const auto resp = client_.post("/v1/train/start", {{"dataset_path", dataset_path}, {"hyperparams", to_json(hp)}});
    if (!resp.is_object() || !resp.contains("run_id") || !resp["run_id"].is_string()) {
      throw ProtocolError(fmt::format("train/start response lacks a string run_id: {}", net::excerpt(resp.dump())));
    }
    return resp["run_id"].get<std::string>();
  }

  nlohmann::json epochs(const std::string& run_id, int from) override {
    return client_.get(fmt::format("/v1/train/{}/epochs?from={}", run_id, from));
  }

 private:
  net::HttpClient client_;
};

void check_dataset(const fs::path& dir) {
  if (!fs::exists(dir / "data.yaml") || !fs::exists(dir / "manifest.json")) {
    throw DatasetError(fmt::format("'{}' is not a yolo-txt dataset (needs data.yaml and manifest.json)", dir.string()));
  }
  const auto manifest = io::load_manifest(dir / "manifest.json");
  for (const auto& r : manifest.records) {
    if (r.split == io::Split::kTrain) return;
  }
  throw DatasetError(fmt::format("'{}' has an empty train split", dir.string()));
}

}  // namespace

std::unique_ptr<Trainer> make_trainer(const net::BackendSpec& spec) {
  if (spec.kind != net::BackendKind::kRemoteHttp) throw ConfigError("the trainer backend must be remote-http");
  return std::make_unique<HttpTrainer>(spec);
}

ScriptedTrainer::ScriptedTrainer(std::string run_id, std::vector<nlohmann::json> records, int per_poll)
    : run_id_(std::move(run_id)), records_(std::move(records)), per_poll_(per_poll) {}

std::string ScriptedTrainer::start(const std::string& dataset_path, const Hyperparams& hp) {
  std::lock_guard lock(mutex_);
  start_request_ = {{"dataset_path", dataset_path}, {"hyperparams", to_json(hp)}};
  return run_id_;
}

nlohmann::json ScriptedTrainer::epochs(const std::string& run_id, int from) {
  std::lock_guard lock(mutex_);
  if (run_id != run_id_) throw BackendError(fmt::format("unknown run '{}'", run_id), false);
  revealed_ = std::min(records_.size(), revealed_ + static_cast<std::size_t>(per_poll_));
  auto out = nlohmann::json::array();
  for (std::size_t i = 0; i < revealed_; ++i) {
    const auto& r = records_[i];
    const bool numbered = r.is_object() && r.contains("epoch") && r["epoch"].is_number_integer();
    if (!numbered || r["epoch"].get<int>() >= from) out.push_back(r);
  }
  return out;
}

nlohmann::json ScriptedTrainer::start_request() const {
  std::lock_guard lock(mutex_);
  return start_request_;
}

RunRecord run_distillation(const fs::path& dataset_dir, const Hyperparams& hp, Trainer& trainer,
                           const RunOptions& options) {
  hp.validate();
  check_dataset(dataset_dir);

  RunRecord run;
  run.hyperparams = hp;
  run.dataset_path = dataset_dir.string();
  run.run_id = trainer.start(run.dataset_path, hp);
  try {
    io::check_image_id(run.run_id);
  } catch (const DatasetError&) {
    throw ProtocolError(fmt::format("trainer returned an unusable run id '{}'", run.run_id));
  }

  const auto failed = [&](std::string why) {
    run.status = RunStatus::kFailed;
    run.diagnostics.push_back(std::move(why));
  };
  using clock = std::chrono::steady_clock;
  auto last_progress = clock::now();
  int expected = 1;
  while (expected <= hp.num_epochs && run.status == RunStatus::kCompleted) {
    nlohmann::json batch;
    try {
      batch = trainer.epochs(run.run_id, expected);
    } catch (const Error& e) {
      failed(fmt::format("epoch {}: trainer error: {}", expected, e.what()));
      break;
    }
    if (!batch.is_array()) {
      failed(fmt::format("epoch {}: protocol violation: epochs response is not an array: {}", expected,
                         net::excerpt(batch.dump())));
      break;
    }
    for (const auto& raw : batch) {
      EpochRecord rec;
      try {
        rec = epoch_record_from_json(raw);
      } catch (const ProtocolError& e) {
        failed(fmt::format("epoch {}: protocol violation: {}", expected, e.what()));
        break;
      }
      if (rec.epoch != expected) {
        failed(fmt::format("epoch sequence gap: expected epoch {}, got epoch {}", expected, rec.epoch));
        break;
      }
      if (rec.epoch > hp.num_epochs) {
        failed(fmt::format("epoch {} exceeds num_epochs {}", rec.epoch, hp.num_epochs));
        break;
      }
      if (!rec.train.finite() || !rec.val.finite()) {
        const char* which = rec.train.finite() ? "validation" : "training";
        failed(fmt::format("epoch {}: non-finite {} loss (box {}, cls {}, dfl {})", rec.epoch, which,
                           rec.train.finite() ? rec.val.box : rec.train.box,
                           rec.train.finite() ? rec.val.cls : rec.train.cls,
                           rec.train.finite() ? rec.val.dfl : rec.train.dfl));
        break;
      }
      if (rec.checkpoint) run.checkpoint = *rec.checkpoint;
      run.epochs.push_back(std::move(rec));
      ++expected;
      last_progress = clock::now();
      if (expected > hp.num_epochs) break;
    }
    if (run.status != RunStatus::kCompleted || expected > hp.num_epochs) break;
    if (batch.empty()) {
      const auto waited = std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - last_progress);
      if (waited.count() >= options.stall_timeout_ms) {
        failed(fmt::format("missing epoch record: no epoch {} within {} ms", expected, options.stall_timeout_ms));
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(options.poll_interval_ms));
    }
  }
  if (!options.runs_dir.empty()) save_run(run, options.runs_dir);
  return run;
}

void save_run(const RunRecord& run, const fs::path& runs_dir) {
  io::check_image_id(run.run_id);
  io::write_text_file(runs_dir / (run.run_id + ".json"), to_json(run).dump(2) + "\n");
}

RunRecord load_run(const fs::path& file) {
  const auto text = io::read_text_file(file);
  try {
    return run_record_from_json(nlohmann::json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(fmt::format("{}: {}", file.string(), e.what()));
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

}  // namespace herdpipe::distill
