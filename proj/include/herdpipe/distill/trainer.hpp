#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/distill/records.hpp"
#include "herdpipe/net/backend.hpp"

namespace herdpipe::distill {

// The trainer owns shuffling, batching, the forward/backward passes and the
// losses. The orchestrator only starts a run and ingests its epoch records.
class Trainer {
 public:
  virtual ~Trainer() = default;
  // Starts training and returns the trainer's run id.
  virtual std::string start(const std::string& dataset_path, const Hyperparams& hp) = 0;
  // Raw epoch records with epoch >= from, as the trainer reports them.
  virtual nlohmann::json epochs(const std::string& run_id, int from) = 0;
};

// POST /v1/train/start and GET /v1/train/<run_id>/epochs?from=k.
std::unique_ptr<Trainer> make_trainer(const net::BackendSpec& spec);

// Replays scripted records, revealing `per_poll` more on every epochs() call.
class ScriptedTrainer final : public Trainer {
 public:
  ScriptedTrainer(std::string run_id, std::vector<nlohmann::json> records, int per_poll = 1);

  std::string start(const std::string& dataset_path, const Hyperparams& hp) override;
  nlohmann::json epochs(const std::string& run_id, int from) override;

  // The start request as the trainer received it.
  nlohmann::json start_request() const;

 private:
  std::string run_id_;
  std::vector<nlohmann::json> records_;
  int per_poll_;
  std::size_t revealed_ = 0;
  nlohmann::json start_request_;
  mutable std::mutex mutex_;
};

struct RunOptions {
  int poll_interval_ms = 1000;
  // A run with no new epoch record for this long fails as stalled.
  int stall_timeout_ms = 30 * 60 * 1000;
  // When set, the record is written to <runs_dir>/<run_id>.json.
  std::filesystem::path runs_dir;
};

// Checks the dataset directory is a yolo-txt layout with a non-empty train
// split, starts the trainer, then ingests epoch records until num_epochs
// arrive. Gaps, malformed or out-of-range records, non-finite losses, stalls
// and trainer errors end the run as failed with diagnostics; records ingested
// before the failure are kept.
RunRecord run_distillation(const std::filesystem::path& dataset_dir, const Hyperparams& hp, Trainer& trainer,
                           const RunOptions& options = {});

void save_run(const RunRecord& run, const std::filesystem::path& runs_dir);
RunRecord load_run(const std::filesystem::path& file);

}  // namespace herdpipe::distill
