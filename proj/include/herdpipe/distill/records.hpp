#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace herdpipe::distill {

struct Hyperparams {
  std::string model_variant = "YOLOv8s";
  int num_epochs = 50;
  int batch_size = 16;
  double lr0 = 0.01;
  double lrf = 0.01;
  double momentum = 0.937;
  double weight_decay = 0.001;
  std::string optimizer = "SGD";
  int image_size = 1024;

  void validate() const;
  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

// Published defaults per model family (YOLOv8, YOLOv7, YOLOv5); other
// variants get the YOLOv8 values.
Hyperparams default_hyperparams(std::string_view model_variant);

struct Losses {
  double box = 0.0;
  double cls = 0.0;
  double dfl = 0.0;

  bool finite() const noexcept;
  friend bool operator==(const Losses&, const Losses&) = default;
};

struct ValMetrics {
  double ap = 0.0;
  double recall = 0.0;
  double ap50 = 0.0;
  double ap50_95 = 0.0;

  friend bool operator==(const ValMetrics&, const ValMetrics&) = default;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  Losses train;
  Losses val;
  ValMetrics metrics;
  std::optional<double> train_loss_sum;  // the trainer's running loss accumulator
  std::optional<long long> batches;
  std::optional<std::string> checkpoint;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

// Static fields come from the backend's self-description; fps and latency are
// measured; ap is copied from the run.
struct ModelProfile {
  long long layers = 0;
  double params = 0.0;
  double flops = 0.0;
  double weight_bytes = 0.0;
  double fps = 0.0;
  double latency_ms = 0.0;
  double ap = 0.0;

  void validate() const;
  friend bool operator==(const ModelProfile&, const ModelProfile&) = default;
};

enum class RunStatus { kCompleted, kFailed };

struct RunRecord {
  std::string run_id;
  Hyperparams hyperparams;
  std::string dataset_path;
  std::vector<EpochRecord> epochs;
  std::string checkpoint;
  std::optional<ModelProfile> profile;
  RunStatus status = RunStatus::kCompleted;
  std::vector<std::string> diagnostics;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

nlohmann::ordered_json to_json(const Hyperparams& hp);
Hyperparams hyperparams_from_json(const nlohmann::json& j);

// Losses may be null or "NaN"/"nan"/"inf" on the wire, since JSON has no NaN;
// they parse as non-finite values. Metrics must be finite and in [0, 1].
// Violations are ProtocolErrors.
EpochRecord epoch_record_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const EpochRecord& r);

nlohmann::ordered_json to_json(const ModelProfile& p);
ModelProfile model_profile_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

}  // namespace herdpipe::distill
