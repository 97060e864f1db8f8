#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/annotate/wire.hpp"
#include "herdpipe/distill/records.hpp"
#include "herdpipe/net/backend.hpp"

namespace herdpipe::distill {

// One comparison row: configuration plus the final epoch's validation numbers.
struct RunSummary {
  std::string run_id;
  std::string model;
  int epochs = 0;
  int image_size = 0;
  ValMetrics metrics;
  Losses val;
  std::optional<ModelProfile> profile;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

// Needs at least one epoch record.
RunSummary summarize(const RunRecord& run);

nlohmann::ordered_json to_json(const RunSummary& s);
RunSummary run_summary_from_json(const nlohmann::json& j);
// A JSON array of summaries.
std::vector<RunSummary> load_summaries(const nlohmann::json& j);

// Rows sorted by descending AP, ties by run id. Values are copied, never recomputed.
std::vector<RunSummary> compare_runs(std::vector<RunSummary> runs);
std::string render_comparison(const std::vector<RunSummary>& rows);
std::string comparison_csv(const std::vector<RunSummary>& rows);
// Params in M, FLOPs in G, weights in Mb, fps, inference ms, AP.
std::string render_profiles(const std::vector<RunSummary>& rows);

enum class Criterion { kMaxAp, kMaxAp50, kMaxRecall, kBalanced };
std::string_view to_string(Criterion c) noexcept;
Criterion parse_criterion(std::string_view s);

// Highest score wins; ties go to the smaller run id. `balanced` scores
// ap_n * fps_n * (1 - flops_n) with min-max normalization across the runs
// (a constant column contributes a factor of 1) and needs a profile for every run.
std::string select_best(const std::vector<RunSummary>& runs, Criterion criterion);

struct ModelDescription {
  long long layers = 0;
  double params = 0.0;
  double flops = 0.0;
  double weight_bytes = 0.0;
};

class InferenceBackend {
 public:
  virtual ~InferenceBackend() = default;
  virtual ModelDescription describe() = 0;
  virtual annotate::TeacherResponse infer(const std::string& image_b64) = 0;
};

// GET /v1/model/describe and POST /v1/infer.
std::unique_ptr<InferenceBackend> make_inference_backend(const net::BackendSpec& spec);

// Three warm-up calls, then `trials` timed calls cycling through the probes.
// latency = median per-call wall time; fps = trials / elapsed window.
// Static fields come from describe(). The returned ap is 0.
ModelProfile profile_backend(InferenceBackend& backend, const std::vector<std::string>& probes_b64, int trials,
                             int warmups = 3);

}  // namespace herdpipe::distill
