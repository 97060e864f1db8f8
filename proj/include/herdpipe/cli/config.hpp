#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/annotate/orchestrator.hpp"
#include "herdpipe/distill/trainer.hpp"
#include "herdpipe/eval/metrics.hpp"
#include "herdpipe/net/backend.hpp"
#include "herdpipe/pipeline/pipeline.hpp"

namespace herdpipe::cli {

struct Backends {
  std::optional<net::BackendSpec> teacher;
  std::optional<net::BackendSpec> segmenter;
  std::optional<net::BackendSpec> trainer;
  std::optional<net::BackendSpec> inference;
};

struct EvalSettings {
  eval::EvalConfig metrics;  // classes come from the ground truth
  double confusion_iou = 0.5;
  double confusion_confidence = 0.25;
};

struct DistillSettings {
  distill::Hyperparams hyperparams;
  distill::RunOptions run;
};

// The shared config document. Every section is optional; absent keys keep
// their defaults and unknown keys are a ConfigError.
struct CliConfig {
  std::filesystem::path dataset_root;
  std::vector<std::string> classes;  // class names, also the default prompts
  pipeline::PipelineConfig pipeline;
  annotate::AnnotateOptions annotate;
  Backends backends;
  EvalSettings eval;
  DistillSettings distill;
  std::optional<std::uint64_t> seed;  // overrides pipeline.rng_seed
};

CliConfig cli_config_from_json(const nlohmann::json& j);
CliConfig load_cli_config(const std::filesystem::path& file);

}  // namespace herdpipe::cli
