#include "herdpipe/cli/config.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/io/manifest.hpp"

namespace herdpipe::cli {

namespace {

void allow_keys(const nlohmann::json& j, std::initializer_list<std::string_view> keys, std::string_view section) {
  if (!j.is_object()) throw ConfigError(fmt::format("config section '{}' must be an object", section));
  for (const auto& [key, _] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(fmt::format("unknown config key '{}' in '{}'", key, section));
    }
  }
}

annotate::AnnotateOptions annotate_from_json(const nlohmann::json& j) {
  allow_keys(j, {"prompts", "box_threshold", "text_threshold", "max_concurrent", "inline_images", "keep_scores",
                 "image_root"},
             "annotate");
  annotate::AnnotateOptions o;
  o.prompts = j.value("prompts", o.prompts);
  o.box_threshold = j.value("box_threshold", o.box_threshold);
  o.text_threshold = j.value("text_threshold", o.text_threshold);
  o.max_concurrent = j.value("max_concurrent", o.max_concurrent);
  o.inline_images = j.value("inline_images", o.inline_images);
  o.keep_scores = j.value("keep_scores", o.keep_scores);
  o.image_root = j.value("image_root", std::string());
  if (o.max_concurrent < 1) throw ConfigError("annotate.max_concurrent must be >= 1");
  for (double t : {o.box_threshold, o.text_threshold}) {
    if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("annotate thresholds must lie in [0, 1]");
  }
  return o;
}

Backends backends_from_json(const nlohmann::json& j) {
  allow_keys(j, {"teacher", "segmenter", "trainer", "inference"}, "backends");
  Backends b;
  if (j.contains("teacher")) b.teacher = net::backend_spec_from_json(j["teacher"]);
  if (j.contains("segmenter")) b.segmenter = net::backend_spec_from_json(j["segmenter"]);
  if (j.contains("trainer")) b.trainer = net::backend_spec_from_json(j["trainer"]);
  if (j.contains("inference")) b.inference = net::backend_spec_from_json(j["inference"]);
  return b;
}

EvalSettings eval_from_json(const nlohmann::json& j) {
  allow_keys(j, {"iou_thresholds", "confidence_steps", "curve_iou", "confusion_iou", "confusion_confidence"}, "eval");
  EvalSettings e;
  e.metrics.iou_thresholds = j.value("iou_thresholds", e.metrics.iou_thresholds);
  e.metrics.confidence_steps = j.value("confidence_steps", e.metrics.confidence_steps);
  e.metrics.curve_iou = j.value("curve_iou", e.metrics.curve_iou);
  e.confusion_iou = j.value("confusion_iou", e.confusion_iou);
  e.confusion_confidence = j.value("confusion_confidence", e.confusion_confidence);
  return e;
}

DistillSettings distill_from_json(const nlohmann::json& j) {
  allow_keys(j, {"hyperparams", "poll_interval_ms", "stall_timeout_ms", "runs_dir"}, "distill");
  DistillSettings d;
  if (j.contains("hyperparams")) d.hyperparams = distill::hyperparams_from_json(j["hyperparams"]);
  d.run.poll_interval_ms = j.value("poll_interval_ms", d.run.poll_interval_ms);
  d.run.stall_timeout_ms = j.value("stall_timeout_ms", d.run.stall_timeout_ms);
  d.run.runs_dir = j.value("runs_dir", std::string("runs"));
  if (d.run.poll_interval_ms < 0 || d.run.stall_timeout_ms < 0) {
    throw ConfigError("distill poll and stall intervals must be non-negative");
  }
  return d;
}

}  // namespace

CliConfig cli_config_from_json(const nlohmann::json& j) {
  allow_keys(j, {"dataset_root", "classes", "pipeline", "annotate", "backends", "eval", "distill", "seed"}, "config");
  CliConfig c;
  c.distill.run.runs_dir = "runs";
  try {
    c.dataset_root = j.value("dataset_root", std::string());
    c.classes = j.value("classes", c.classes);
    if (j.contains("pipeline")) c.pipeline = pipeline::pipeline_config_from_json(j["pipeline"]);
    if (j.contains("annotate")) c.annotate = annotate_from_json(j["annotate"]);
    if (j.contains("backends")) c.backends = backends_from_json(j["backends"]);
    if (j.contains("eval")) c.eval = eval_from_json(j["eval"]);
    if (j.contains("distill")) c.distill = distill_from_json(j["distill"]);
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("config: {}", e.what()));
  }
  if (c.seed) c.pipeline.rng_seed = *c.seed;
  return c;
}

CliConfig load_cli_config(const std::filesystem::path& file) {
  const auto text = io::read_text_file(file);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", file.string(), e.what()));
  }
  try {
    return cli_config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", file.string(), e.what()));
  }
}

}  // namespace herdpipe::cli
