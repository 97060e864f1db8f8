#include "herdpipe/distill/records.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/net/backend.hpp"

namespace herdpipe::distill {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void reject(const nlohmann::json& j, std::string_view what) {
  throw ProtocolError(fmt::format("{} in payload: {}", what, net::excerpt(j.dump())));
}

double loss_value(const nlohmann::json& root, const nlohmann::json& v, std::string_view name) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "NaN" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf" || s == "Infinity") return std::numeric_limits<double>::infinity();
    if (s == "-inf" || s == "-Infinity") return -std::numeric_limits<double>::infinity();
  }
  if (!v.is_number()) reject(root, fmt::format("loss '{}' must be a number", name));
  return v.get<double>();
}

Losses losses_from(const nlohmann::json& root, const nlohmann::json& j, std::string_view where) {
  if (!j.is_object()) reject(root, fmt::format("'{}' must be an object", where));
  Losses l;
  for (const auto& [key, field] : {std::pair{"box", &l.box}, std::pair{"cls", &l.cls}, std::pair{"dfl", &l.dfl}}) {
    if (!j.contains(key)) reject(root, fmt::format("'{}' lacks '{}'", where, key));
    *field = loss_value(root, j[key], key);
  }
  return l;
}

ojson loss_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "NaN";
  return v > 0 ? "inf" : "-inf";
}

ojson losses_json(const Losses& l) {
  return {{"box", loss_json(l.box)}, {"cls", loss_json(l.cls)}, {"dfl", loss_json(l.dfl)}};
}

template <typename T>
T field(const nlohmann::json& j, const char* key) {
  return j.at(key).get<T>();
}

}  // namespace

void Hyperparams::validate() const {
  if (num_epochs < 1) throw ConfigError("num_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr0 > 0.0) || !(lrf > 0.0)) throw ConfigError("lr0 and lrf must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (image_size < 32) throw ConfigError("image_size must be >= 32");
  if (model_variant.empty()) throw ConfigError("model_variant must be set");
  if (optimizer.empty()) throw ConfigError("optimizer must be set");
}

Hyperparams default_hyperparams(std::string_view model_variant) {
  Hyperparams hp;
  hp.model_variant = std::string(model_variant);
  if (model_variant.rfind("YOLOv7", 0) == 0) {
    hp.lrf = 0.1;
    hp.weight_decay = 0.0005;
  } else if (model_variant.rfind("YOLOv5", 0) == 0) {
    hp.weight_decay = 0.0005;
  }
  return hp;
}

bool Losses::finite() const noexcept {
  return std::isfinite(box) && std::isfinite(cls) && std::isfinite(dfl);
}

void ModelProfile::validate() const {
  for (double v : {static_cast<double>(layers), params, flops, weight_bytes, fps, latency_ms, ap}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ContractError("model profile fields must be finite and >= 0");
  }
}

ojson to_json(const Hyperparams& hp) {
  return {{"model_variant", hp.model_variant}, {"num_epochs", hp.num_epochs}, {"batch_size", hp.batch_size},
          {"lr0", hp.lr0},  {"lrf", hp.lrf},  {"momentum", hp.momentum},  {"weight_decay", hp.weight_decay},
          {"optimizer", hp.optimizer}, {"image_size", hp.image_size}};
}

Hyperparams hyperparams_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("hyperparams must be a JSON object");
  static const std::set<std::string> known{"model_variant", "num_epochs", "batch_size", "lr0", "lrf",
                                           "momentum", "weight_decay", "optimizer", "image_size"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(fmt::format("unknown hyperparameter '{}'", key));
  }
  Hyperparams hp = default_hyperparams(j.value("model_variant", std::string("YOLOv8s")));
  try {
    auto get = [&](const char* key, auto& f) {
      if (j.contains(key)) f = j[key].get<std::decay_t<decltype(f)>>();
    };
    get("num_epochs", hp.num_epochs);
    get("batch_size", hp.batch_size);
    get("lr0", hp.lr0);
    get("lrf", hp.lrf);
    get("momentum", hp.momentum);
    get("weight_decay", hp.weight_decay);
    get("optimizer", hp.optimizer);
    get("image_size", hp.image_size);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("hyperparams: ") + e.what());
  }
  hp.validate();
  return hp;
}

EpochRecord epoch_record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) reject(j, "epoch record must be an object");
  static const std::set<std::string> known{"epoch", "train", "val", "metrics", "train_loss_sum", "batches",
                                           "checkpoint"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) reject(j, fmt::format("unexpected key '{}' in epoch record", key));
  }
  EpochRecord r;
  if (!j.contains("epoch") || !j["epoch"].is_number_integer()) reject(j, "epoch record needs an integer 'epoch'");
  r.epoch = j["epoch"].get<int>();
  if (r.epoch < 1) reject(j, "epoch indices start at 1");
  if (!j.contains("train") || !j.contains("val") || !j.contains("metrics")) {
    reject(j, "epoch record needs 'train', 'val' and 'metrics'");
  }
  r.train = losses_from(j, j["train"], "train");
  r.val = losses_from(j, j["val"], "val");
  const auto& m = j["metrics"];
  if (!m.is_object()) reject(j, "'metrics' must be an object");
  for (const auto& [key, f] : {std::pair{"ap", &r.metrics.ap}, std::pair{"recall", &r.metrics.recall},
                               std::pair{"ap50", &r.metrics.ap50}, std::pair{"ap50_95", &r.metrics.ap50_95}}) {
    if (!m.contains(key) || !m[key].is_number()) reject(j, fmt::format("metric '{}' must be a number", key));
    *f = m[key].get<double>();
    if (!(*f >= 0.0 && *f <= 1.0)) reject(j, fmt::format("metric '{}' = {} outside [0, 1]", key, *f));
  }
  if (j.contains("train_loss_sum")) r.train_loss_sum = loss_value(j, j["train_loss_sum"], "train_loss_sum");
  if (j.contains("batches")) {
    if (!j["batches"].is_number_integer() || j["batches"].get<long long>() < 0) {
      reject(j, "'batches' must be a non-negative integer");
    }
    r.batches = j["batches"].get<long long>();
  }
  if (j.contains("checkpoint")) {
    if (!j["checkpoint"].is_string()) reject(j, "'checkpoint' must be a string");
    r.checkpoint = j["checkpoint"].get<std::string>();
  }
  return r;
}

ojson to_json(const EpochRecord& r) {
  ojson j{{"epoch", r.epoch},
          {"train", losses_json(r.train)},
          {"val", losses_json(r.val)},
          {"metrics", {{"ap", r.metrics.ap}, {"recall", r.metrics.recall}, {"ap50", r.metrics.ap50},
                       {"ap50_95", r.metrics.ap50_95}}}};
  if (r.train_loss_sum) j["train_loss_sum"] = loss_json(*r.train_loss_sum);
  if (r.batches) j["batches"] = *r.batches;
  if (r.checkpoint) j["checkpoint"] = *r.checkpoint;
  return j;
}

ojson to_json(const ModelProfile& p) {
  return {{"layers", p.layers}, {"params", p.params},   {"flops", p.flops}, {"weight_bytes", p.weight_bytes},
          {"fps", p.fps},       {"latency_ms", p.latency_ms}, {"ap", p.ap}};
}

ModelProfile model_profile_from_json(const nlohmann::json& j) {
  ModelProfile p;
  try {
    p.layers = field<long long>(j, "layers");
    p.params = field<double>(j, "params");
    p.flops = field<double>(j, "flops");
    p.weight_bytes = field<double>(j, "weight_bytes");
    p.fps = j.value("fps", 0.0);
    p.latency_ms = j.value("latency_ms", 0.0);
    p.ap = j.value("ap", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model profile: ") + e.what());
  }
  try {
    p.validate();
  } catch (const ContractError& e) {
    throw ParseError(e.what());
  }
  return p;
}

ojson to_json(const RunRecord& r) {
  ojson epochs = ojson::array();
  for (const auto& e : r.epochs) epochs.push_back(to_json(e));
  ojson j{{"run_id", r.run_id},
          {"status", r.status == RunStatus::kCompleted ? "completed" : "failed"},
          {"hyperparams", to_json(r.hyperparams)},
          {"dataset_path", r.dataset_path},
          {"epochs", std::move(epochs)},
          {"checkpoint", r.checkpoint}};
  if (r.profile) j["profile"] = to_json(*r.profile);
  j["diagnostics"] = r.diagnostics;
  return j;
}

RunRecord run_record_from_json(const nlohmann::json& j) {
  RunRecord r;
  try {
    r.run_id = field<std::string>(j, "run_id");
    const auto status = field<std::string>(j, "status");
    if (status != "completed" && status != "failed") throw ParseError(fmt::format("unknown run status '{}'", status));
    r.status = status == "completed" ? RunStatus::kCompleted : RunStatus::kFailed;
    r.hyperparams = hyperparams_from_json(j.at("hyperparams"));
    r.dataset_path = field<std::string>(j, "dataset_path");
    for (const auto& e : j.at("epochs")) r.epochs.push_back(epoch_record_from_json(e));
    r.checkpoint = field<std::string>(j, "checkpoint");
    if (j.contains("profile")) r.profile = model_profile_from_json(j["profile"]);
    r.diagnostics = field<std::vector<std::string>>(j, "diagnostics");
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("run record: ") + e.what());
  } catch (const ProtocolError& e) {
    throw ParseError(std::string("run record: ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("run record: ") + e.what());
  }
  return r;
}

}  // namespace herdpipe::distill
