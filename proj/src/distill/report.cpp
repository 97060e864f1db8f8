#include "herdpipe/distill/report.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include <fmt/format.h>

#include "herdpipe/error.hpp"
#include "herdpipe/core/csv.hpp"
#include "herdpipe/net/http.hpp"

namespace herdpipe::distill {

namespace {

using ojson = nlohmann::ordered_json;

[[noreturn]] void reject(const nlohmann::json& j, std::string_view what) {
  throw ParseError(fmt::format("{} in summary: {}", what, net::excerpt(j.dump())));
}

void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) reject(j, fmt::format("'{}' must be an object", where));
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      reject(j, fmt::format("unknown key '{}' in '{}'", key, where));
    }
  }
  for (auto key : allowed) {
    if (key != "profile" && !j.contains(std::string(key))) reject(j, fmt::format("'{}' lacks '{}'", where, key));
  }
}

std::vector<std::string> comparison_cells(const RunSummary& s) {
  return {s.model,
          fmt::format("{}", s.epochs),
          fmt::format("{}", s.image_size),
          fmt::format("{}", s.metrics.ap),
          fmt::format("{}", s.metrics.recall),
          fmt::format("{}", s.metrics.ap50),
          fmt::format("{}", s.metrics.ap50_95),
          fmt::format("{}", s.val.box),
          fmt::format("{}", s.val.cls),
          fmt::format("{}", s.val.dfl)};
}

// Left-aligned first column, right-aligned numbers, two spaces between.
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::string out;
  const auto line = [&](const std::vector<std::string>& cells) {
    std::string text;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c > 0) text += "  ";
      text += c == 0 ? fmt::format("{:<{}}", cells[c], width[c]) : fmt::format("{:>{}}", cells[c], width[c]);
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out += text + "\n";
  };
  line(header);
  for (const auto& row : rows) line(row);
  return out;
}

const std::vector<std::string> kComparisonHeader = {"Model", "Epoch", "Size",   "AP",  "Recall",
                                                    "AP50",  "AP50-95", "Box", "Cls", "Dfl"};

class HttpInference final : public InferenceBackend {
 public:
  explicit HttpInference(const net::BackendSpec& spec) : client_(spec) {}

  ModelDescription describe() override {
    const auto j = client_.get("/v1/model/describe");
    if (!j.is_object()) throw ProtocolError(fmt::format("describe response is not an object: {}", net::excerpt(j.dump())));
    ModelDescription d;
    try {
      d.layers = j.at("layers").get<long long>();
      d.params = j.at("params").get<double>();
      d.flops = j.at("flops").get<double>();
      d.weight_bytes = j.at("weight_bytes").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ProtocolError(fmt::format("bad describe response ({}): {}", e.what(), net::excerpt(j.dump())));
    }
    return d;
  }

  annotate::TeacherResponse infer(const std::string& image_b64) override {
    const auto j = client_.post("/v1/infer", {{"image_b64", image_b64}});
    return annotate::teacher_response_from_json(j, std::numeric_limits<std::size_t>::max());
  }

 private:
  net::HttpClient client_;
};

}  // namespace

RunSummary summarize(const RunRecord& run) {
  if (run.epochs.empty()) throw ContractError(fmt::format("run '{}' has no epoch records", run.run_id));
  const auto& last = run.epochs.back();
  RunSummary s;
  s.run_id = run.run_id;
  s.model = run.hyperparams.model_variant;
  s.epochs = last.epoch;
  s.image_size = run.hyperparams.image_size;
  s.metrics = last.metrics;
  s.val = last.val;
  s.profile = run.profile;
  return s;
}

ojson to_json(const RunSummary& s) {
  ojson j;
  j["run_id"] = s.run_id;
  j["model"] = s.model;
  j["epochs"] = s.epochs;
  j["image_size"] = s.image_size;
  j["metrics"] = {{"ap", s.metrics.ap}, {"recall", s.metrics.recall}, {"ap50", s.metrics.ap50},
                  {"ap50_95", s.metrics.ap50_95}};
  j["val_losses"] = {{"box", s.val.box}, {"cls", s.val.cls}, {"dfl", s.val.dfl}};
  if (s.profile) j["profile"] = to_json(*s.profile);
  return j;
}

RunSummary run_summary_from_json(const nlohmann::json& j) {
  check_keys(j, {"run_id", "model", "epochs", "image_size", "metrics", "val_losses", "profile"}, "summary");
  const auto& m = j["metrics"];
  const auto& v = j["val_losses"];
  check_keys(m, {"ap", "recall", "ap50", "ap50_95"}, "metrics");
  check_keys(v, {"box", "cls", "dfl"}, "val_losses");
  RunSummary s;
  try {
    s.run_id = j["run_id"].get<std::string>();
    s.model = j["model"].get<std::string>();
    s.epochs = j["epochs"].get<int>();
    s.image_size = j["image_size"].get<int>();
    s.metrics = {m["ap"].get<double>(), m["recall"].get<double>(), m["ap50"].get<double>(),
                 m["ap50_95"].get<double>()};
    s.val = {v["box"].get<double>(), v["cls"].get<double>(), v["dfl"].get<double>()};
    if (j.contains("profile")) s.profile = model_profile_from_json(j["profile"]);
  } catch (const nlohmann::json::exception& e) {
    reject(j, e.what());
  } catch (const ProtocolError& e) {
    reject(j, e.what());
  }
  for (double x : {s.metrics.ap, s.metrics.recall, s.metrics.ap50, s.metrics.ap50_95}) {
    if (!(x >= 0.0 && x <= 1.0)) reject(j, "metric outside [0, 1]");
  }
  return s;
}

std::vector<RunSummary> load_summaries(const nlohmann::json& j) {
  if (!j.is_array()) throw ParseError("run summaries must be a JSON array");
  std::vector<RunSummary> out;
  for (const auto& item : j) out.push_back(run_summary_from_json(item));
  return out;
}

std::vector<RunSummary> compare_runs(std::vector<RunSummary> runs) {
  std::sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) {
    if (a.metrics.ap != b.metrics.ap) return a.metrics.ap > b.metrics.ap;
    return a.run_id < b.run_id;
  });
  return runs;
}

std::string render_comparison(const std::vector<RunSummary>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) cells.push_back(comparison_cells(r));
  return render_table(kComparisonHeader, cells);
}

std::string comparison_csv(const std::vector<RunSummary>& rows) {
  std::string out = "run_id,model,epochs,image_size,ap,recall,ap50,ap50_95,box,cls,dfl\n";
  for (const auto& r : rows) {
    auto cells = comparison_cells(r);
    out += csv::quote(r.run_id);
    for (const auto& c : cells) out += "," + csv::quote(c);
    out += "\n";
  }
  return out;
}

std::string render_profiles(const std::vector<RunSummary>& rows) {
  const std::vector<std::string> header = {"Model", "Epoch", "Size", "Layers", "Params", "FLOPs",
                                           "Weight", "FPS",  "ms",   "AP"};
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    if (!r.profile) throw ContractError(fmt::format("run '{}' has no profile", r.run_id));
    const auto& p = *r.profile;
    cells.push_back({r.model, fmt::format("{}", r.epochs), fmt::format("{}", r.image_size),
                     fmt::format("{}", p.layers), fmt::format("{:.1f}M", p.params / 1e6),
                     fmt::format("{:.1f}G", p.flops / 1e9), fmt::format("{:.1f}Mb", p.weight_bytes / 1e6),
                     fmt::format("{:.0f}", p.fps), fmt::format("{:.1f}", p.latency_ms), fmt::format("{}", p.ap)});
  }
  return render_table(header, cells);
}

std::string_view to_string(Criterion c) noexcept {
  switch (c) {
    case Criterion::kMaxAp: return "max-ap";
    case Criterion::kMaxAp50: return "max-ap50";
    case Criterion::kMaxRecall: return "max-recall";
    case Criterion::kBalanced: return "balanced";
  }
  return "max-ap";
}

Criterion parse_criterion(std::string_view s) {
  for (auto c : {Criterion::kMaxAp, Criterion::kMaxAp50, Criterion::kMaxRecall, Criterion::kBalanced}) {
    if (to_string(c) == s) return c;
  }
  throw ConfigError(fmt::format("unknown selection criterion '{}' (max-ap, max-ap50, max-recall, balanced)", s));
}

std::string select_best(const std::vector<RunSummary>& runs, Criterion criterion) {
  if (runs.empty()) throw ContractError("cannot select from an empty run list");
  std::vector<double> score(runs.size());
  if (criterion == Criterion::kBalanced) {
    for (const auto& r : runs) {
      if (!r.profile) throw ContractError(fmt::format("balanced selection needs a profile for run '{}'", r.run_id));
    }
    // Min-max over the runs; a constant column contributes a factor of 1.
    const auto normalized = [&](auto get, bool cost) {
      double lo = get(runs[0]);
      double hi = lo;
      for (const auto& r : runs) {
        lo = std::min(lo, get(r));
        hi = std::max(hi, get(r));
      }
      std::vector<double> out;
      for (const auto& r : runs) {
        if (hi == lo) {
          out.push_back(1.0);
        } else {
          const double n = (get(r) - lo) / (hi - lo);
          out.push_back(cost ? 1.0 - n : n);
        }
      }
      return out;
    };
    const auto ap = normalized([](const RunSummary& r) { return r.metrics.ap; }, false);
    const auto fps = normalized([](const RunSummary& r) { return r.profile->fps; }, false);
    const auto flops = normalized([](const RunSummary& r) { return r.profile->flops; }, true);
    for (std::size_t i = 0; i < runs.size(); ++i) score[i] = ap[i] * fps[i] * flops[i];
  } else {
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto& m = runs[i].metrics;
      score[i] = criterion == Criterion::kMaxAp ? m.ap : criterion == Criterion::kMaxAp50 ? m.ap50 : m.recall;
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (score[i] > score[best] || (score[i] == score[best] && runs[i].run_id < runs[best].run_id)) best = i;
  }
  return runs[best].run_id;
}

std::unique_ptr<InferenceBackend> make_inference_backend(const net::BackendSpec& spec) {
  if (spec.kind != net::BackendKind::kRemoteHttp) throw ConfigError("the inference backend must be remote-http");
  return std::make_unique<HttpInference>(spec);
}

ModelProfile profile_backend(InferenceBackend& backend, const std::vector<std::string>& probes_b64, int trials,
                             int warmups) {
  if (trials < 1) throw ContractError("trials must be >= 1");
  if (warmups < 0) throw ContractError("warmups must be >= 0");
  if (probes_b64.empty()) throw ContractError("profiling needs at least one probe image");
  using clock = std::chrono::steady_clock;

  const auto desc = backend.describe();
  for (int i = 0; i < warmups; ++i) backend.infer(probes_b64[static_cast<std::size_t>(i) % probes_b64.size()]);

  std::vector<double> per_call;
  per_call.reserve(static_cast<std::size_t>(trials));
  const auto window_start = clock::now();
  for (int i = 0; i < trials; ++i) {
    const auto t0 = clock::now();
    backend.infer(probes_b64[static_cast<std::size_t>(i) % probes_b64.size()]);
    per_call.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
  }
  const double elapsed_s = std::chrono::duration<double>(clock::now() - window_start).count();
  if (!(elapsed_s > 0.0)) throw BackendError("profiling window measured zero elapsed time", false);

  std::sort(per_call.begin(), per_call.end());
  const std::size_t n = per_call.size();
  ModelProfile p;
  p.layers = desc.layers;
  p.params = desc.params;
  p.flops = desc.flops;
  p.weight_bytes = desc.weight_bytes;
  p.latency_ms = n % 2 == 1 ? per_call[n / 2] : (per_call[n / 2 - 1] + per_call[n / 2]) / 2.0;
  p.fps = trials / elapsed_s;
  return p;
}

}  // namespace herdpipe::distill
