#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "herdpipe/error.hpp"

namespace herdpipe::net {

enum class BackendKind { kMockOracle, kRemoteHttp, kSubprocess };

std::string_view to_string(BackendKind k) noexcept;
BackendKind parse_backend_kind(std::string_view s);

struct BackendSpec {
  BackendKind kind = BackendKind::kMockOracle;
  std::string endpoint;              // remote-http: http://host:port
  std::vector<std::string> command;  // subprocess: argv
  std::string fixtures;              // mock-oracle: COCO JSON with the canned labels
  int timeout_ms = 30000;
  int max_concurrent = 4;
  int retries = 2;
  int backoff_ms = 500;  // first retry delay, doubled per attempt

  void validate() const;
};

BackendSpec backend_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const BackendSpec& spec);

// First `limit` bytes of a payload for error messages.
std::string excerpt(std::string_view payload, std::size_t limit = 200);

// Runs `call`, retrying transient BackendErrors up to spec.retries times with
// delays of backoff_ms, 2*backoff_ms, 4*backoff_ms, ...
template <typename F>
auto with_retries(const BackendSpec& spec, F&& call) {
  for (int attempt = 0;; ++attempt) {
    try {
      return call();
    } catch (const BackendError& e) {
      if (!e.transient() || attempt >= spec.retries) throw;
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(spec.backoff_ms) << attempt));
    }
  }
}

std::string base64_encode(std::string_view bytes);
// Throws ProtocolError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace herdpipe::net
