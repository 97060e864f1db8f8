#include "herdpipe/net/backend.hpp"

#include <set>

#include <fmt/format.h>
#include <openssl/evp.h>

namespace herdpipe::net {

std::string_view to_string(BackendKind k) noexcept {
  switch (k) {
    case BackendKind::kMockOracle: return "mock-oracle";
    case BackendKind::kRemoteHttp: return "remote-http";
    case BackendKind::kSubprocess: return "subprocess";
  }
  return "mock-oracle";
}

BackendKind parse_backend_kind(std::string_view s) {
  for (auto k : {BackendKind::kMockOracle, BackendKind::kRemoteHttp, BackendKind::kSubprocess}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError(fmt::format("unknown backend kind '{}' (expected mock-oracle, remote-http or subprocess)", s));
}

void BackendSpec::validate() const {
  if (timeout_ms <= 0) throw ConfigError("backend timeout_ms must be positive");
  if (retries < 0) throw ConfigError("backend retries must be >= 0");
  if (max_concurrent < 1) throw ConfigError("backend max_concurrent must be >= 1");
  if (backoff_ms < 0) throw ConfigError("backend backoff_ms must be >= 0");
  if (kind == BackendKind::kRemoteHttp && endpoint.rfind("http://", 0) != 0) {
    throw ConfigError(fmt::format("remote-http endpoint '{}' must start with http://", endpoint));
  }
  if (kind == BackendKind::kSubprocess && command.empty()) {
    throw ConfigError("subprocess backend needs a command");
  }
}

BackendSpec backend_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("backend spec must be a JSON object");
  static const std::set<std::string> known{"kind",    "endpoint",       "command", "fixtures",
                                           "timeout_ms", "max_concurrent", "retries", "backoff_ms"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ConfigError(fmt::format("unknown backend key '{}'", key));
  }
  BackendSpec s;
  try {
    s.kind = parse_backend_kind(j.at("kind").get<std::string>());
    if (j.contains("endpoint")) s.endpoint = j["endpoint"].get<std::string>();
    if (j.contains("command")) s.command = j["command"].get<std::vector<std::string>>();
    if (j.contains("fixtures")) s.fixtures = j["fixtures"].get<std::string>();
    if (j.contains("timeout_ms")) s.timeout_ms = j["timeout_ms"].get<int>();
    if (j.contains("max_concurrent")) s.max_concurrent = j["max_concurrent"].get<int>();
    if (j.contains("retries")) s.retries = j["retries"].get<int>();
    if (j.contains("backoff_ms")) s.backoff_ms = j["backoff_ms"].get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("backend spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::ordered_json to_json(const BackendSpec& spec) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(spec.kind);
  if (!spec.endpoint.empty()) j["endpoint"] = spec.endpoint;
  if (!spec.command.empty()) j["command"] = spec.command;
  if (!spec.fixtures.empty()) j["fixtures"] = spec.fixtures;
  j["timeout_ms"] = spec.timeout_ms;
  j["max_concurrent"] = spec.max_concurrent;
  j["retries"] = spec.retries;
  j["backoff_ms"] = spec.backoff_ms;
  return j;
}

std::string excerpt(std::string_view payload, std::size_t limit) {
  if (payload.size() <= limit) return std::string(payload);
  return std::string(payload.substr(0, limit)) + "...";
}

std::string base64_encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 length is not a multiple of 4");
  std::string out(3 * text.size() / 4, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ProtocolError("malformed base64 payload");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

}  // namespace herdpipe::net
