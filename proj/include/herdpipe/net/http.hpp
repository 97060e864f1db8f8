#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "herdpipe/net/backend.hpp"

namespace herdpipe::net {

// JSON over HTTP with the spec's timeout, retry and concurrency bounds.
// Transport failures, timeouts and 408/429/5xx are transient BackendErrors;
// other non-200 statuses are permanent; a non-JSON body is a ProtocolError.
class HttpClient {
 public:
  explicit HttpClient(BackendSpec spec);
  ~HttpClient();
  HttpClient(const HttpClient&) = delete;
  HttpClient& operator=(const HttpClient&) = delete;

  nlohmann::json post(const std::string& path, const nlohmann::json& body);
  nlohmann::json get(const std::string& path);

  const BackendSpec& spec() const noexcept { return spec_; }

 private:
  struct Impl;
  BackendSpec spec_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace herdpipe::net
