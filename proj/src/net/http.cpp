#include "herdpipe/net/http.hpp"

#include <semaphore>

#include <fmt/format.h>
#include <httplib.h>

namespace herdpipe::net {

struct HttpClient::Impl {
  explicit Impl(int slots) : slots(slots) {}
  std::counting_semaphore<> slots;
};

namespace {

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

HttpClient::HttpClient(BackendSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind != BackendKind::kRemoteHttp) throw ConfigError("HttpClient needs a remote-http backend spec");
  impl_ = std::make_unique<Impl>(spec_.max_concurrent);
}

HttpClient::~HttpClient() = default;

namespace {

nlohmann::json call(const BackendSpec& spec, const std::string& method, const std::string& path,
                    const nlohmann::json* body) {
  // A client per call keeps concurrent requests independent.
  httplib::Client client(spec.endpoint);
  const auto timeout = std::chrono::milliseconds(spec.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const auto where = fmt::format("{} {}{}", method, spec.endpoint, path);
  httplib::Result res = body ? client.Post(path, body->dump(), "application/json") : client.Get(path);
  if (!res) {
    throw BackendError(fmt::format("{}: {}", where, httplib::to_string(res.error())), true);
  }
  if (res->status != 200) {
    throw BackendError(fmt::format("{}: HTTP {}: {}", where, res->status, excerpt(res->body)),
                       transient_status(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error&) {
    throw ProtocolError(fmt::format("{}: response is not JSON: {}", where, excerpt(res->body)));
  }
}

}  // namespace

nlohmann::json HttpClient::post(const std::string& path, const nlohmann::json& body) {
  SlotGuard slot(impl_->slots);
  return with_retries(spec_, [&] { return call(spec_, "POST", path, &body); });
}

nlohmann::json HttpClient::get(const std::string& path) {
  SlotGuard slot(impl_->slots);
  return with_retries(spec_, [&] { return call(spec_, "GET", path, nullptr); });
}

}  // namespace herdpipe::net
