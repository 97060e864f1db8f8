#pragma once

#include <mutex>
#include <string>
#include <sys/types.h>
#include <vector>

namespace herdpipe::net {

// A child process spoken to one line at a time: a request line on its stdin,
// one response line from its stdout. Requests are serialized. A child that
// exits or misses the timeout is killed and restarted on the next request.
class LineProcess {
 public:
  LineProcess(std::vector<std::string> argv, int timeout_ms);
  ~LineProcess();
  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  // Throws a transient BackendError on timeout, EOF or a dead child.
  std::string request(const std::string& line);

 private:
  void spawn();
  void stop();

  std::vector<std::string> argv_;
  int timeout_ms_;
  std::mutex mutex_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace herdpipe::net
