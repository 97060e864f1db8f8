#include "herdpipe/net/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>

#include <fmt/format.h>

#include "herdpipe/error.hpp"

namespace herdpipe::net {

LineProcess::LineProcess(std::vector<std::string> argv, int timeout_ms)
    : argv_(std::move(argv)), timeout_ms_(timeout_ms) {
  if (argv_.empty()) throw ConfigError("subprocess backend needs a command");
  if (timeout_ms_ <= 0) throw ConfigError("subprocess timeout must be positive");
}

LineProcess::~LineProcess() { stop(); }

void LineProcess::spawn() {
  // A dead child must surface as an error, not as SIGPIPE.
  std::signal(SIGPIPE, SIG_IGN);
  int in[2];
  int out[2];
  if (pipe2(in, O_CLOEXEC) != 0) throw IoError(fmt::format("pipe: {}", std::strerror(errno)));
  if (pipe2(out, O_CLOEXEC) != 0) {
    close(in[0]);
    close(in[1]);
    throw IoError(fmt::format("pipe: {}", std::strerror(errno)));
  }
  std::vector<char*> args;
  for (auto& a : argv_) args.push_back(a.data());
  args.push_back(nullptr);

  const pid_t pid = fork();
  if (pid < 0) throw IoError(fmt::format("fork: {}", std::strerror(errno)));
  if (pid == 0) {
    dup2(in[0], STDIN_FILENO);
    dup2(out[1], STDOUT_FILENO);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in[0]);
  close(out[1]);
  pid_ = pid;
  to_child_ = in[1];
  from_child_ = out[0];
  buffer_.clear();
}

void LineProcess::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    kill(pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
  buffer_.clear();
}

std::string LineProcess::request(const std::string& line) {
  std::lock_guard lock(mutex_);
  if (pid_ < 0) spawn();
  const auto fail = [&](const std::string& why) {
    stop();
    return BackendError(fmt::format("subprocess '{}': {}", argv_.front(), why), true);
  };

  const std::string payload = line + "\n";
  std::size_t sent = 0;
  while (sent < payload.size()) {
    const auto n = write(to_child_, payload.data() + sent, payload.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw fail(fmt::format("write failed: {}", std::strerror(errno)));
    }
    sent += static_cast<std::size_t>(n);
  }

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
  for (;;) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string response = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return response;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw fail(fmt::format("no response within {} ms", timeout_ms_));
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      throw fail(fmt::format("poll failed: {}", std::strerror(errno)));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const auto n = read(from_child_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw fail(fmt::format("read failed: {}", std::strerror(errno)));
    }
    if (n == 0) throw fail("process closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace herdpipe::net
