#pragma once

#include <stdexcept>
#include <string>

namespace herdpipe {

// Every failure the library reports derives from Error. The subclasses map
// onto the fault categories callers need to distinguish: a bad configuration,
// malformed input text, a broken wire exchange with a backend, and so on.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Violated precondition on an otherwise well-formed call.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Inconsistent references between dataset pieces (unknown image id, class
// name not in the class set, ...).
class DatasetError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool transient) : Error(what), transient_(transient) {}

  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

}  // namespace herdpipe
