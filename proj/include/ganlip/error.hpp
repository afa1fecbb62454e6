#pragma once

#include <stdexcept>
#include <string>

namespace ganlip {

enum class ErrorKind {
  InvalidArgument,  // bad shapes, bad config values, precondition violations
  Io,               // missing or unreadable files
  Format,           // malformed file contents
  Numeric,          // non-finite values, divergence
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::InvalidArgument, what);
}

}  // namespace ganlip
