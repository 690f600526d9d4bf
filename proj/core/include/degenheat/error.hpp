#pragma once

#include <stdexcept>
#include <string>

namespace degenheat {

enum class ErrorKind { domain, usage, input, numerical };

/// Every failure raised by the library carries one of the four kinds so the
/// CLI can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) fail(kind, what);
}

}  // namespace degenheat
