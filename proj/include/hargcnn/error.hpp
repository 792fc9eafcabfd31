#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hargcnn {

enum class ErrorKind {
  dimension,
  config,
  validation,
  state,
  ordering,
  format,
  range,
  no_targets,
  numerical,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace hargcnn
