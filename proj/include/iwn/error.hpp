#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace iwn {

enum class ErrorKind {
  UnreadableFile,
  Io,
  ShapeMismatch,
  WrongTransformKind,
  ZeroStrength,
  UnsupportedKind,
  EmptyPool,
  InvalidConfig,
  StaleSnapshot,
  NonFiniteLoss,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it onto a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace iwn
