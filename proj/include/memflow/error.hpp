#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memflow {

enum class Errc {
  MalformedRecord,
  BadTimestamp,
  IoError,
  CorruptStore,
  NetworkError,
  TimeoutError,
  BackendRefused,
  ClassificationUnavailable,
  IndexBuildError,
  EmbedderError,
  EmptyProfile,
  PinnedOverflow,
  BadDate,
  StoreNotReady,
  IndexNotReady,
  UnknownFormat,
  SchemaError,
  ConfigError,
};

std::string_view to_string(Errc code);

/// Every failure raised by the library carries one of the codes above so
/// callers can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace memflow
