#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace atrain {

enum class ErrorCode {
  InvalidArgument,
  FileNotFound,
  UnreadableMedia,
  NoAudioStream,
  ConversionFailed,
  ConverterNotFound,
  ModelNotInstalled,
  EngineFailure,
  UnsupportedLanguage,
  InvalidConfig,
  DeviceUnavailable,
  JobNotFound,
  NetworkAttemptDenied,
  ChecksumMismatch,
  DownloadFailed,
  ZeroDuration,
  NegativeTime,
  EmptyResults,
  Cancelled,
  Io,
  Internal,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the core carries one of the codes above; the C API
// maps them one-to-one onto atrain_status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace atrain
