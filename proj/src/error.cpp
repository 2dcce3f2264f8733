#include "atrain/error.hpp"

namespace atrain {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnreadableMedia: return "UnreadableMedia";
    case ErrorCode::NoAudioStream: return "NoAudioStream";
    case ErrorCode::ConversionFailed: return "ConversionFailed";
    case ErrorCode::ConverterNotFound: return "ConverterNotFound";
    case ErrorCode::ModelNotInstalled: return "ModelNotInstalled";
    case ErrorCode::EngineFailure: return "EngineFailure";
    case ErrorCode::UnsupportedLanguage: return "UnsupportedLanguage";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::DeviceUnavailable: return "DeviceUnavailable";
    case ErrorCode::JobNotFound: return "JobNotFound";
    case ErrorCode::NetworkAttemptDenied: return "NetworkAttemptDenied";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::DownloadFailed: return "DownloadFailed";
    case ErrorCode::ZeroDuration: return "ZeroDuration";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::EmptyResults: return "EmptyResults";
    case ErrorCode::Cancelled: return "Cancelled";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Internal: return "Internal";
  }
  return "Internal";
}

}  // namespace atrain
