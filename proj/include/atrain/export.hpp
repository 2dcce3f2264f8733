#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "atrain/align.hpp"

namespace atrain::exporters {

inline constexpr std::string_view kTimestampedTxt = "transcript_timestamps.txt";
inline constexpr std::string_view kPlainTxt = "transcript.txt";
inline constexpr std::string_view kQdaTxt = "transcript_qda.txt";
inline constexpr std::string_view kRawJson = "transcript.json";

// The `metadata` block of the raw JSON export.
struct JobMetadata {
  std::string source_file;
  double duration_s = 0.0;
  std::string model;
  std::string language = "auto";
  // "off", "auto" or a decimal count; serialized as a number when numeric.
  std::string num_speakers = "off";
  bool diarization_enabled = false;
  bool translate = false;
  std::optional<std::string> started_at;
  std::optional<std::string> finished_at;
  std::optional<double> processing_time_s;
  std::optional<double> rpt;
  std::string tool_version;

  bool operator==(const JobMetadata&) const = default;
};

// "HH:MM:SS.t", tenths truncated. Throws NegativeTime for t < 0 or NaN.
std::string format_timestamp(double t);
// Inverse of format_timestamp; nullopt on malformed input.
std::optional<double> parse_timestamp(std::string_view text);

std::string export_timestamped_txt(const align::AlignedTranscript& t);
std::string export_plain_txt(const align::AlignedTranscript& t);
std::string export_qda_txt(const align::AlignedTranscript& t);
std::string export_raw_json(const align::AlignedTranscript& t, const JobMetadata& meta);

struct RawTranscript {
  align::AlignedTranscript transcript;
  JobMetadata metadata;
};

// Throws InvalidArgument on documents that do not follow the raw schema.
RawTranscript parse_raw_json(std::string_view text);

struct ExportBundle {
  std::filesystem::path timestamped_txt;
  std::filesystem::path plain_txt;
  std::filesystem::path qda_txt;
  std::filesystem::path raw_json;
  JobMetadata metadata;
};

ExportBundle write_exports(const align::AlignedTranscript& t, const JobMetadata& meta,
                           const std::filesystem::path& dir);

}  // namespace atrain::exporters
