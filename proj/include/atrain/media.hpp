#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>

namespace atrain::media {

inline constexpr int kCanonicalSampleRate = 16000;
inline constexpr int kCanonicalChannels = 1;
inline constexpr int kCanonicalBitsPerSample = 16;
inline constexpr double kDurationTolerance = 0.2;

struct MediaInfo {
  std::filesystem::path source_path;
  std::string container_format;
  double duration_s = 0.0;
  bool has_audio = false;
};

struct CanonicalAudio {
  std::filesystem::path wav_path;
  // The file the audio was converted from; engines that read sidecar data
  // (the mock engines) look next to it.
  std::filesystem::path source_path;
  int sample_rate_hz = kCanonicalSampleRate;
  int channels = kCanonicalChannels;
  double duration_s = 0.0;
};

struct WavHeader {
  std::uint16_t format_tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  std::uint64_t data_offset = 0;
  std::uint64_t data_bytes = 0;

  double duration_s() const;
  bool is_canonical() const;
};

// Walks the RIFF chunk list. Returns nullopt for anything that is not a
// PCM-describable RIFF/WAVE file.
std::optional<WavHeader> read_wav_header(const std::filesystem::path& path);

// Writes a canonical 44-byte-header PCM s16le WAV.
void write_wav(const std::filesystem::path& path, std::span<const std::int16_t> samples,
               int sample_rate_hz, int channels);

// Rewrites a PCM WAV so the header is exactly the 44-byte RIFF/fmt/data
// layout (drops LIST and other auxiliary chunks). No-op when already minimal.
void normalize_wav_header(const std::filesystem::path& path);

struct ConverterConfig {
  // Value of the `media_converter` config key; empty means search PATH.
  std::string media_converter;
  std::function<bool()> should_cancel;
};

// The configured converter when set, otherwise `ffmpeg` on PATH.
std::optional<std::filesystem::path> resolve_converter(const ConverterConfig& config);

MediaInfo probe_media(const std::filesystem::path& path, const ConverterConfig& config = {});

CanonicalAudio convert_to_canonical(const MediaInfo& info, const std::filesystem::path& workdir,
                                    const ConverterConfig& config = {});

}  // namespace atrain::media
