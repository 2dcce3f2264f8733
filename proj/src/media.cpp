#include "atrain/media.hpp"

#include <unistd.h>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <regex>
#include <vector>

#include "atrain/error.hpp"
#include "atrain/process.hpp"

namespace fs = std::filesystem;

namespace atrain::media {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b, 2);
}

void write_canonical_header(std::ostream& os, std::uint32_t data_bytes, std::uint32_t sample_rate,
                            std::uint16_t channels) {
  const std::uint16_t block_align = static_cast<std::uint16_t>(channels * 2);
  os.write("RIFF", 4);
  put32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put32(os, 16);
  put16(os, 1);
  put16(os, channels);
  put32(os, sample_rate);
  put32(os, sample_rate * block_align);
  put16(os, block_align);
  put16(os, 16);
  os.write("data", 4);
  put32(os, data_bytes);
}

// Magic numbers of common still-image and document formats. These can never
// carry an audio stream, so they are rejected without asking the converter.
bool looks_like_non_audio(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<unsigned char, 8> magic{};
  in.read(reinterpret_cast<char*>(magic.data()), magic.size());
  const auto n = static_cast<std::size_t>(in.gcount());
  auto starts = [&](std::initializer_list<unsigned char> sig) {
    if (n < sig.size()) return false;
    return std::equal(sig.begin(), sig.end(), magic.begin());
  };
  return starts({0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a}) || starts({0xff, 0xd8, 0xff}) ||
         starts({'G', 'I', 'F', '8'}) || starts({'%', 'P', 'D', 'F'});
}

std::string tail_lines(const std::string& text, std::size_t max_lines) {
  std::size_t pos = text.size();
  std::size_t lines = 0;
  while (pos > 0 && lines <= max_lines) {
    pos = text.rfind('\n', pos - 1);
    if (pos == std::string::npos) return text;
    ++lines;
  }
  return text.substr(pos + 1);
}

fs::path require_converter(const ConverterConfig& config) {
  auto converter = resolve_converter(config);
  if (!converter) {
    throw Error(ErrorCode::ConverterNotFound,
                config.media_converter.empty()
                    ? std::string("no media converter found: install ffmpeg or set media_converter")
                    : "media converter not executable: " + config.media_converter);
  }
  return *converter;
}

MediaInfo probe_with_converter(const fs::path& path, const ConverterConfig& config) {
  const auto converter = require_converter(config);
  proc::RunOptions opts;
  opts.should_cancel = config.should_cancel;
  auto result = proc::run({converter.string(), "-hide_banner", "-nostdin", "-i", path.string()}, opts);
  const std::string& log = result.err;

  static const std::regex input_re(R"(Input #0, (.+?), from ')");
  static const std::regex duration_re(R"(Duration: (\d+):(\d{2}):(\d{2}(?:\.\d+)?))");
  static const std::regex audio_re(R"(Stream #\d+:\d+.*: Audio:)");

  std::smatch m;
  if (!std::regex_search(log, m, input_re)) {
    throw Error(ErrorCode::UnreadableMedia,
                "cannot read media '" + path.string() + "': " + tail_lines(log, 3));
  }
  MediaInfo info;
  info.source_path = path;
  info.container_format = m[1].str();
  if (std::regex_search(log, m, duration_re)) {
    info.duration_s = std::stod(m[1].str()) * 3600.0 + std::stod(m[2].str()) * 60.0 +
                      std::stod(m[3].str());
  }
  info.has_audio = std::regex_search(log, audio_re);
  if (!info.has_audio) {
    throw Error(ErrorCode::NoAudioStream, "no audio stream in '" + path.string() + "'");
  }
  return info;
}

}  // namespace

double WavHeader::duration_s() const {
  const std::uint64_t frame_bytes =
      static_cast<std::uint64_t>(channels) * ((bits_per_sample + 7u) / 8u);
  if (sample_rate == 0 || frame_bytes == 0) return 0.0;
  return static_cast<double>(data_bytes / frame_bytes) / static_cast<double>(sample_rate);
}

bool WavHeader::is_canonical() const {
  return format_tag == 1 && channels == kCanonicalChannels && sample_rate == kCanonicalSampleRate &&
         bits_per_sample == kCanonicalBitsPerSample;
}

std::optional<WavHeader> read_wav_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::error_code ec;
  const auto file_size = fs::file_size(path, ec);
  if (ec) return std::nullopt;

  std::array<unsigned char, 12> riff{};
  if (!in.read(reinterpret_cast<char*>(riff.data()), riff.size())) return std::nullopt;
  if (std::memcmp(riff.data(), "RIFF", 4) != 0 || std::memcmp(riff.data() + 8, "WAVE", 4) != 0) {
    return std::nullopt;
  }

  WavHeader header;
  bool have_fmt = false;
  std::uint64_t pos = 12;
  while (pos + 8 <= file_size) {
    std::array<unsigned char, 8> chunk{};
    in.seekg(static_cast<std::streamoff>(pos));
    if (!in.read(reinterpret_cast<char*>(chunk.data()), chunk.size())) break;
    const std::uint32_t size = le32(chunk.data() + 4);
    const std::uint64_t body = pos + 8;
    if (std::memcmp(chunk.data(), "fmt ", 4) == 0) {
      if (size < 16) return std::nullopt;
      std::array<unsigned char, 16> fmt{};
      if (!in.read(reinterpret_cast<char*>(fmt.data()), fmt.size())) return std::nullopt;
      header.format_tag = le16(fmt.data());
      header.channels = le16(fmt.data() + 2);
      header.sample_rate = le32(fmt.data() + 4);
      header.bits_per_sample = le16(fmt.data() + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format tag in the sub-format GUID.
      if (header.format_tag == 0xfffe && size >= 40) {
        std::array<unsigned char, 24> ext{};
        if (in.read(reinterpret_cast<char*>(ext.data()), ext.size())) {
          header.format_tag = le16(ext.data() + 8);
        }
      }
      have_fmt = true;
    } else if (std::memcmp(chunk.data(), "data", 4) == 0) {
      if (!have_fmt) return std::nullopt;
      header.data_offset = body;
      // Streaming writers leave 0 or 0xffffffff as the data size.
      const std::uint64_t available = file_size - body;
      header.data_bytes = (size == 0 || size == 0xffffffffu || size > available) ? available : size;
      return header;
    }
    pos = body + size + (size & 1u);
  }
  return std::nullopt;
}

void write_wav(const fs::path& path, std::span<const std::int16_t> samples, int sample_rate_hz,
               int channels) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * sizeof(std::int16_t));
  write_canonical_header(out, data_bytes, static_cast<std::uint32_t>(sample_rate_hz),
                         static_cast<std::uint16_t>(channels));
  for (std::int16_t s : samples) put16(out, static_cast<std::uint16_t>(s));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

void normalize_wav_header(const fs::path& path) {
  auto header = read_wav_header(path);
  if (!header || header->format_tag != 1) {
    throw Error(ErrorCode::ConversionFailed, "not a PCM WAV file: " + path.string());
  }
  std::error_code ec;
  const auto file_size = fs::file_size(path, ec);
  if (header->data_offset == 44 && file_size == 44 + header->data_bytes) {
    std::ifstream in(path, std::ios::binary);
    std::array<unsigned char, 44> raw{};
    in.read(reinterpret_cast<char*>(raw.data()), raw.size());
    if (le32(raw.data() + 16) == 16 && le32(raw.data() + 40) == header->data_bytes &&
        le32(raw.data() + 4) == 36 + header->data_bytes) {
      return;
    }
  }

  const fs::path tmp = path.string() + ".hdr";
  {
    std::ifstream in(path, std::ios::binary);
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!in || !out) throw Error(ErrorCode::Io, "cannot rewrite " + path.string());
    write_canonical_header(out, static_cast<std::uint32_t>(header->data_bytes), header->sample_rate,
                           header->channels);
    in.seekg(static_cast<std::streamoff>(header->data_offset));
    std::vector<char> buf(1 << 16);
    std::uint64_t left = header->data_bytes;
    while (left > 0) {
      const auto want = static_cast<std::streamsize>(std::min<std::uint64_t>(left, buf.size()));
      in.read(buf.data(), want);
      const auto got = in.gcount();
      if (got <= 0) break;
      out.write(buf.data(), got);
      left -= static_cast<std::uint64_t>(got);
    }
    if (!out) throw Error(ErrorCode::Io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::optional<fs::path> resolve_converter(const ConverterConfig& config) {
  if (!config.media_converter.empty()) return proc::find_executable(config.media_converter);
  return proc::find_executable("ffmpeg");
}

MediaInfo probe_media(const fs::path& path, const ConverterConfig& config) {
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    throw Error(ErrorCode::FileNotFound, "no such file: " + path.string());
  }
  if (!fs::is_regular_file(path, ec) || ::access(path.c_str(), R_OK) != 0) {
    throw Error(ErrorCode::UnreadableMedia, "not a readable file: " + path.string());
  }

  if (auto wav = read_wav_header(path)) {
    MediaInfo info;
    info.source_path = path;
    info.container_format = "wav";
    info.duration_s = wav->duration_s();
    info.has_audio = wav->channels > 0 && wav->sample_rate > 0;
    if (!info.has_audio) {
      throw Error(ErrorCode::NoAudioStream, "WAV without audio format: " + path.string());
    }
    return info;
  }
  if (looks_like_non_audio(path)) {
    throw Error(ErrorCode::NoAudioStream, "no audio stream in '" + path.string() + "'");
  }
  return probe_with_converter(path, config);
}

CanonicalAudio convert_to_canonical(const MediaInfo& info, const fs::path& workdir,
                                    const ConverterConfig& config) {
  if (!info.has_audio) {
    throw Error(ErrorCode::NoAudioStream, "no audio stream in '" + info.source_path.string() + "'");
  }
  std::error_code ec;
  fs::create_directories(workdir, ec);
  const fs::path target = workdir / "audio.wav";
  const fs::path staging = workdir / "audio.part.wav";

  auto existing = read_wav_header(info.source_path);
  if (existing && existing->is_canonical()) {
    fs::copy_file(info.source_path, staging, fs::copy_options::overwrite_existing, ec);
    if (ec) throw Error(ErrorCode::Io, "copy failed: " + ec.message());
  } else {
    const auto converter = require_converter(config);
    proc::RunOptions opts;
    opts.should_cancel = config.should_cancel;
    auto result = proc::run({converter.string(), "-hide_banner", "-nostdin", "-loglevel", "error",
                             "-y", "-i", info.source_path.string(), "-map", "0:a:0", "-vn", "-sn",
                             "-dn", "-ac", std::to_string(kCanonicalChannels), "-ar",
                             std::to_string(kCanonicalSampleRate), "-c:a", "pcm_s16le",
                             "-map_metadata", "-1", "-fflags", "+bitexact", "-flags:a",
                             "+bitexact", "-f", "wav", staging.string()},
                            opts);
    if (result.cancelled) throw Error(ErrorCode::Cancelled, "conversion cancelled");
    if (result.exit_code != 0) {
      fs::remove(staging, ec);
      throw Error(ErrorCode::ConversionFailed,
                  "converter exited with status " + std::to_string(result.exit_code) + ": " +
                      tail_lines(result.err, 5));
    }
  }

  normalize_wav_header(staging);
  auto header = read_wav_header(staging);
  if (!header || !header->is_canonical()) {
    throw Error(ErrorCode::ConversionFailed, "converter output is not 16 kHz mono s16le PCM");
  }
  CanonicalAudio audio;
  audio.source_path = info.source_path;
  audio.duration_s = header->duration_s();
  if (info.duration_s > 0.0 && std::abs(audio.duration_s - info.duration_s) > kDurationTolerance) {
    throw Error(ErrorCode::ConversionFailed,
                "converted duration " + std::to_string(audio.duration_s) + " s differs from source " +
                    std::to_string(info.duration_s) + " s");
  }
  fs::rename(staging, target);
  audio.wav_path = target;
  return audio;
}

}  // namespace atrain::media
