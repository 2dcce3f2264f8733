#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "atrain/engines.hpp"
#include "atrain/jobs.hpp"

namespace testsupport {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const noexcept { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// ffmpeg for tests: $ATRAIN_TEST_FFMPEG, then the path found at configure
// time. Empty when none is usable.
std::string ffmpeg();

fs::path source_dir();

// Little-endian PCM16 writer, written out byte by byte (does not use the
// library's WAV code). A quiet 220 Hz tone.
void write_tone_wav(const fs::path& path, int sample_rate, int channels, double seconds);

// Fields of the canonical 44-byte header, read positionally.
struct Header44 {
  std::string riff, wave, fmt, data;
  std::uint32_t riff_size = 0, fmt_size = 0, sample_rate = 0, byte_rate = 0, data_size = 0;
  std::uint16_t format = 0, channels = 0, block_align = 0, bits = 0;
  std::uintmax_t file_size = 0;
};
std::optional<Header44> read_header44(const fs::path& path);

// `<dir>/<stem>.wav` (10 s, 16 kHz mono) plus the dialogue sidecars.
fs::path make_dialogue_fixture(const fs::path& dir, const std::string& stem = "dialogue", double seconds = 10.0);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

// Job manager options over a mock engine, with models resolved from the
// shipped manifest and a private model directory.
atrain::jobs::ManagerOptions mock_manager_options(const fs::path& data_dir, atrain::engines::MockOptions mock = {});

// Writes an executable shell script.
fs::path write_script(const fs::path& path, const std::string& body);

}  // namespace testsupport
