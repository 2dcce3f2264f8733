#include "support.hpp"

#include <sys/stat.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "atrain/models.hpp"
#include "atrain/version.hpp"

namespace testsupport {

TempDir::TempDir() {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    auto candidate = fs::temp_directory_path() / ("atrain-test-" + std::to_string(rd()));
    std::error_code ec;
    if (fs::create_directory(candidate, ec)) {
      path_ = candidate;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  if (std::getenv("ATRAIN_KEEP_TEST_DIRS") == nullptr) fs::remove_all(path_, ec);
}

std::string ffmpeg() {
  std::string candidate;
  if (const char* env = std::getenv("ATRAIN_TEST_FFMPEG"); env != nullptr && *env != '\0') {
    candidate = env;
  } else {
    candidate = ATRAIN_TEST_FFMPEG;
  }
  if (candidate.empty() || ::access(candidate.c_str(), X_OK) != 0) return {};
  return candidate;
}

fs::path source_dir() { return ATRAIN_TEST_SOURCE_DIR; }

namespace {

void put16(std::ostream& o, std::uint16_t v) {
  o.put(static_cast<char>(v & 0xff));
  o.put(static_cast<char>(v >> 8));
}

void put32(std::ostream& o, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) o.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get16(const unsigned char* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }

std::uint32_t get32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_tone_wav(const fs::path& path, int sample_rate, int channels, double seconds) {
  const auto frames = static_cast<std::uint32_t>(std::llround(seconds * sample_rate));
  const std::uint32_t data_bytes = frames * static_cast<std::uint32_t>(channels) * 2;
  std::ofstream o(path, std::ios::binary);
  o.write("RIFF", 4);
  put32(o, 36 + data_bytes);
  o.write("WAVEfmt ", 8);
  put32(o, 16);
  put16(o, 1);
  put16(o, static_cast<std::uint16_t>(channels));
  put32(o, static_cast<std::uint32_t>(sample_rate));
  put32(o, static_cast<std::uint32_t>(sample_rate * channels * 2));
  put16(o, static_cast<std::uint16_t>(channels * 2));
  put16(o, 16);
  o.write("data", 4);
  put32(o, data_bytes);
  for (std::uint32_t i = 0; i < frames; ++i) {
    const auto s = static_cast<std::int16_t>(2000.0 * std::sin(2.0 * M_PI * 220.0 * i / sample_rate));
    for (int c = 0; c < channels; ++c) put16(o, static_cast<std::uint16_t>(s));
  }
}

std::optional<Header44> read_header44(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char b[44];
  if (!in.read(reinterpret_cast<char*>(b), 44)) return std::nullopt;
  Header44 h;
  h.riff.assign(reinterpret_cast<char*>(b), 4);
  h.riff_size = get32(b + 4);
  h.wave.assign(reinterpret_cast<char*>(b + 8), 4);
  h.fmt.assign(reinterpret_cast<char*>(b + 12), 4);
  h.fmt_size = get32(b + 16);
  h.format = get16(b + 20);
  h.channels = get16(b + 22);
  h.sample_rate = get32(b + 24);
  h.byte_rate = get32(b + 28);
  h.block_align = get16(b + 32);
  h.bits = get16(b + 34);
  h.data.assign(reinterpret_cast<char*>(b + 36), 4);
  h.data_size = get32(b + 40);
  h.file_size = fs::file_size(path);
  return h;
}

fs::path make_dialogue_fixture(const fs::path& dir, const std::string& stem, double seconds) {
  fs::create_directories(dir);
  const fs::path wav = dir / (stem + ".wav");
  write_tone_wav(wav, 16000, 1, seconds);
  fs::copy_file(source_dir() / "fixtures" / "dialogue.transcript.json", dir / (stem + ".transcript.json"),
                fs::copy_options::overwrite_existing);
  fs::copy_file(source_dir() / "fixtures" / "dialogue.turns.json", dir / (stem + ".turns.json"),
                fs::copy_options::overwrite_existing);
  return wav;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

atrain::jobs::ManagerOptions mock_manager_options(const fs::path& data_dir, atrain::engines::MockOptions mock) {
  atrain::jobs::ManagerOptions o;
  o.data_dir = data_dir;
  o.registry = std::make_shared<atrain::models::ModelRegistry>(
      atrain::models::Manifest::load(ATRAIN_TEST_MANIFEST), data_dir / "models");
  o.engines = atrain::engines::make_mock_factory(std::move(mock));
  o.accelerator = [] { return false; };
  o.converter.media_converter = ffmpeg();
  o.tool_version = std::string(atrain::kVersion);
  return o;
}

fs::path write_script(const fs::path& path, const std::string& body) {
  write_text(path, "#!/bin/sh\n" + body);
  ::chmod(path.c_str(), 0755);
  return path;
}

}  // namespace testsupport
