#include <gtest/gtest.h>

#include <sys/stat.h>

#include <cmath>
#include <fstream>

#include "atrain/error.hpp"
#include "atrain/media.hpp"
#include "atrain/process.hpp"
#include "support.hpp"

using namespace atrain;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

#define REQUIRE_FFMPEG()                                        \
  if (testsupport::ffmpeg().empty()) GTEST_SKIP() << "no ffmpeg available"

media::ConverterConfig converter() { return {testsupport::ffmpeg(), {}}; }

void ffmpeg_make(const std::vector<std::string>& args) {
  std::vector<std::string> argv = {testsupport::ffmpeg(), "-hide_banner", "-nostdin", "-loglevel", "error", "-y"};
  argv.insert(argv.end(), args.begin(), args.end());
  const auto r = proc::run(argv);
  ASSERT_EQ(r.exit_code, 0) << r.err;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no atrain::Error thrown";
  return ErrorCode::Internal;
}

void expect_canonical_header(const fs::path& wav) {
  const auto h = testsupport::read_header44(wav);
  ASSERT_TRUE(h);
  EXPECT_EQ(h->riff, "RIFF");
  EXPECT_EQ(h->wave, "WAVE");
  EXPECT_EQ(h->fmt, "fmt ");
  EXPECT_EQ(h->fmt_size, 16u);
  EXPECT_EQ(h->format, 1);
  EXPECT_EQ(h->channels, 1);
  EXPECT_EQ(h->sample_rate, 16000u);
  EXPECT_EQ(h->byte_rate, 32000u);
  EXPECT_EQ(h->block_align, 2);
  EXPECT_EQ(h->bits, 16);
  EXPECT_EQ(h->data, "data");
  EXPECT_EQ(h->riff_size, h->file_size - 8);
  EXPECT_EQ(h->data_size, h->file_size - 44);
}

struct FileState {
  std::string bytes;
  fs::file_time_type mtime;
  std::vector<std::string> siblings;
};

FileState snapshot(const fs::path& p) {
  FileState s{testsupport::read_text(p), fs::last_write_time(p), {}};
  for (const auto& e : fs::directory_iterator(p.parent_path())) s.siblings.push_back(e.path().filename().string());
  std::sort(s.siblings.begin(), s.siblings.end());
  return s;
}

}  // namespace

TEST(WavHeader, ReadsIndependentlyWrittenFile) {
  TempDir dir;
  testsupport::write_tone_wav(dir / "a.wav", 16000, 1, 10.0);
  const auto h = media::read_wav_header(dir / "a.wav");
  ASSERT_TRUE(h);
  EXPECT_TRUE(h->is_canonical());
  EXPECT_EQ(h->data_offset, 44u);
  EXPECT_DOUBLE_EQ(h->duration_s(), 10.0);
}

TEST(WavHeader, StereoIsNotCanonical) {
  TempDir dir;
  testsupport::write_tone_wav(dir / "s.wav", 44100, 2, 1.0);
  const auto h = media::read_wav_header(dir / "s.wav");
  ASSERT_TRUE(h);
  EXPECT_FALSE(h->is_canonical());
  EXPECT_NEAR(h->duration_s(), 1.0, 1e-9);
}

TEST(WavHeader, SkipsExtraChunksAndNormalizes) {
  TempDir dir;
  const auto plain = dir / "plain.wav";
  testsupport::write_tone_wav(plain, 16000, 1, 2.0);
  auto bytes = testsupport::read_text(plain);
  // Insert a LIST chunk between fmt and data.
  std::string list = std::string("LIST") + std::string("\x06\x00\x00\x00", 4) + "INFOab";
  std::string extended = bytes.substr(0, 36) + list + bytes.substr(36);
  const std::uint32_t riff = static_cast<std::uint32_t>(extended.size() - 8);
  for (int i = 0; i < 4; ++i) extended[4 + i] = static_cast<char>((riff >> (8 * i)) & 0xff);
  const auto path = dir / "ext.wav";
  testsupport::write_text(path, extended);

  const auto h = media::read_wav_header(path);
  ASSERT_TRUE(h);
  EXPECT_EQ(h->data_offset, 44u + list.size());
  EXPECT_DOUBLE_EQ(h->duration_s(), 2.0);

  media::normalize_wav_header(path);
  expect_canonical_header(path);
  EXPECT_EQ(testsupport::read_text(path), bytes);
}

TEST(WavHeader, RejectsNonWav) {
  TempDir dir;
  testsupport::write_text(dir / "x.txt", "hello, this is not audio at all........................");
  EXPECT_FALSE(media::read_wav_header(dir / "x.txt"));
}

TEST(Probe, SyntheticWavOfKnownLength) {
  TempDir dir;
  testsupport::write_tone_wav(dir / "silence_10s.wav", 16000, 1, 10.0);
  const auto info = media::probe_media(dir / "silence_10s.wav");
  EXPECT_EQ(info.container_format, "wav");
  EXPECT_DOUBLE_EQ(info.duration_s, 10.0);
  EXPECT_TRUE(info.has_audio);
}

TEST(Probe, MissingFile) {
  TempDir dir;
  EXPECT_EQ(code_of([&] { media::probe_media(dir / "nope.mp3"); }), ErrorCode::FileNotFound);
}

TEST(Probe, DirectoryIsUnreadable) {
  TempDir dir;
  EXPECT_EQ(code_of([&] { media::probe_media(dir.path()); }), ErrorCode::UnreadableMedia);
}

TEST(Probe, ImageHasNoAudio) {
  TempDir dir;
  const std::string png = std::string("\x89PNG\r\n\x1a\n", 8) + std::string(64, '\0');
  testsupport::write_text(dir / "image.png", png);
  EXPECT_EQ(code_of([&] { media::probe_media(dir / "image.png", converter()); }), ErrorCode::NoAudioStream);
}

TEST(Probe, MissingConverter) {
  TempDir dir;
  testsupport::write_text(dir / "clip.mp3", std::string(256, 'x'));
  media::ConverterConfig cfg{(dir / "no-such-ffmpeg").string(), {}};
  EXPECT_EQ(code_of([&] { media::probe_media(dir / "clip.mp3", cfg); }), ErrorCode::ConverterNotFound);
}

TEST(Probe, GarbageIsUnreadable) {
  REQUIRE_FFMPEG();
  TempDir dir;
  std::string junk;
  for (int i = 0; i < 4096; ++i) junk.push_back(static_cast<char>((i * 7919) & 0xff));
  testsupport::write_text(dir / "junk.bin", junk);
  EXPECT_EQ(code_of([&] { media::probe_media(dir / "junk.bin", converter()); }), ErrorCode::UnreadableMedia);
}

TEST(Probe, DoesNotTouchTheFilesystem) {
  REQUIRE_FFMPEG();
  TempDir dir;
  const auto mp3 = dir / "tone.mp3";
  ffmpeg_make({"-f", "lavfi", "-i", "sine=frequency=300:duration=3", mp3.string()});
  const auto before = snapshot(mp3);
  media::probe_media(mp3, converter());
  const auto after = snapshot(mp3);
  EXPECT_EQ(before.bytes, after.bytes);
  EXPECT_EQ(before.mtime, after.mtime);
  EXPECT_EQ(before.siblings, after.siblings);
}

TEST(Convert, CanonicalWavIsCopiedUnchanged) {
  TempDir dir;
  const auto src = dir / "in.wav";
  testsupport::write_tone_wav(src, 16000, 1, 4.0);
  const auto original = testsupport::read_text(src);
  const auto info = media::probe_media(src);
  const auto audio = media::convert_to_canonical(info, dir / "work");
  EXPECT_EQ(audio.wav_path, dir / "work" / "audio.wav");
  EXPECT_EQ(testsupport::read_text(audio.wav_path), original);
  EXPECT_EQ(testsupport::read_text(src), original);
  EXPECT_DOUBLE_EQ(audio.duration_s, info.duration_s);
  EXPECT_EQ(audio.sample_rate_hz, 16000);
  EXPECT_EQ(audio.channels, 1);
  EXPECT_FALSE(fs::exists(dir / "work" / "audio.part.wav"));
}

TEST(Convert, StereoMp3ToCanonical) {
  REQUIRE_FFMPEG();
  TempDir dir;
  const auto mp3 = dir / "interview.mp3";
  ffmpeg_make({"-f", "lavfi", "-i", "sine=frequency=440:duration=10", "-ac", "2", "-ar", "44100", mp3.string()});
  const auto original = testsupport::read_text(mp3);
  const auto info = media::probe_media(mp3, converter());
  EXPECT_EQ(info.container_format, "mp3");
  EXPECT_TRUE(info.has_audio);
  EXPECT_NEAR(info.duration_s, 10.0, 0.2);

  const auto audio = media::convert_to_canonical(info, dir / "work", converter());
  expect_canonical_header(audio.wav_path);
  const auto h = testsupport::read_header44(audio.wav_path);
  const double independent_duration = static_cast<double>(h->data_size) / (16000.0 * 2.0);
  EXPECT_LE(std::abs(independent_duration - info.duration_s), media::kDurationTolerance);
  EXPECT_DOUBLE_EQ(audio.duration_s, independent_duration);
  EXPECT_EQ(testsupport::read_text(mp3), original);
}

TEST(Convert, VideoKeepsOnlyAudio) {
  REQUIRE_FFMPEG();
  TempDir dir;
  const auto mp4 = dir / "lecture.mp4";
  ffmpeg_make({"-f", "lavfi", "-i", "testsrc=duration=5:size=160x120:rate=10", "-f", "lavfi", "-i",
               "sine=frequency=500:duration=5", "-c:v", "libx264", "-c:a", "aac", "-shortest", mp4.string()});
  const auto info = media::probe_media(mp4, converter());
  EXPECT_TRUE(info.has_audio);
  const auto audio = media::convert_to_canonical(info, dir / "work", converter());
  expect_canonical_header(audio.wav_path);
  EXPECT_LE(std::abs(audio.duration_s - info.duration_s), media::kDurationTolerance);

  const auto probe = proc::run({testsupport::ffmpeg(), "-hide_banner", "-nostdin", "-i", audio.wav_path.string()});
  EXPECT_EQ(probe.err.find("Video:"), std::string::npos) << probe.err;
  EXPECT_NE(probe.err.find("Audio: pcm_s16le"), std::string::npos) << probe.err;
}

TEST(Convert, VideoWithoutAudioIsRejected) {
  REQUIRE_FFMPEG();
  TempDir dir;
  const auto mp4 = dir / "silent.mp4";
  ffmpeg_make({"-f", "lavfi", "-i", "testsrc=duration=2:size=160x120:rate=10", "-c:v", "libx264", mp4.string()});
  EXPECT_EQ(code_of([&] { media::probe_media(mp4, converter()); }), ErrorCode::NoAudioStream);
}

TEST(Convert, ConverterFailureCarriesDiagnostics) {
  TempDir dir;
  const auto fake = testsupport::write_script(dir / "fake-ffmpeg",
                                              "for a in \"$@\"; do last=\"$a\"; done\n"
                                              "echo \"decoder exploded on frame 12\" >&2\n"
                                              "exit 1\n");
  media::MediaInfo info{dir / "in.mp3", "mp3", 10.0, true};
  testsupport::write_text(info.source_path, std::string(128, 'x'));
  try {
    media::convert_to_canonical(info, dir / "work", {fake.string(), {}});
    FAIL() << "expected ConversionFailed";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConversionFailed);
    EXPECT_NE(std::string(e.what()).find("decoder exploded"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(dir / "work" / "audio.wav"));
}

TEST(Convert, DurationMismatchIsAFailure) {
  TempDir dir;
  const auto src = dir / "in.wav";
  testsupport::write_tone_wav(src, 16000, 1, 3.0);
  media::MediaInfo info{src, "wav", 5.0, true};
  EXPECT_EQ(code_of([&] { media::convert_to_canonical(info, dir / "work"); }), ErrorCode::ConversionFailed);
}

TEST(Convert, NoAudioInfoIsRejected) {
  TempDir dir;
  media::MediaInfo info{dir / "x.mp4", "mp4", 3.0, false};
  EXPECT_EQ(code_of([&] { media::convert_to_canonical(info, dir / "work"); }), ErrorCode::NoAudioStream);
}
