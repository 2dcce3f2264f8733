#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "atrain/media.hpp"

namespace atrain::engines {

struct WordToken {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
  double confidence = 0.0;

  bool operator==(const WordToken&) const = default;
};

struct TranscriptSegment {
  int id = 0;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
  std::vector<WordToken> words;

  bool operator==(const TranscriptSegment&) const = default;
};

struct SpeakerTurn {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string speaker;

  bool operator==(const SpeakerTurn&) const = default;
};

enum class ModelTier { Tiny, Base, Small, Medium, Large };

std::string_view to_string(ModelTier tier) noexcept;
std::optional<ModelTier> parse_model_tier(std::string_view id) noexcept;
int tier_ordinal(ModelTier tier) noexcept;

struct ModelSpec {
  std::string model_id;
  ModelTier tier = ModelTier::Tiny;
  std::optional<std::filesystem::path> local_path;
  bool installed = false;
};

// ---------------------------------------------------------------------------
// Languages

// The 57 transcription languages, as ISO 639-1 codes.
std::span<const std::string_view> supported_languages() noexcept;
bool is_supported_language(std::string_view code) noexcept;
// Accepts "auto" or a supported code; throws UnsupportedLanguage otherwise.
void validate_language(std::string_view code);

// ---------------------------------------------------------------------------
// Devices

enum class Device { Cpu, Gpu };
enum class DevicePreference { Auto, Cpu, Gpu };

std::string_view to_string(Device device) noexcept;
std::string_view to_string(DevicePreference pref) noexcept;
std::optional<DevicePreference> parse_device_preference(std::string_view text) noexcept;

using AcceleratorProbe = std::function<bool()>;

// True when an NVIDIA driver is loaded and the CUDA driver library can be
// opened.
bool default_accelerator_probe();

// Auto picks the accelerator when present. A forced Gpu preference without
// an accelerator throws DeviceUnavailable rather than falling back.
Device detect_device(DevicePreference pref = DevicePreference::Auto,
                     const AcceleratorProbe& accelerator_present = default_accelerator_probe);

// ---------------------------------------------------------------------------
// Engine contracts

struct RunHooks {
  // percent in [0, 100]; phase is a short machine-readable tag such as
  // "model_load" or "inference".
  std::function<void(double percent, std::string_view phase)> progress;
  std::function<bool()> cancelled;
  // Job-private directory for backend intermediates.
  std::filesystem::path scratch_dir;

  void report(double percent, std::string_view phase) const {
    if (progress) progress(percent, phase);
  }
  // Throws Error(Cancelled) once cancellation was requested.
  void check_cancelled() const;
};

struct TranscribeOptions {
  std::string language = "auto";
  bool translate = false;
};

class AsrEngine {
 public:
  virtual ~AsrEngine() = default;
  virtual std::vector<TranscriptSegment> transcribe(const media::CanonicalAudio& audio,
                                                    const TranscribeOptions& options,
                                                    const RunHooks& hooks) = 0;
};

class Diarizer {
 public:
  virtual ~Diarizer() = default;
  // num_speakers = nullopt lets the backend estimate the count.
  virtual std::vector<SpeakerTurn> diarize(const media::CanonicalAudio& audio,
                                           std::optional<int> num_speakers,
                                           const RunHooks& hooks) = 0;
};

class EngineFactory {
 public:
  virtual ~EngineFactory() = default;
  virtual std::string name() const = 0;
  // Model construction is the slow "model_load" phase.
  virtual std::unique_ptr<AsrEngine> make_asr(const ModelSpec& model, Device device,
                                              const RunHooks& hooks) = 0;
  virtual std::unique_ptr<Diarizer> make_diarizer(Device device, const RunHooks& hooks) = 0;
  virtual bool requires_installed_model() const = 0;
  virtual bool diarization_available() const = 0;
};

// ---------------------------------------------------------------------------
// Output normalization shared by every backend

// Splits text on whitespace and spreads [start_s, end_s] over the words in
// proportion to their character counts.
std::vector<WordToken> interpolate_words(double start_s, double end_s, std::string_view text);

// Trims and single-lines text, drops empty segments/words, quantizes times to
// milliseconds, clamps to the audio duration, interpolates missing word
// timing, sorts by start and renumbers ids from 0.
void normalize_transcript(std::vector<TranscriptSegment>& segments, double duration_s);

// Throws EngineFailure when a transcript violates the segment/word invariants.
void validate_transcript(const std::vector<TranscriptSegment>& segments, double duration_s);

// Drops empty turns, quantizes to milliseconds, sorts, and relabels to a
// dense SPEAKER_00.. set (by first appearance) unless already dense.
void normalize_turns(std::vector<SpeakerTurn>& turns);

// Throws EngineFailure on unsorted/empty turns or more labels than requested.
void validate_turns(const std::vector<SpeakerTurn>& turns, std::optional<int> num_speakers);

std::string speaker_label(int index);

// ---------------------------------------------------------------------------
// Mock engines (sidecar driven)

struct MockOptions {
  // The ASR mock sleeps delay_factor * audio duration.
  double delay_factor = 0.0;
  // "load", "transcribe" or "diarize": throw EngineFailure at that point.
  std::string fail_at;
  // "host:port": the ASR mock tries to open a TCP connection there, like a
  // backend that auto-downloads weights. Failures are ignored.
  std::string network_probe;
  bool requires_installed_model = false;
  // Extra place to look for sidecars, for inputs that were moved (uploads).
  std::filesystem::path sidecar_dir;
};

// `<stem><suffix>` next to the source file, else next to the WAV, else in
// `extra_dir` (named after the source stem).
std::optional<std::filesystem::path> find_sidecar(const media::CanonicalAudio& audio,
                                                  std::string_view suffix,
                                                  const std::filesystem::path& extra_dir = {});

inline constexpr std::string_view kTranscriptSidecar = ".transcript.json";
inline constexpr std::string_view kTurnsSidecar = ".turns.json";

std::vector<TranscriptSegment> read_transcript_sidecar(const std::filesystem::path& path);
std::vector<SpeakerTurn> read_turns_sidecar(const std::filesystem::path& path);

std::unique_ptr<EngineFactory> make_mock_factory(MockOptions options);

// ---------------------------------------------------------------------------
// Subprocess backends

struct BackendOptions {
  // whisper.cpp command line tool (whisper-cli); bare names search PATH.
  std::string whisper_cli = "whisper-cli";
  int threads = 0;
  // argv template for an external diarizer that writes RTTM. Placeholders:
  // {wav} {rttm} {num_speakers} ("auto" or N) {device}.
  std::vector<std::string> diarizer_command;
};

// Environment given to backend subprocesses: hub/transformers offline flags
// and proxies pointed at a closed local port.
std::vector<std::pair<std::string, std::string>> offline_environment();

// Parses whisper.cpp `-ojf` output into segments; words are rebuilt from
// sub-word tokens.
std::vector<TranscriptSegment> parse_whisper_cli_json(std::string_view json_text);

// Parses NIST RTTM `SPEAKER` records into turns (labels as written).
std::vector<SpeakerTurn> parse_rttm(std::string_view text);

std::unique_ptr<EngineFactory> make_backend_factory(BackendOptions options);

}  // namespace atrain::engines
