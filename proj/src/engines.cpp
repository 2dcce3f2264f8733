#include "atrain/engines.hpp"

#include <dlfcn.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "atrain/error.hpp"

namespace fs = std::filesystem;

namespace atrain::engines {
namespace {

constexpr double kWordWindow = 0.5;

// Supported by the multilingual whisper checkpoints with usable accuracy.
constexpr std::array<std::string_view, 57> kLanguages = {
    "af", "ar", "hy", "az", "be", "bs", "bg", "ca", "zh", "hr", "cs", "da", "nl", "en", "et",
    "fi", "fr", "gl", "de", "el", "he", "hi", "hu", "is", "id", "it", "ja", "kn", "kk", "ko",
    "lv", "lt", "mk", "ms", "mr", "mi", "ne", "no", "fa", "pl", "pt", "ro", "ru", "sr", "sk",
    "sl", "es", "sw", "sv", "tl", "ta", "th", "tr", "uk", "ur", "vi", "cy"};

double quantize(double t) { return std::round(t * 1000.0) / 1000.0; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

std::size_t codepoints(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xc0) != 0x80; }));
}

}  // namespace

std::string_view to_string(ModelTier tier) noexcept {
  switch (tier) {
    case ModelTier::Tiny: return "tiny";
    case ModelTier::Base: return "base";
    case ModelTier::Small: return "small";
    case ModelTier::Medium: return "medium";
    case ModelTier::Large: return "large";
  }
  return "tiny";
}

std::optional<ModelTier> parse_model_tier(std::string_view id) noexcept {
  for (auto t : {ModelTier::Tiny, ModelTier::Base, ModelTier::Small, ModelTier::Medium, ModelTier::Large}) {
    if (id == to_string(t)) return t;
  }
  return std::nullopt;
}

int tier_ordinal(ModelTier tier) noexcept { return static_cast<int>(tier); }

std::span<const std::string_view> supported_languages() noexcept { return kLanguages; }

bool is_supported_language(std::string_view code) noexcept {
  return std::find(kLanguages.begin(), kLanguages.end(), code) != kLanguages.end();
}

void validate_language(std::string_view code) {
  if (code == "auto" || is_supported_language(code)) return;
  throw Error(ErrorCode::UnsupportedLanguage, "unsupported language code '" + std::string(code) + "'");
}

std::string_view to_string(Device device) noexcept { return device == Device::Gpu ? "gpu" : "cpu"; }

std::string_view to_string(DevicePreference pref) noexcept {
  switch (pref) {
    case DevicePreference::Auto: return "auto";
    case DevicePreference::Cpu: return "cpu";
    case DevicePreference::Gpu: return "gpu";
  }
  return "auto";
}

std::optional<DevicePreference> parse_device_preference(std::string_view text) noexcept {
  if (text == "auto") return DevicePreference::Auto;
  if (text == "cpu") return DevicePreference::Cpu;
  if (text == "gpu" || text == "cuda") return DevicePreference::Gpu;
  return std::nullopt;
}

bool default_accelerator_probe() {
  std::error_code ec;
  if (!fs::exists("/proc/driver/nvidia/version", ec)) return false;
  void* handle = ::dlopen("libcuda.so.1", RTLD_LAZY | RTLD_LOCAL);
  if (handle == nullptr) return false;
  ::dlclose(handle);
  return true;
}

Device detect_device(DevicePreference pref, const AcceleratorProbe& accelerator_present) {
  switch (pref) {
    case DevicePreference::Cpu:
      return Device::Cpu;
    case DevicePreference::Gpu:
      if (accelerator_present && accelerator_present()) return Device::Gpu;
      throw Error(ErrorCode::DeviceUnavailable, "device=gpu requested but no CUDA-capable accelerator was found");
    case DevicePreference::Auto:
      break;
  }
  return (accelerator_present && accelerator_present()) ? Device::Gpu : Device::Cpu;
}

void RunHooks::check_cancelled() const {
  if (cancelled && cancelled()) throw Error(ErrorCode::Cancelled, "cancelled");
}

std::string speaker_label(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "SPEAKER_%02d", index);
  return buf;
}

std::vector<WordToken> interpolate_words(double start_s, double end_s, std::string_view text) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) parts.emplace_back(text.substr(i, j - i));
    i = j;
  }
  std::vector<WordToken> words;
  if (parts.empty()) return words;
  std::size_t total = 0;
  for (const auto& p : parts) total += codepoints(p);
  const double span = std::max(0.0, end_s - start_s);
  std::size_t consumed = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    WordToken w;
    w.text = parts[k];
    w.start_s = start_s + span * static_cast<double>(consumed) / static_cast<double>(total);
    consumed += codepoints(parts[k]);
    w.end_s = k + 1 == parts.size()
                  ? std::max(start_s, end_s)
                  : start_s + span * static_cast<double>(consumed) / static_cast<double>(total);
    words.push_back(std::move(w));
  }
  return words;
}

void normalize_transcript(std::vector<TranscriptSegment>& segments, double duration_s) {
  const double limit = duration_s > 0.0 ? quantize(duration_s) : INFINITY;
  auto clamp_time = [&](double t) { return std::min(std::max(0.0, quantize(t)), limit); };

  std::vector<TranscriptSegment> kept;
  kept.reserve(segments.size());
  for (auto& seg : segments) {
    seg.text = collapse_whitespace(seg.text);
    if (seg.text.empty()) continue;
    seg.start_s = clamp_time(seg.start_s);
    seg.end_s = std::max(seg.start_s, clamp_time(seg.end_s));

    std::vector<WordToken> words;
    for (auto& w : seg.words) {
      w.text = collapse_whitespace(w.text);
      if (w.text.empty()) continue;
      words.push_back(std::move(w));
    }
    if (words.empty()) words = interpolate_words(seg.start_s, seg.end_s, seg.text);

    const double lo = std::max(0.0, seg.start_s - kWordWindow);
    const double hi = seg.end_s + kWordWindow;
    for (auto& w : words) {
      w.start_s = std::clamp(clamp_time(w.start_s), lo, hi);
      w.end_s = std::clamp(std::max(w.start_s, clamp_time(w.end_s)), w.start_s, hi);
      if (!(w.confidence >= 0.0)) w.confidence = 0.0;
      w.confidence = std::min(1.0, quantize(w.confidence));
    }
    std::stable_sort(words.begin(), words.end(),
                     [](const WordToken& a, const WordToken& b) { return a.start_s < b.start_s; });
    seg.words = std::move(words);
    kept.push_back(std::move(seg));
  }
  std::stable_sort(kept.begin(), kept.end(), [](const TranscriptSegment& a, const TranscriptSegment& b) {
    return a.start_s < b.start_s;
  });
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].id = static_cast<int>(i);
  segments = std::move(kept);
}

void validate_transcript(const std::vector<TranscriptSegment>& segments, double duration_s) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::EngineFailure, "invalid transcript: " + what); };
  const double limit = duration_s + kWordWindow;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& seg = segments[i];
    const std::string where = "segment " + std::to_string(i);
    if (!(seg.start_s >= 0.0) || seg.start_s > seg.end_s) fail(where + " has inverted bounds");
    if (duration_s > 0.0 && seg.end_s > limit) fail(where + " ends past the audio");
    if (i > 0 && seg.start_s < segments[i - 1].start_s) fail(where + " is out of order");
    if (seg.text.empty()) fail(where + " has empty text");
    for (std::size_t k = 0; k < seg.words.size(); ++k) {
      const auto& w = seg.words[k];
      if (!(w.start_s >= 0.0) || w.start_s > w.end_s) fail(where + " word with inverted bounds");
      if (w.start_s < seg.start_s - kWordWindow || w.end_s > seg.end_s + kWordWindow) {
        fail(where + " word outside the segment window");
      }
      if (k > 0 && w.start_s < seg.words[k - 1].start_s) fail(where + " words out of order");
      if (collapse_whitespace(w.text).empty()) fail(where + " has an empty word");
      if (!(w.confidence >= 0.0 && w.confidence <= 1.0)) fail(where + " confidence outside [0,1]");
    }
  }
}

void normalize_turns(std::vector<SpeakerTurn>& turns) {
  for (auto& t : turns) {
    t.start_s = std::max(0.0, quantize(t.start_s));
    t.end_s = quantize(t.end_s);
  }
  std::erase_if(turns, [](const SpeakerTurn& t) { return !(t.end_s > t.start_s); });
  std::stable_sort(turns.begin(), turns.end(), [](const SpeakerTurn& a, const SpeakerTurn& b) {
    if (a.start_s != b.start_s) return a.start_s < b.start_s;
    return a.end_s < b.end_s;
  });

  std::set<std::string> labels;
  for (const auto& t : turns) labels.insert(t.speaker);
  bool dense = true;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) {
    if (!labels.contains(speaker_label(i))) dense = false;
  }
  if (dense) return;

  std::map<std::string, std::string> remap;
  for (auto& t : turns) {
    auto [it, inserted] = remap.try_emplace(t.speaker, "");
    if (inserted) it->second = speaker_label(static_cast<int>(remap.size()) - 1);
    t.speaker = it->second;
  }
}

void validate_turns(const std::vector<SpeakerTurn>& turns, std::optional<int> num_speakers) {
  std::set<std::string> labels;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (!(turns[i].start_s < turns[i].end_s)) {
      throw Error(ErrorCode::EngineFailure, "invalid diarization: empty turn " + std::to_string(i));
    }
    if (i > 0 && turns[i].start_s < turns[i - 1].start_s) {
      throw Error(ErrorCode::EngineFailure, "invalid diarization: turns out of order");
    }
    labels.insert(turns[i].speaker);
  }
  if (num_speakers && static_cast<int>(labels.size()) > *num_speakers) {
    throw Error(ErrorCode::EngineFailure, "diarizer produced " + std::to_string(labels.size()) +
                                              " speakers but " + std::to_string(*num_speakers) +
                                              " were requested");
  }
}

}  // namespace atrain::engines
