#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <fstream>
#include <thread>

#include "atrain/engines.hpp"
#include "atrain/error.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace atrain::engines {
namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::EngineFailure, "cannot read sidecar " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::EngineFailure, "malformed sidecar " + path.string() + ": " + e.what());
  }
}

// Opens (and immediately closes) a TCP connection, the way a backend that
// fetches weights on first use would. The outcome is deliberately ignored.
void touch_network(const std::string& endpoint) {
  auto colon = endpoint.rfind(':');
  if (colon == std::string::npos) return;
  const std::string host = endpoint.substr(0, colon);
  const std::string port = endpoint.substr(colon + 1);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) return;
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd >= 0) {
    (void)::connect(fd, res->ai_addr, res->ai_addrlen);
    ::close(fd);
  }
  ::freeaddrinfo(res);
}

class MockAsrEngine final : public AsrEngine {
 public:
  explicit MockAsrEngine(MockOptions options) : options_(std::move(options)) {}

  std::vector<TranscriptSegment> transcribe(const media::CanonicalAudio& audio, const TranscribeOptions&,
                                            const RunHooks& hooks) override {
    if (!options_.network_probe.empty()) touch_network(options_.network_probe);
    if (options_.fail_at == "transcribe") {
      throw Error(ErrorCode::EngineFailure, "mock ASR engine: injected failure");
    }

    const auto total = std::chrono::duration<double>(options_.delay_factor * audio.duration_s);
    const auto begin = std::chrono::steady_clock::now();
    const auto deadline = begin + std::chrono::duration_cast<std::chrono::steady_clock::duration>(total);
    while (std::chrono::steady_clock::now() < deadline) {
      hooks.check_cancelled();
      const auto left = deadline - std::chrono::steady_clock::now();
      std::this_thread::sleep_for(std::min<std::chrono::steady_clock::duration>(left, std::chrono::milliseconds(20)));
      const double done = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin) / total;
      hooks.report(std::min(100.0, 100.0 * done), "inference");
    }
    hooks.check_cancelled();

    auto sidecar = find_sidecar(audio, kTranscriptSidecar, options_.sidecar_dir);
    if (!sidecar) return {};
    return read_transcript_sidecar(*sidecar);
  }

 private:
  MockOptions options_;
};

class MockDiarizer final : public Diarizer {
 public:
  explicit MockDiarizer(MockOptions options) : options_(std::move(options)) {}

  std::vector<SpeakerTurn> diarize(const media::CanonicalAudio& audio, std::optional<int>,
                                   const RunHooks& hooks) override {
    hooks.check_cancelled();
    if (options_.fail_at == "diarize") {
      throw Error(ErrorCode::EngineFailure, "mock diarizer: injected failure");
    }
    auto sidecar = find_sidecar(audio, kTurnsSidecar, options_.sidecar_dir);
    if (!sidecar) return {};
    return read_turns_sidecar(*sidecar);
  }

 private:
  MockOptions options_;
};

class MockEngineFactory final : public EngineFactory {
 public:
  explicit MockEngineFactory(MockOptions options) : options_(std::move(options)) {}

  std::string name() const override { return "mock"; }

  std::unique_ptr<AsrEngine> make_asr(const ModelSpec&, Device, const RunHooks& hooks) override {
    hooks.report(0.0, "model_load");
    if (options_.fail_at == "load") throw Error(ErrorCode::EngineFailure, "mock ASR engine: injected load failure");
    hooks.report(100.0, "model_load");
    return std::make_unique<MockAsrEngine>(options_);
  }

  std::unique_ptr<Diarizer> make_diarizer(Device, const RunHooks&) override {
    return std::make_unique<MockDiarizer>(options_);
  }

  bool requires_installed_model() const override { return options_.requires_installed_model; }
  bool diarization_available() const override { return true; }

 private:
  MockOptions options_;
};

}  // namespace

std::optional<fs::path> find_sidecar(const media::CanonicalAudio& audio, std::string_view suffix,
                                     const fs::path& extra_dir) {
  std::vector<fs::path> candidates;
  for (const auto& base : {audio.source_path, audio.wav_path}) {
    if (!base.empty()) candidates.push_back(base.parent_path() / (base.stem().string() + std::string(suffix)));
  }
  if (!extra_dir.empty() && !audio.source_path.empty()) {
    candidates.push_back(extra_dir / (audio.source_path.stem().string() + std::string(suffix)));
  }
  for (const auto& candidate : candidates) {
    std::error_code ec;
    if (fs::is_regular_file(candidate, ec)) return candidate;
  }
  return std::nullopt;
}

std::vector<TranscriptSegment> read_transcript_sidecar(const fs::path& path) {
  const json doc = read_json_file(path);
  std::vector<TranscriptSegment> segments;
  try {
    for (const auto& s : doc.at("segments")) {
      TranscriptSegment seg;
      seg.id = s.value("id", static_cast<int>(segments.size()));
      seg.start_s = s.at("start").get<double>();
      seg.end_s = s.at("end").get<double>();
      seg.text = s.at("text").get<std::string>();
      for (const auto& w : s.value("words", json::array())) {
        seg.words.push_back({w.at("start").get<double>(), w.at("end").get<double>(),
                             w.at("text").get<std::string>(), w.value("confidence", 1.0)});
      }
      segments.push_back(std::move(seg));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::EngineFailure, "malformed transcript sidecar " + path.string() + ": " + e.what());
  }
  return segments;
}

std::vector<SpeakerTurn> read_turns_sidecar(const fs::path& path) {
  const json doc = read_json_file(path);
  std::vector<SpeakerTurn> turns;
  try {
    for (const auto& t : doc.at("turns")) {
      turns.push_back({t.at("start").get<double>(), t.at("end").get<double>(), t.at("speaker").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::EngineFailure, "malformed turns sidecar " + path.string() + ": " + e.what());
  }
  return turns;
}

std::unique_ptr<EngineFactory> make_mock_factory(MockOptions options) {
  return std::make_unique<MockEngineFactory>(std::move(options));
}

}  // namespace atrain::engines
