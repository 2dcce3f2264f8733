#include <fstream>
#include <sstream>

#include "atrain/engines.hpp"
#include "atrain/error.hpp"
#include "atrain/process.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace atrain::engines {
namespace {

std::string tail(const std::string& text, std::size_t max_chars = 600) {
  return text.size() <= max_chars ? text : "..." + text.substr(text.size() - max_chars);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::EngineFailure, "backend produced no output file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_special_token(std::string_view text) {
  return text.starts_with("[_") || text.starts_with("<|");
}

std::string replace_all(std::string s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
  return s;
}

class WhisperCliEngine final : public AsrEngine {
 public:
  WhisperCliEngine(fs::path binary, fs::path model, Device device, int threads)
      : binary_(std::move(binary)), model_(std::move(model)), device_(device), threads_(threads) {}

  std::vector<TranscriptSegment> transcribe(const media::CanonicalAudio& audio, const TranscribeOptions& options,
                                            const RunHooks& hooks) override {
    const fs::path prefix = hooks.scratch_dir / "whisper";
    std::vector<std::string> argv = {binary_.string(), "-m", model_.string(), "-f", audio.wav_path.string(),
                                     "-ojf", "-of", prefix.string(), "-np"};
    // Translation always targets English; the source language is detected.
    argv.insert(argv.end(), {"-l", options.translate ? std::string("auto") : options.language});
    if (options.translate) argv.push_back("-tr");
    if (threads_ > 0) argv.insert(argv.end(), {"-t", std::to_string(threads_)});
    if (device_ == Device::Cpu) argv.push_back("-ng");

    proc::RunOptions run_opts;
    run_opts.env = offline_environment();
    run_opts.should_cancel = hooks.cancelled;
    hooks.report(0.0, "inference");
    auto result = proc::run(argv, run_opts);
    if (result.cancelled) throw Error(ErrorCode::Cancelled, "transcription cancelled");
    if (result.exit_code != 0) {
      throw Error(ErrorCode::EngineFailure,
                  "whisper-cli exited with status " + std::to_string(result.exit_code) + ": " + tail(result.err));
    }
    hooks.report(100.0, "inference");
    return parse_whisper_cli_json(slurp(prefix.string() + ".json"));
  }

 private:
  fs::path binary_;
  fs::path model_;
  Device device_;
  int threads_;
};

class CommandDiarizer final : public Diarizer {
 public:
  CommandDiarizer(std::vector<std::string> command, Device device)
      : command_(std::move(command)), device_(device) {}

  std::vector<SpeakerTurn> diarize(const media::CanonicalAudio& audio, std::optional<int> num_speakers,
                                   const RunHooks& hooks) override {
    const fs::path rttm = hooks.scratch_dir / "diarization.rttm";
    std::error_code ec;
    fs::remove(rttm, ec);
    std::vector<std::string> argv;
    for (const auto& arg : command_) {
      std::string a = replace_all(arg, "{wav}", audio.wav_path.string());
      a = replace_all(a, "{rttm}", rttm.string());
      a = replace_all(a, "{num_speakers}", num_speakers ? std::to_string(*num_speakers) : "auto");
      a = replace_all(a, "{device}", std::string(to_string(device_)));
      argv.push_back(std::move(a));
    }
    proc::RunOptions run_opts;
    run_opts.env = offline_environment();
    run_opts.should_cancel = hooks.cancelled;
    auto result = proc::run(argv, run_opts);
    if (result.cancelled) throw Error(ErrorCode::Cancelled, "diarization cancelled");
    if (result.exit_code != 0) {
      throw Error(ErrorCode::EngineFailure,
                  "diarizer exited with status " + std::to_string(result.exit_code) + ": " + tail(result.err));
    }
    auto turns = parse_rttm(slurp(rttm));
    normalize_turns(turns);
    return turns;
  }

 private:
  std::vector<std::string> command_;
  Device device_;
};

class BackendEngineFactory final : public EngineFactory {
 public:
  explicit BackendEngineFactory(BackendOptions options) : options_(std::move(options)) {}

  std::string name() const override { return "whisper-cli"; }

  std::unique_ptr<AsrEngine> make_asr(const ModelSpec& model, Device device, const RunHooks& hooks) override {
    hooks.report(0.0, "model_load");
    auto binary = proc::find_executable(options_.whisper_cli);
    if (!binary) throw Error(ErrorCode::EngineFailure, "ASR backend not found: " + options_.whisper_cli);
    std::error_code ec;
    if (!model.installed || !model.local_path || !fs::is_regular_file(*model.local_path, ec)) {
      throw Error(ErrorCode::ModelNotInstalled, "model '" + model.model_id + "' is not installed");
    }
    hooks.report(100.0, "model_load");
    return std::make_unique<WhisperCliEngine>(*binary, *model.local_path, device, options_.threads);
  }

  std::unique_ptr<Diarizer> make_diarizer(Device device, const RunHooks&) override {
    if (options_.diarizer_command.empty()) {
      throw Error(ErrorCode::ModelNotInstalled, "no diarization backend configured (set diarizer_command)");
    }
    auto command = options_.diarizer_command;
    auto binary = proc::find_executable(command.front());
    if (!binary) throw Error(ErrorCode::EngineFailure, "diarization backend not found: " + command.front());
    command.front() = binary->string();
    return std::make_unique<CommandDiarizer>(std::move(command), device);
  }

  bool requires_installed_model() const override { return true; }
  bool diarization_available() const override { return !options_.diarizer_command.empty(); }

 private:
  BackendOptions options_;
};

}  // namespace

std::vector<std::pair<std::string, std::string>> offline_environment() {
  const std::string sink = "http://127.0.0.1:9";
  return {{"HF_HUB_OFFLINE", "1"},  {"TRANSFORMERS_OFFLINE", "1"}, {"HF_DATASETS_OFFLINE", "1"},
          {"http_proxy", sink},     {"https_proxy", sink},         {"HTTP_PROXY", sink},
          {"HTTPS_PROXY", sink},    {"ALL_PROXY", sink},           {"all_proxy", sink},
          {"no_proxy", ""},         {"NO_PROXY", ""}};
}

std::vector<TranscriptSegment> parse_whisper_cli_json(std::string_view json_text) {
  std::vector<TranscriptSegment> segments;
  try {
    const json doc = json::parse(json_text);
    for (const auto& item : doc.at("transcription")) {
      TranscriptSegment seg;
      seg.id = static_cast<int>(segments.size());
      seg.start_s = item.at("offsets").at("from").get<double>() / 1000.0;
      seg.end_s = item.at("offsets").at("to").get<double>() / 1000.0;
      seg.text = item.at("text").get<std::string>();

      std::optional<WordToken> current;
      double p_sum = 0.0;
      int p_count = 0;
      auto flush = [&] {
        if (current) {
          current->text.erase(0, current->text.find_first_not_of(' '));
          current->confidence = p_count > 0 ? p_sum / p_count : 0.0;
          seg.words.push_back(std::move(*current));
        }
        current.reset();
        p_sum = 0.0;
        p_count = 0;
      };
      for (const auto& tok : item.value("tokens", json::array())) {
        const auto text = tok.value("text", std::string());
        if (text.empty() || is_special_token(text)) continue;
        const double from = tok.at("offsets").at("from").get<double>() / 1000.0;
        const double to = tok.at("offsets").at("to").get<double>() / 1000.0;
        if (!current || text.front() == ' ') {
          flush();
          current = WordToken{from, to, text, 0.0};
        } else {
          current->text += text;
          current->end_s = to;
        }
        p_sum += tok.value("p", 0.0);
        ++p_count;
      }
      flush();
      segments.push_back(std::move(seg));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::EngineFailure, std::string("unreadable whisper-cli output: ") + e.what());
  }
  return segments;
}

std::vector<SpeakerTurn> parse_rttm(std::string_view text) {
  std::vector<SpeakerTurn> turns;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::vector<std::string> tok;
    for (std::string f; fields >> f;) tok.push_back(f);
    if (tok.empty() || tok[0].starts_with("#") || tok[0] != "SPEAKER") continue;
    if (tok.size() < 8) throw Error(ErrorCode::EngineFailure, "malformed RTTM line " + std::to_string(line_no));
    try {
      const double onset = std::stod(tok[3]);
      const double duration = std::stod(tok[4]);
      turns.push_back({onset, onset + duration, tok[7]});
    } catch (const std::exception&) {
      throw Error(ErrorCode::EngineFailure, "malformed RTTM times on line " + std::to_string(line_no));
    }
  }
  return turns;
}

std::unique_ptr<EngineFactory> make_backend_factory(BackendOptions options) {
  return std::make_unique<BackendEngineFactory>(std::move(options));
}

}  // namespace atrain::engines
