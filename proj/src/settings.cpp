#include "atrain/settings.hpp"

#include <cstdlib>
#include <sstream>

#include "atrain/error.hpp"
#include "atrain/fsutil.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace atrain {
namespace {

std::string env(const char* name) {
  const char* v = std::getenv(name);
  return v != nullptr ? std::string(v) : std::string();
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

void apply_config(Settings& s, const json& cfg) {
  if (!cfg.is_object()) throw Error(ErrorCode::InvalidConfig, "configuration must be a JSON object");
  try {
    if (cfg.contains("model_dir")) s.model_dir = cfg["model_dir"].get<std::string>();
    if (cfg.contains("manifest")) s.manifest_path = cfg["manifest"].get<std::string>();
    if (cfg.contains("media_converter")) s.media_converter = cfg["media_converter"].get<std::string>();
    if (cfg.contains("engine")) s.engine = cfg["engine"].get<std::string>();
    if (cfg.contains("whisper_cli")) s.backend.whisper_cli = cfg["whisper_cli"].get<std::string>();
    if (cfg.contains("threads")) s.backend.threads = cfg["threads"].get<int>();
    if (cfg.contains("diarizer_command")) {
      const auto& c = cfg["diarizer_command"];
      s.backend.diarizer_command = c.is_string() ? split_words(c.get<std::string>()) : c.get<std::vector<std::string>>();
    }
    if (cfg.contains("gap_tolerance_s")) s.gap_tolerance_s = cfg["gap_tolerance_s"].get<double>();
    if (cfg.contains("device")) s.device = cfg["device"].get<std::string>();
    if (cfg.contains("mock")) {
      const auto& m = cfg["mock"];
      s.mock.delay_factor = m.value("delay_factor", s.mock.delay_factor);
      s.mock.fail_at = m.value("fail_at", s.mock.fail_at);
      s.mock.network_probe = m.value("network_probe", s.mock.network_probe);
      s.mock.requires_installed_model = m.value("requires_installed_model", s.mock.requires_installed_model);
      if (m.contains("sidecar_dir")) s.mock.sidecar_dir = m["sidecar_dir"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad configuration value: ") + e.what());
  }
  if (s.engine != "whisper-cli" && s.engine != "mock") {
    throw Error(ErrorCode::InvalidConfig, "engine must be 'whisper-cli' or 'mock', got '" + s.engine + "'");
  }
  if (!engines::parse_device_preference(s.device)) {
    throw Error(ErrorCode::InvalidConfig, "device must be auto, cpu or gpu");
  }
  if (!(s.gap_tolerance_s >= 0.0)) throw Error(ErrorCode::InvalidConfig, "gap_tolerance_s must be >= 0");
}

json parse_object(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "malformed " + what + ": " + e.what());
  }
}

}  // namespace

fs::path default_data_dir() {
  if (auto home = env("ATRAIN_HOME"); !home.empty()) return home;
  if (auto xdg = env("XDG_DATA_HOME"); !xdg.empty()) return fs::path(xdg) / "atrain";
  if (auto home = env("HOME"); !home.empty()) return fs::path(home) / ".local" / "share" / "atrain";
  return fs::temp_directory_path() / "atrain";
}

Settings load_settings(std::string_view overrides_json) {
  json overrides = json::object();
  if (!overrides_json.empty()) overrides = parse_object(overrides_json, "settings overrides");
  if (!overrides.is_object()) throw Error(ErrorCode::InvalidConfig, "settings overrides must be a JSON object");

  Settings s;
  s.data_dir = overrides.contains("data_dir") ? fs::path(overrides["data_dir"].get<std::string>()) : default_data_dir();
  s.model_dir = s.data_dir / "models";
  s.manifest_path = ATRAIN_DEFAULT_MANIFEST;

  const fs::path config_file = s.data_dir / "config.json";
  std::error_code ec;
  if (fs::is_regular_file(config_file, ec)) {
    apply_config(s, parse_object(fsutil::read_file(config_file), config_file.string()));
  }
  if (auto v = env("ATRAIN_MEDIA_CONVERTER"); !v.empty()) s.media_converter = v;
  if (auto v = env("ATRAIN_MODEL_DIR"); !v.empty()) s.model_dir = v;
  apply_config(s, overrides);
  return s;
}

}  // namespace atrain
