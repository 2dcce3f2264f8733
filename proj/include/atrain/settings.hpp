#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "atrain/engines.hpp"

namespace atrain {

// Process-wide configuration. Sources, later ones winning:
//   built-in defaults
//   <data_dir>/config.json
//   ATRAIN_MEDIA_CONVERTER, ATRAIN_MODEL_DIR
//   explicit overrides (JSON object with the same keys)
// data_dir itself comes from overrides["data_dir"], else ATRAIN_HOME, else
// $XDG_DATA_HOME/atrain, else ~/.local/share/atrain.
struct Settings {
  std::filesystem::path data_dir;
  std::filesystem::path model_dir;
  std::filesystem::path manifest_path;
  std::string media_converter;
  // "whisper-cli" or "mock".
  std::string engine = "whisper-cli";
  engines::BackendOptions backend;
  engines::MockOptions mock;
  double gap_tolerance_s = 2.0;
  // "auto" leaves the per-job device choice alone; "cpu"/"gpu" force it.
  std::string device = "auto";
};

// Throws InvalidConfig for malformed config files or override JSON.
Settings load_settings(std::string_view overrides_json = {});

std::filesystem::path default_data_dir();

}  // namespace atrain
