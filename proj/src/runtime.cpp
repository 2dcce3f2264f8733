#include "atrain/runtime.hpp"

#include "atrain/error.hpp"
#include "atrain/version.hpp"

namespace atrain {

std::shared_ptr<engines::EngineFactory> make_engine_factory(const Settings& settings) {
  if (settings.engine == "mock") return engines::make_mock_factory(settings.mock);
  if (settings.engine == "whisper-cli") return engines::make_backend_factory(settings.backend);
  throw Error(ErrorCode::InvalidConfig, "unknown engine '" + settings.engine + "' (expected whisper-cli or mock)");
}

jobs::ManagerOptions Runtime::manager_options(const std::filesystem::path& data_dir) const {
  jobs::ManagerOptions o;
  o.data_dir = data_dir;
  o.registry = registry;
  o.engines = engines;
  o.converter.media_converter = settings.media_converter;
  o.device_override = settings.device;
  o.gap_tolerance_s = settings.gap_tolerance_s;
  o.tool_version = std::string(kVersion);
  return o;
}

std::unique_ptr<Runtime> open_runtime(Settings settings, engines::AcceleratorProbe accelerator) {
  auto rt = std::make_unique<Runtime>();
  rt->settings = std::move(settings);
  rt->registry = std::make_shared<models::ModelRegistry>(models::Manifest::load(rt->settings.manifest_path),
                                                         rt->settings.model_dir);
  rt->engines = make_engine_factory(rt->settings);
  auto options = rt->manager_options(rt->settings.data_dir);
  if (accelerator) options.accelerator = std::move(accelerator);
  rt->manager = std::make_unique<jobs::JobManager>(std::move(options));
  return rt;
}

}  // namespace atrain
