#pragma once

#include <filesystem>
#include <memory>

#include "atrain/engines.hpp"
#include "atrain/jobs.hpp"
#include "atrain/models.hpp"
#include "atrain/settings.hpp"

namespace atrain {

// Everything a front end needs, wired from Settings.
struct Runtime {
  Settings settings;
  std::shared_ptr<models::ModelRegistry> registry;
  std::shared_ptr<engines::EngineFactory> engines;
  std::unique_ptr<jobs::JobManager> manager;

  jobs::ManagerOptions manager_options(const std::filesystem::path& data_dir) const;
};

std::shared_ptr<engines::EngineFactory> make_engine_factory(const Settings& settings);

// Loads the manifest, builds the engine factory and opens the job store
// (which recovers interrupted jobs).
std::unique_ptr<Runtime> open_runtime(Settings settings,
                                      engines::AcceleratorProbe accelerator = engines::default_accelerator_probe);

}  // namespace atrain
