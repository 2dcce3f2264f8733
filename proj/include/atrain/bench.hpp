#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atrain/engines.hpp"
#include "atrain/jobs.hpp"

namespace atrain::bench {

// Stage columns, in pipeline order.
inline constexpr std::string_view kStages[] = {"convert", "transcribe", "diarize", "align", "export"};

struct BenchResult {
  std::string machine_label;
  std::string device;
  std::string model_id;
  std::string file;
  double duration_s = 0.0;
  double total_s = 0.0;
  // Absent for failed cells.
  std::optional<double> rpt;
  std::map<std::string, double> stage_times_s;
  // Empty for successful cells.
  std::string error;

  friend bool operator==(const BenchResult&, const BenchResult&) = default;
};

struct BenchOptions {
  std::vector<std::filesystem::path> corpus;
  std::vector<std::string> models;
  engines::DevicePreference device = engines::DevicePreference::Cpu;
  int repetitions = 1;
  std::string machine_label;
  // Rows are appended here as each cell finishes. Empty: no CSV.
  std::filesystem::path csv_out;
};

using BenchProgress = std::function<void(const BenchResult& row, std::size_t done, std::size_t total)>;

// Audio/video files directly inside `dir`, sorted by name. Sidecar JSON files
// and dotfiles are skipped.
std::vector<std::filesystem::path> collect_corpus(const std::filesystem::path& dir);

std::string default_machine_label();

// Runs repetitions x corpus x models cells serially through a job manager
// built from `manager` (its data_dir holds the benchmark jobs). Diarization
// is on for every cell. A failing cell is recorded and the matrix continues.
std::vector<BenchResult> run_benchmark(const BenchOptions& options, jobs::ManagerOptions manager,
                                       const BenchProgress& progress = {});

std::string csv_header();
std::string csv_row(const BenchResult& row);
std::vector<BenchResult> parse_csv(std::string_view text);

struct Report {
  std::string csv;
  std::string markdown;
  // {"series": [{"machine_label", "device", "points": [[tier ordinal, rpt], ...]}]}
  std::string plot_json;
  std::vector<std::string> flags;
};

// Throws EmptyResults when there is nothing to report.
Report emit_report(const std::vector<BenchResult>& results);

}  // namespace atrain::bench
