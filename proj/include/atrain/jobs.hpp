#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "atrain/engines.hpp"
#include "atrain/export.hpp"
#include "atrain/media.hpp"
#include "atrain/models.hpp"
#include "atrain/net.hpp"
#include "json.hpp"

namespace atrain::jobs {

using ojson = nlohmann::ordered_json;

enum class JobState { Created, Converting, Transcribing, Diarizing, Aligning, Exporting, Completed, Failed };

std::string_view to_string(JobState state) noexcept;
std::optional<JobState> parse_job_state(std::string_view text) noexcept;
bool is_terminal(JobState state) noexcept;

// Forward along CREATED -> CONVERTING -> TRANSCRIBING -> DIARIZING ->
// ALIGNING -> EXPORTING -> COMPLETED (DIARIZING only with diarization), or
// to FAILED from any non-terminal state.
bool is_legal_transition(JobState from, JobState to, bool diarization_enabled) noexcept;
// True when `states` (starting at CREATED) is a prefix of a legal run.
bool is_legal_sequence(std::span<const JobState> states, bool diarization_enabled) noexcept;

// processing_time_s / duration_s. Throws ZeroDuration for duration <= 0 and
// InvalidArgument for negative processing time.
double compute_rpt(double processing_time_s, double duration_s);

class SpeakerSetting {
 public:
  enum class Mode { Off, Auto, Count };

  static SpeakerSetting off() { return SpeakerSetting(Mode::Off, 0); }
  static SpeakerSetting automatic() { return SpeakerSetting(Mode::Auto, 0); }
  static SpeakerSetting count(int n);
  // "off" | "auto" | positive integer. Throws InvalidConfig.
  static SpeakerSetting parse(std::string_view text);

  Mode mode() const noexcept { return mode_; }
  bool enabled() const noexcept { return mode_ != Mode::Off; }
  std::optional<int> fixed_count() const noexcept {
    return mode_ == Mode::Count ? std::optional<int>(count_) : std::nullopt;
  }
  std::string to_string() const;

  bool operator==(const SpeakerSetting&) const = default;

 private:
  SpeakerSetting(Mode mode, int count) : mode_(mode), count_(count) {}
  Mode mode_ = Mode::Auto;
  int count_ = 0;
};

struct JobConfig {
  std::filesystem::path input_path;
  std::string model_id = "medium";
  // "auto" or a supported ISO code.
  std::string language = "auto";
  SpeakerSetting speakers = SpeakerSetting::automatic();
  engines::DevicePreference device = engines::DevicePreference::Auto;
  bool translate = false;
  double gap_tolerance_s = 2.0;

  bool operator==(const JobConfig&) const = default;
};

// Throws UnsupportedLanguage or InvalidConfig. Translation is only into
// English, so translate requires language "en" or "auto".
void validate_config(const JobConfig& config);

struct JobError {
  std::string stage;
  // An ErrorCode name, or "Interrupted" for runs cut off by a crash.
  std::string code;
  std::string message;

  bool operator==(const JobError&) const = default;
};

struct JobRecord {
  std::string job_id;
  JobState state = JobState::Created;
  JobConfig config;
  std::string created_at;
  std::optional<std::string> started_at;
  std::optional<std::string> finished_at;
  std::optional<double> duration_s;
  std::optional<double> processing_time_s;
  std::optional<double> rpt;
  // Keys: convert, transcribe, diarize, align, export.
  std::map<std::string, double> stage_times_s;
  std::optional<JobError> error;
  std::filesystem::path directory;
  std::string engine;
  std::string device;
  std::vector<net::NetworkAttempt> network_attempts;

  bool operator==(const JobRecord&) const = default;
};

struct JobEvent {
  std::uint64_t seq = 0;
  std::string job_id;
  std::string time;
  // "state", "progress" or "deleted".
  std::string kind;
  JobState state = JobState::Created;
  std::optional<double> percent;
  std::string phase;
  std::string message;
};

ojson to_json(const JobConfig& config);
JobConfig config_from_json(const nlohmann::json& j, JobConfig base = {});
ojson to_json(const JobRecord& record);
JobRecord record_from_json(const ojson& j);
ojson to_json(const JobEvent& event);
JobEvent event_from_json(const ojson& j);

// "YYYY-MM-DDTHH:MM:SS.mmmZ"
std::string format_utc(std::chrono::system_clock::time_point tp);
std::optional<std::chrono::system_clock::time_point> parse_utc(std::string_view text);

// One directory per job: <data_dir>/<job_id>/ holding the canonical WAV,
// the four exports, metadata.json (the record) and events.log (JSON lines).
class JobStore {
 public:
  explicit JobStore(std::filesystem::path data_dir);

  const std::filesystem::path& data_dir() const noexcept { return data_dir_; }
  std::filesystem::path job_dir(std::string_view job_id) const;

  // Reserves a fresh id "<UTC compact timestamp>-<slug>" and creates its dir.
  std::string allocate(std::chrono::system_clock::time_point created, const std::filesystem::path& input);

  void save(const JobRecord& record) const;
  std::optional<JobRecord> load(std::string_view job_id) const;
  std::vector<JobRecord> load_all() const;
  void append_event(const JobEvent& event) const;
  std::vector<JobEvent> read_events(std::string_view job_id) const;
  void remove(std::string_view job_id) const;

 private:
  std::filesystem::path data_dir_;
};

struct ManagerOptions {
  std::filesystem::path data_dir;
  std::shared_ptr<models::ModelRegistry> registry;
  std::shared_ptr<engines::EngineFactory> engines;
  engines::AcceleratorProbe accelerator = engines::default_accelerator_probe;
  media::ConverterConfig converter;
  // Forced device ("cpu"/"gpu"); "auto" keeps the job's own choice.
  std::string device_override = "auto";
  // Default for configs that do not set one.
  double gap_tolerance_s = 2.0;
  std::string tool_version;
};

// Owns every job under data_dir. One background worker runs queued jobs in
// FIFO order; run_pipeline can also be driven synchronously. Reads are safe
// from any thread.
class JobManager {
 public:
  using Listener = std::function<void(const JobEvent&)>;

  struct CreateOptions {
    // Move the input into the job directory (uploads).
    bool move_input = false;
    // Queue for the background worker.
    bool enqueue = true;
  };

  // Jobs left non-terminal by a previous process are marked FAILED with
  // code "Interrupted".
  explicit JobManager(ManagerOptions options);
  ~JobManager();
  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  JobRecord create_job(JobConfig config, CreateOptions options);
  JobRecord create_job(JobConfig config) { return create_job(std::move(config), CreateOptions{}); }

  // Runs a CREATED job to COMPLETED or FAILED on the calling thread.
  JobRecord run_pipeline(const std::string& job_id);

  // Newest first.
  std::vector<JobRecord> list_jobs() const;
  JobRecord get_job(const std::string& job_id) const;
  // Cancels the job first if it is running; removes record and directory.
  void delete_job(const std::string& job_id);
  std::vector<JobEvent> events(const std::string& job_id) const;

  std::uint64_t subscribe(Listener listener);
  void unsubscribe(std::uint64_t token);

  void start_worker();
  void stop_worker();
  // Blocks until the queue is drained and nothing runs.
  void wait_idle();

  std::vector<std::string> recovered_jobs() const;
  const ManagerOptions& options() const noexcept { return options_; }
  models::ModelRegistry& registry() const { return *options_.registry; }

 private:
  struct Running {
    std::string job_id;
    std::shared_ptr<std::atomic<bool>> cancel;
  };

  void recover();
  void update(JobRecord& record);
  void emit(const JobRecord& record, std::string kind, std::optional<double> percent = std::nullopt,
            std::string phase = {}, std::string message = {});
  void transition(JobRecord& record, JobState next);
  engines::Device resolve_device(engines::DevicePreference pref) const;
  void worker_loop();

  ManagerOptions options_;
  JobStore store_;

  mutable std::mutex mutex_;
  std::condition_variable changed_;
  std::map<std::string, JobRecord> records_;
  std::map<std::string, std::uint64_t> next_seq_;
  std::deque<std::string> queue_;
  std::optional<Running> running_;
  std::vector<std::string> recovered_;

  mutable std::mutex listeners_mutex_;
  std::map<std::uint64_t, Listener> listeners_;
  std::uint64_t next_listener_ = 1;

  std::thread worker_;
  bool stopping_ = false;
};

}  // namespace atrain::jobs
