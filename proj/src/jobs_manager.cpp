#include <algorithm>
#include <cmath>

#include "atrain/align.hpp"
#include "atrain/error.hpp"
#include "atrain/jobs.hpp"

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace atrain::jobs {
namespace {

std::string now_utc() { return format_utc(std::chrono::system_clock::now()); }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string stage_key(JobState s) {
  switch (s) {
    case JobState::Converting: return "convert";
    case JobState::Transcribing: return "transcribe";
    case JobState::Diarizing: return "diarize";
    case JobState::Aligning: return "align";
    case JobState::Exporting: return "export";
    default: return std::string(to_string(s));
  }
}

}  // namespace

JobManager::JobManager(ManagerOptions options) : options_(std::move(options)), store_(options_.data_dir) {
  if (!options_.registry) throw Error(ErrorCode::InvalidArgument, "job manager needs a model registry");
  if (!options_.engines) throw Error(ErrorCode::InvalidArgument, "job manager needs an engine factory");
  recover();
}

JobManager::~JobManager() { stop_worker(); }

void JobManager::recover() {
  for (auto& record : store_.load_all()) {
    next_seq_[record.job_id] = store_.read_events(record.job_id).size();
    if (!is_terminal(record.state)) {
      const auto stage = std::string(to_string(record.state));
      record.error = JobError{stage, "Interrupted", "interrupted: the process ended while the job was " + stage};
      record.state = JobState::Failed;
      record.finished_at = now_utc();
      record.rpt.reset();
      store_.save(record);
      recovered_.push_back(record.job_id);
      records_[record.job_id] = record;
      emit(record, "state", std::nullopt, {}, record.error->message);
    } else {
      records_[record.job_id] = std::move(record);
    }
  }
}

std::vector<std::string> JobManager::recovered_jobs() const {
  std::lock_guard lock(mutex_);
  return recovered_;
}

void JobManager::update(JobRecord& record) {
  store_.save(record);
  std::lock_guard lock(mutex_);
  records_[record.job_id] = record;
}

void JobManager::emit(const JobRecord& record, std::string kind, std::optional<double> percent, std::string phase,
                      std::string message) {
  JobEvent event;
  event.job_id = record.job_id;
  event.time = now_utc();
  event.kind = std::move(kind);
  event.state = record.state;
  event.percent = percent;
  event.phase = std::move(phase);
  event.message = std::move(message);
  {
    std::lock_guard lock(mutex_);
    event.seq = next_seq_[record.job_id]++;
    if (event.kind != "deleted") store_.append_event(event);
  }
  std::lock_guard lock(listeners_mutex_);
  for (const auto& [token, listener] : listeners_) listener(event);
}

void JobManager::transition(JobRecord& record, JobState next) {
  const bool diarization = record.config.speakers.enabled();
  if (!is_legal_transition(record.state, next, diarization)) {
    throw Error(ErrorCode::Internal, "illegal job transition " + std::string(to_string(record.state)) + " -> " +
                                         std::string(to_string(next)));
  }
  record.state = next;
  update(record);
  emit(record, "state");
}

engines::Device JobManager::resolve_device(engines::DevicePreference pref) const {
  if (auto forced = engines::parse_device_preference(options_.device_override);
      forced && *forced != engines::DevicePreference::Auto) {
    pref = *forced;
  }
  return engines::detect_device(pref, options_.accelerator);
}

JobRecord JobManager::create_job(JobConfig config, CreateOptions create) {
  validate_config(config);
  std::error_code ec;
  if (!fs::is_regular_file(config.input_path, ec)) {
    throw Error(ErrorCode::FileNotFound, "input file not found: " + config.input_path.string());
  }
  const auto model = options_.registry->spec(config.model_id);
  if (options_.engines->requires_installed_model() && !model.installed) {
    throw Error(ErrorCode::ModelNotInstalled, "model '" + config.model_id +
                                                  "' is not installed; download it with: atrain models prefetch " +
                                                  config.model_id);
  }
  if (config.speakers.enabled() && !options_.engines->diarization_available()) {
    throw Error(ErrorCode::ModelNotInstalled,
                "speaker detection requested but no diarization backend is configured (diarizer_command); use "
                "--speakers off or configure one");
  }
  const auto device = resolve_device(config.device);

  const auto created = std::chrono::system_clock::now();
  JobRecord record;
  record.job_id = store_.allocate(created, config.input_path);
  record.directory = store_.job_dir(record.job_id);
  if (create.move_input) {
    const fs::path dest_dir = record.directory / "input";
    fs::create_directories(dest_dir);
    const fs::path dest = dest_dir / config.input_path.filename();
    fs::rename(config.input_path, dest, ec);
    if (ec) {
      fs::copy_file(config.input_path, dest, fs::copy_options::overwrite_existing);
      fs::remove(config.input_path, ec);
    }
    config.input_path = dest;
  }
  record.config = std::move(config);
  record.state = JobState::Created;
  record.created_at = format_utc(created);
  record.engine = options_.engines->name();
  record.device = std::string(engines::to_string(device));
  update(record);
  emit(record, "state");
  if (create.enqueue) {
    std::lock_guard lock(mutex_);
    queue_.push_back(record.job_id);
    changed_.notify_all();
  }
  return record;
}

JobRecord JobManager::run_pipeline(const std::string& job_id) {
  JobRecord record;
  auto cancel = std::make_shared<std::atomic<bool>>(false);
  {
    std::unique_lock lock(mutex_);
    changed_.wait(lock, [&] { return !running_.has_value(); });
    auto it = records_.find(job_id);
    if (it == records_.end()) throw Error(ErrorCode::JobNotFound, "no such job: " + job_id);
    if (it->second.state != JobState::Created) {
      throw Error(ErrorCode::InvalidArgument, "job " + job_id + " is " + std::string(to_string(it->second.state)) +
                                                  ", only CREATED jobs can run");
    }
    record = it->second;
    running_ = Running{job_id, cancel};
    std::erase(queue_, job_id);
  }

  struct ClearRunning {
    JobManager& self;
    ~ClearRunning() {
      std::lock_guard lock(self.mutex_);
      self.running_.reset();
      self.changed_.notify_all();
    }
  } clear_running{*this};

  net::OfflineGuard guard;
  const auto started_wall = std::chrono::system_clock::now();
  const auto t0 = Clock::now();
  record.started_at = format_utc(started_wall);

  double last_percent = -1.0;
  std::string last_phase;
  engines::RunHooks hooks;
  hooks.scratch_dir = record.directory;
  hooks.cancelled = [cancel] { return cancel->load(); };
  hooks.progress = [&](double percent, std::string_view phase) {
    if (phase == last_phase && std::abs(percent - last_percent) < 1.0 && percent < 100.0) return;
    last_percent = percent;
    last_phase = std::string(phase);
    emit(record, "progress", percent, std::string(phase));
  };

  const auto& cfg = record.config;
  const bool diarize = cfg.speakers.enabled();
  media::ConverterConfig converter = options_.converter;
  converter.should_cancel = hooks.cancelled;

  media::CanonicalAudio audio;
  std::vector<engines::TranscriptSegment> segments;
  std::vector<engines::SpeakerTurn> turns;
  align::AlignedTranscript transcript;

  auto run_stage = [&](JobState stage, auto&& body) {
    transition(record, stage);
    const auto s0 = Clock::now();
    const auto attempts_before = guard.attempt_count();
    hooks.check_cancelled();
    body();
    guard.raise_if_attempted_since(attempts_before, to_string(stage));
    hooks.check_cancelled();
    record.stage_times_s[stage_key(stage)] = seconds_since(s0);
  };

  try {
    const auto device = resolve_device(cfg.device);
    record.device = std::string(engines::to_string(device));

    run_stage(JobState::Converting, [&] {
      const auto info = media::probe_media(cfg.input_path, converter);
      audio = media::convert_to_canonical(info, record.directory, converter);
      record.duration_s = audio.duration_s;
      if (!(audio.duration_s > 0.0)) throw Error(ErrorCode::ZeroDuration, "the recording has no audio samples");
    });

    run_stage(JobState::Transcribing, [&] {
      const auto model = options_.registry->spec(cfg.model_id);
      auto asr = options_.engines->make_asr(model, device, hooks);
      segments = asr->transcribe(audio, engines::TranscribeOptions{cfg.language, cfg.translate}, hooks);
      engines::normalize_transcript(segments, audio.duration_s);
      engines::validate_transcript(segments, audio.duration_s);
    });

    if (diarize) {
      run_stage(JobState::Diarizing, [&] {
        auto diarizer = options_.engines->make_diarizer(device, hooks);
        turns = diarizer->diarize(audio, cfg.speakers.fixed_count(), hooks);
        engines::normalize_turns(turns);
        engines::validate_turns(turns, cfg.speakers.fixed_count());
      });
    }

    run_stage(JobState::Aligning, [&] {
      transcript = diarize ? align::align_transcript(segments, turns, cfg.speakers.fixed_count(), cfg.gap_tolerance_s)
                           : align::without_speakers(segments);
    });

    run_stage(JobState::Exporting, [&] {
      // The run ends when the exports are rendered; only writing the raw
      // JSON (which carries the timing) falls after the clock stops.
      const auto elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0);
      record.finished_at = format_utc(started_wall + elapsed_ms);
      record.processing_time_s = static_cast<double>(elapsed_ms.count()) / 1000.0;
      record.rpt = compute_rpt(*record.processing_time_s, audio.duration_s);

      exporters::JobMetadata meta;
      meta.source_file = cfg.input_path.filename().string();
      meta.duration_s = audio.duration_s;
      meta.model = cfg.model_id;
      meta.language = cfg.language;
      meta.num_speakers = cfg.speakers.to_string();
      meta.diarization_enabled = diarize;
      meta.translate = cfg.translate;
      meta.started_at = record.started_at;
      meta.finished_at = record.finished_at;
      meta.processing_time_s = record.processing_time_s;
      meta.rpt = record.rpt;
      meta.tool_version = options_.tool_version;
      exporters::write_exports(transcript, meta, record.directory);
    });

    record.network_attempts = guard.report().attempts;
    transition(record, JobState::Completed);
  } catch (const std::exception& e) {
    const auto* err = dynamic_cast<const Error*>(&e);
    record.error = JobError{std::string(to_string(record.state)),
                            std::string(err != nullptr ? to_string(err->code()) : "Internal"), e.what()};
    const auto elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0);
    record.finished_at = format_utc(started_wall + elapsed_ms);
    record.processing_time_s = static_cast<double>(elapsed_ms.count()) / 1000.0;
    record.rpt.reset();
    record.network_attempts = guard.report().attempts;
    record.state = JobState::Failed;
    update(record);
    emit(record, "state", std::nullopt, {}, record.error->code + " during " + record.error->stage + ": " + e.what());
  }
  return record;
}

std::vector<JobRecord> JobManager::list_jobs() const {
  std::vector<JobRecord> out;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, r] : records_) out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const JobRecord& a, const JobRecord& b) {
    if (a.created_at != b.created_at) return a.created_at > b.created_at;
    return a.job_id > b.job_id;
  });
  return out;
}

JobRecord JobManager::get_job(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(job_id);
  if (it == records_.end()) throw Error(ErrorCode::JobNotFound, "no such job: " + job_id);
  return it->second;
}

void JobManager::delete_job(const std::string& job_id) {
  JobRecord last;
  {
    std::unique_lock lock(mutex_);
    auto it = records_.find(job_id);
    if (it == records_.end()) throw Error(ErrorCode::JobNotFound, "no such job: " + job_id);
    if (running_ && running_->job_id == job_id) {
      running_->cancel->store(true);
      changed_.wait(lock, [&] { return !running_ || running_->job_id != job_id; });
    }
    std::erase(queue_, job_id);
    last = records_[job_id];
    records_.erase(job_id);
  }
  store_.remove(job_id);
  emit(last, "deleted");
  std::lock_guard lock(mutex_);
  next_seq_.erase(job_id);
}

std::vector<JobEvent> JobManager::events(const std::string& job_id) const {
  {
    std::lock_guard lock(mutex_);
    if (!records_.contains(job_id)) throw Error(ErrorCode::JobNotFound, "no such job: " + job_id);
  }
  return store_.read_events(job_id);
}

std::uint64_t JobManager::subscribe(Listener listener) {
  std::lock_guard lock(listeners_mutex_);
  const auto token = next_listener_++;
  listeners_[token] = std::move(listener);
  return token;
}

void JobManager::unsubscribe(std::uint64_t token) {
  std::lock_guard lock(listeners_mutex_);
  listeners_.erase(token);
}

void JobManager::start_worker() {
  std::lock_guard lock(mutex_);
  if (worker_.joinable()) return;
  stopping_ = false;
  worker_ = std::thread([this] { worker_loop(); });
}

void JobManager::stop_worker() {
  {
    std::lock_guard lock(mutex_);
    if (!worker_.joinable()) return;
    stopping_ = true;
    if (running_) running_->cancel->store(true);
    changed_.notify_all();
  }
  worker_.join();
  std::lock_guard lock(mutex_);
  worker_ = std::thread();
}

void JobManager::wait_idle() {
  std::unique_lock lock(mutex_);
  changed_.wait(lock, [&] { return queue_.empty() && !running_; });
}

void JobManager::worker_loop() {
  for (;;) {
    std::string job_id;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job_id = queue_.front();
      // run_pipeline removes the id; an entry it cannot run is dropped here.
    }
    try {
      run_pipeline(job_id);
    } catch (const Error&) {
      std::lock_guard lock(mutex_);
      std::erase(queue_, job_id);
      changed_.notify_all();
    }
  }
}

}  // namespace atrain::jobs
