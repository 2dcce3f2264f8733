// Job value types: state machine rules, config validation, JSON codecs and
// the on-disk job store.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>

#include "atrain/error.hpp"
#include "atrain/fsutil.hpp"
#include "atrain/jobs.hpp"

namespace fs = std::filesystem;

namespace atrain::jobs {
namespace {

constexpr JobState kOrder[] = {JobState::Created,  JobState::Converting, JobState::Transcribing, JobState::Diarizing,
                               JobState::Aligning, JobState::Exporting,  JobState::Completed};

std::optional<JobState> successor(JobState s, bool diarization_enabled) {
  auto it = std::find(std::begin(kOrder), std::end(kOrder), s);
  if (it == std::end(kOrder) || std::next(it) == std::end(kOrder)) return std::nullopt;
  ++it;
  if (*it == JobState::Diarizing && !diarization_enabled) ++it;
  return *it;
}

template <typename T>
ojson optional_json(const std::optional<T>& v) {
  return v ? ojson(*v) : ojson(nullptr);
}

template <typename T>
std::optional<T> optional_from(const ojson& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace

std::string_view to_string(JobState state) noexcept {
  switch (state) {
    case JobState::Created: return "CREATED";
    case JobState::Converting: return "CONVERTING";
    case JobState::Transcribing: return "TRANSCRIBING";
    case JobState::Diarizing: return "DIARIZING";
    case JobState::Aligning: return "ALIGNING";
    case JobState::Exporting: return "EXPORTING";
    case JobState::Completed: return "COMPLETED";
    case JobState::Failed: return "FAILED";
  }
  return "FAILED";
}

std::optional<JobState> parse_job_state(std::string_view text) noexcept {
  for (auto s : kOrder) {
    if (to_string(s) == text) return s;
  }
  if (text == "FAILED") return JobState::Failed;
  return std::nullopt;
}

bool is_terminal(JobState state) noexcept { return state == JobState::Completed || state == JobState::Failed; }

bool is_legal_transition(JobState from, JobState to, bool diarization_enabled) noexcept {
  if (is_terminal(from)) return false;
  // DIARIZING is not a state a run without diarization can be in.
  if (from == JobState::Diarizing && !diarization_enabled) return false;
  if (to == JobState::Failed) return true;
  return successor(from, diarization_enabled) == to;
}

bool is_legal_sequence(std::span<const JobState> states, bool diarization_enabled) noexcept {
  if (states.empty()) return true;
  if (states.front() != JobState::Created) return false;
  for (std::size_t i = 1; i < states.size(); ++i) {
    if (!is_legal_transition(states[i - 1], states[i], diarization_enabled)) return false;
  }
  return true;
}

double compute_rpt(double processing_time_s, double duration_s) {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) {
    throw Error(ErrorCode::ZeroDuration, "recording duration must be positive to compute RPT");
  }
  if (!(processing_time_s >= 0.0)) throw Error(ErrorCode::InvalidArgument, "processing time must be >= 0");
  return processing_time_s / duration_s;
}

SpeakerSetting SpeakerSetting::count(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidConfig, "speaker count must be a positive integer");
  return SpeakerSetting(Mode::Count, n);
}

SpeakerSetting SpeakerSetting::parse(std::string_view text) {
  if (text == "off") return off();
  if (text == "auto") return automatic();
  int n = 0;
  for (char c : text) {
    if (c < '0' || c > '9' || n > 1000) throw Error(ErrorCode::InvalidConfig, "speakers must be off, auto or N");
    n = n * 10 + (c - '0');
  }
  if (text.empty()) throw Error(ErrorCode::InvalidConfig, "speakers must be off, auto or N");
  return count(n);
}

std::string SpeakerSetting::to_string() const {
  switch (mode_) {
    case Mode::Off: return "off";
    case Mode::Auto: return "auto";
    case Mode::Count: return std::to_string(count_);
  }
  return "auto";
}

void validate_config(const JobConfig& config) {
  engines::validate_language(config.language);
  if (config.translate && config.language != "en" && config.language != "auto") {
    throw Error(ErrorCode::InvalidConfig,
                "translation is only supported into English; set language to en (got '" + config.language + "')");
  }
  if (config.model_id.empty()) {
    throw Error(ErrorCode::InvalidConfig, "model must be set");
  }
  if (!(config.gap_tolerance_s >= 0.0)) throw Error(ErrorCode::InvalidConfig, "gap tolerance must be >= 0");
}

std::string format_utc(std::chrono::system_clock::time_point tp) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  ::gmtime_r(&secs, &tm);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
  return buf;
}

std::optional<std::chrono::system_clock::time_point> parse_utc(std::string_view text) {
  std::tm tm{};
  int ms = 0;
  int consumed = 0;
  const std::string s(text);
  if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ%n", &tm.tm_year, &tm.tm_mon, &tm.tm_mday, &tm.tm_hour,
                  &tm.tm_min, &tm.tm_sec, &ms, &consumed) != 7 ||
      static_cast<std::size_t>(consumed) != s.size()) {
    return std::nullopt;
  }
  tm.tm_year -= 1900;
  tm.tm_mon -= 1;
  const std::time_t secs = ::timegm(&tm);
  return std::chrono::system_clock::from_time_t(secs) + std::chrono::milliseconds(ms);
}

ojson to_json(const JobConfig& c) {
  ojson j = ojson::object();
  j["input_path"] = c.input_path.string();
  j["model"] = c.model_id;
  j["language"] = c.language;
  j["speakers"] = c.speakers.to_string();
  j["device"] = std::string(engines::to_string(c.device));
  j["translate"] = c.translate;
  j["gap_tolerance_s"] = c.gap_tolerance_s;
  return j;
}

JobConfig config_from_json(const nlohmann::json& j, JobConfig base) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "job config must be a JSON object");
  try {
    if (j.contains("input_path")) base.input_path = j["input_path"].get<std::string>();
    if (j.contains("model")) base.model_id = j["model"].get<std::string>();
    if (j.contains("language")) base.language = j["language"].get<std::string>();
    if (j.contains("speakers")) {
      const auto& s = j["speakers"];
      base.speakers = s.is_number_integer() ? SpeakerSetting::count(s.get<int>())
                                            : SpeakerSetting::parse(s.get<std::string>());
    }
    if (j.contains("device")) {
      auto pref = engines::parse_device_preference(j["device"].get<std::string>());
      if (!pref) throw Error(ErrorCode::InvalidConfig, "device must be auto, cpu or gpu");
      base.device = *pref;
    }
    if (j.contains("translate")) base.translate = j["translate"].get<bool>();
    if (j.contains("gap_tolerance_s")) base.gap_tolerance_s = j["gap_tolerance_s"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("bad job config: ") + e.what());
  }
  return base;
}

ojson to_json(const JobRecord& r) {
  ojson j = ojson::object();
  j["job_id"] = r.job_id;
  j["state"] = std::string(to_string(r.state));
  j["config"] = to_json(r.config);
  j["created_at"] = r.created_at;
  j["started_at"] = optional_json(r.started_at);
  j["finished_at"] = optional_json(r.finished_at);
  j["duration_s"] = optional_json(r.duration_s);
  j["processing_time_s"] = optional_json(r.processing_time_s);
  j["rpt"] = optional_json(r.rpt);
  ojson stages = ojson::object();
  for (const auto& [k, v] : r.stage_times_s) stages[k] = v;
  j["stage_times_s"] = std::move(stages);
  if (r.error) {
    j["error"] = ojson{{"stage", r.error->stage}, {"code", r.error->code}, {"message", r.error->message}};
  } else {
    j["error"] = nullptr;
  }
  j["directory"] = r.directory.string();
  j["engine"] = r.engine;
  j["device"] = r.device;
  ojson attempts = ojson::array();
  for (const auto& a : r.network_attempts) {
    attempts.push_back(ojson{{"operation", a.operation}, {"destination", a.destination}});
  }
  j["network_attempts"] = std::move(attempts);
  return j;
}

JobRecord record_from_json(const ojson& j) {
  JobRecord r;
  try {
    r.job_id = j.at("job_id").get<std::string>();
    auto state = parse_job_state(j.at("state").get<std::string>());
    if (!state) throw Error(ErrorCode::InvalidArgument, "unknown job state");
    r.state = *state;
    r.config = config_from_json(nlohmann::json::parse(j.at("config").dump()));
    r.created_at = j.at("created_at").get<std::string>();
    r.started_at = optional_from<std::string>(j, "started_at");
    r.finished_at = optional_from<std::string>(j, "finished_at");
    r.duration_s = optional_from<double>(j, "duration_s");
    r.processing_time_s = optional_from<double>(j, "processing_time_s");
    r.rpt = optional_from<double>(j, "rpt");
    if (j.contains("stage_times_s")) {
      for (const auto& [k, v] : j["stage_times_s"].items()) r.stage_times_s[k] = v.get<double>();
    }
    if (j.contains("error") && !j["error"].is_null()) {
      const auto& e = j["error"];
      r.error = JobError{e.at("stage").get<std::string>(), e.at("code").get<std::string>(),
                         e.at("message").get<std::string>()};
    }
    r.directory = j.value("directory", std::string());
    r.engine = j.value("engine", std::string());
    r.device = j.value("device", std::string());
    if (j.contains("network_attempts")) {
      for (const auto& a : j["network_attempts"]) {
        r.network_attempts.push_back({a.at("operation").get<std::string>(), a.at("destination").get<std::string>()});
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed job record: ") + e.what());
  }
  return r;
}

ojson to_json(const JobEvent& e) {
  ojson j = ojson::object();
  j["seq"] = e.seq;
  j["job_id"] = e.job_id;
  j["time"] = e.time;
  j["kind"] = e.kind;
  j["state"] = std::string(to_string(e.state));
  j["percent"] = optional_json(e.percent);
  j["phase"] = e.phase;
  j["message"] = e.message;
  return j;
}

JobEvent event_from_json(const ojson& j) {
  JobEvent e;
  try {
    e.seq = j.at("seq").get<std::uint64_t>();
    e.job_id = j.at("job_id").get<std::string>();
    e.time = j.at("time").get<std::string>();
    e.kind = j.at("kind").get<std::string>();
    e.state = parse_job_state(j.at("state").get<std::string>()).value_or(JobState::Failed);
    e.percent = optional_from<double>(j, "percent");
    e.phase = j.value("phase", std::string());
    e.message = j.value("message", std::string());
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed job event: ") + ex.what());
  }
  return e;
}

// ---------------------------------------------------------------------------

JobStore::JobStore(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  std::error_code ec;
  fs::create_directories(data_dir_, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create data directory " + data_dir_.string() + ": " + ec.message());
}

fs::path JobStore::job_dir(std::string_view job_id) const { return data_dir_ / std::string(job_id); }

std::string JobStore::allocate(std::chrono::system_clock::time_point created, const fs::path& input) {
  const auto iso = format_utc(created);  // 2026-10-15T10:15:00.123Z
  std::string stamp;
  for (char c : iso) {
    if (c != '-' && c != ':' && c != '.') stamp.push_back(c);
  }

  std::string slug;
  for (char c : input.stem().string()) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) && uc < 0x80) {
      slug.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!slug.empty() && slug.back() != '-') {
      slug.push_back('-');
    }
    if (slug.size() >= 32) break;
  }
  while (!slug.empty() && slug.back() == '-') slug.pop_back();
  if (slug.empty()) slug = "audio";

  const std::string base = stamp + "-" + slug;
  for (int n = 1;; ++n) {
    std::string id = n == 1 ? base : base + "-" + std::to_string(n);
    std::error_code ec;
    if (fs::create_directory(job_dir(id), ec)) return id;
    if (ec) throw Error(ErrorCode::Io, "cannot create job directory: " + ec.message());
  }
}

void JobStore::save(const JobRecord& record) const {
  fsutil::write_file_atomic(job_dir(record.job_id) / "metadata.json", to_json(record).dump(2) + "\n");
}

std::optional<JobRecord> JobStore::load(std::string_view job_id) const {
  const fs::path file = job_dir(job_id) / "metadata.json";
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) return std::nullopt;
  try {
    return record_from_json(ojson::parse(fsutil::read_file(file)));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::vector<JobRecord> JobStore::load_all() const {
  std::vector<JobRecord> out;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(data_dir_, ec)) {
    if (!entry.is_directory()) continue;
    if (auto r = load(entry.path().filename().string())) out.push_back(std::move(*r));
  }
  return out;
}

void JobStore::append_event(const JobEvent& event) const {
  const fs::path dir = job_dir(event.job_id);
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return;
  fsutil::append_line(dir / "events.log", to_json(event).dump());
}

std::vector<JobEvent> JobStore::read_events(std::string_view job_id) const {
  std::vector<JobEvent> out;
  std::ifstream in(job_dir(job_id) / "events.log");
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    try {
      out.push_back(event_from_json(ojson::parse(line)));
    } catch (const std::exception&) {
      // a torn final line after a crash
    }
  }
  return out;
}

void JobStore::remove(std::string_view job_id) const {
  std::error_code ec;
  fs::remove_all(job_dir(job_id), ec);
  if (ec) throw Error(ErrorCode::Io, "cannot remove job directory: " + ec.message());
}

}  // namespace atrain::jobs
