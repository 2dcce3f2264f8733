// One PASS/FAIL/SKIP line per acceptance criterion. Exit status is non-zero
// when any criterion fails.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <sstream>

#include "align_oracle.hpp"
#include "atrain/bench.hpp"
#include "atrain/error.hpp"
#include "atrain/export.hpp"
#include "atrain/jobs.hpp"
#include "atrain/process.hpp"
#include "atrain/settings.hpp"
#include "export_fixtures.hpp"
#include "support.hpp"

using namespace atrain;
namespace ts = testsupport;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

enum class Verdict { Pass, Fail, Skip };

struct Outcome {
  Verdict verdict = Verdict::Pass;
  std::string detail;
};

// Collects the first failure; later checks still run.
struct Checks {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  Outcome outcome(const std::string& pass_detail) const {
    if (failures.empty()) return {Verdict::Pass, pass_detail};
    std::string d = failures.front();
    if (failures.size() > 1) d += " (+" + std::to_string(failures.size() - 1) + " more)";
    return {Verdict::Fail, d};
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<jobs::JobState> state_trail(const std::vector<jobs::JobEvent>& events) {
  std::vector<jobs::JobState> out;
  for (const auto& e : events) {
    if (e.kind == "state") out.push_back(e.state);
  }
  return out;
}

jobs::JobRecord run_job(const fs::path& data, const fs::path& input, const std::string& speakers,
                        engines::MockOptions mock, std::vector<jobs::JobEvent>* events = nullptr) {
  jobs::JobManager m(ts::mock_manager_options(data, std::move(mock)));
  jobs::JobConfig c;
  c.input_path = input;
  c.model_id = "tiny";
  c.speakers = jobs::SpeakerSetting::parse(speakers);
  auto r = m.run_pipeline(m.create_job(c, {.enqueue = false}).job_id);
  if (events) *events = m.events(r.job_id);
  return r;
}

Outcome alignment_oracle() {
  using engines::SpeakerTurn;
  const auto t0 = Clock::now();
  Checks c;
  std::mt19937_64 rng(20240611);
  int checked = 0;
  for (int i = 0; i < 1000; ++i, ++checked) {
    const auto inst = oracle::random_instance(rng);
    if (auto diff = oracle::compare(inst); !diff.empty()) c.expect(false, "instance " + std::to_string(i) + ": " + diff);
  }

  // Engineered cases with the expected labels written out.
  struct Case {
    std::string what;
    double ws, we;
    std::vector<SpeakerTurn> turns;
    double tolerance;
    std::string want;
  };
  const std::vector<Case> cases = {
      {"equal overlap, earlier turn wins", 1.0, 3.0, {{0.0, 2.0, "SPEAKER_01"}, {2.0, 4.0, "SPEAKER_00"}}, 2.0,
       "SPEAKER_01"},
      {"same start, smaller label wins", 0.5, 1.5, {{0.0, 2.0, "SPEAKER_01"}, {0.0, 3.0, "SPEAKER_00"}}, 2.0,
       "SPEAKER_00"},
      {"zero overlap, nearest gap within tolerance", 5.0, 5.5, {{0.0, 4.0, "SPEAKER_00"}, {7.0, 9.0, "SPEAKER_01"}},
       2.0, "SPEAKER_00"},
      {"zero overlap, equal gaps, earlier turn", 5.0, 6.0, {{0.0, 4.0, "SPEAKER_01"}, {7.0, 9.0, "SPEAKER_00"}}, 2.0,
       "SPEAKER_01"},
      {"zero overlap beyond tolerance", 10.0, 11.0, {{0.0, 4.0, "SPEAKER_00"}}, 2.0, "UNKNOWN"},
      {"touching boundary is zero overlap", 4.0, 5.0, {{0.0, 4.0, "SPEAKER_00"}, {6.0, 8.0, "SPEAKER_01"}}, 0.0,
       "SPEAKER_00"},
      {"no turns at all", 1.0, 2.0, {}, 5.0, "UNKNOWN"},
      {"zero length word inside a turn", 2.0, 2.0, {{0.0, 4.0, "SPEAKER_00"}}, 0.0, "SPEAKER_00"},
  };
  for (const auto& k : cases) {
    const std::vector<engines::WordToken> w = {{k.ws, k.we, "w", 1.0}};
    const auto lib = align::assign_word_speakers(w, k.turns, k.tolerance);
    const auto ref = oracle::word_speaker(k.ws, k.we, k.turns, k.tolerance);
    c.expect(lib[0].speaker == k.want, k.what + ": library " + lib[0].speaker.value_or("<none>"));
    c.expect(ref == k.want, k.what + ": oracle " + ref);
    ++checked;
  }
  // Segment vote tie: equal durations, earliest word's label wins.
  {
    oracle::Instance inst;
    inst.turns = {{0.0, 1.0, "SPEAKER_01"}, {1.0, 2.0, "SPEAKER_00"}};
    oracle::Segment seg;
    seg.start_s = 0.0;
    seg.end_s = 2.0;
    seg.words = {{0.0, 1.0, "a", 1.0}, {1.0, 2.0, "b", 1.0}};
    inst.segments = {seg};
    const auto lib = oracle::run_library(inst);
    c.expect(lib.segments[0].speaker == "SPEAKER_01", "segment tie: library " + lib.segments[0].speaker.value_or(""));
    c.expect(oracle::compare(inst).empty(), "segment tie: oracle disagrees");
    ++checked;
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 10.0, "runtime " + num(elapsed) + " s exceeds 10 s");
  return c.outcome(std::to_string(checked) + " instances agree, " + num(elapsed) + " s");
}

Outcome export_goldens() {
  const auto t0 = Clock::now();
  Checks c;
  const fs::path golden = ts::source_dir() / "golden";
  ts::TempDir dir;
  int files = 0;
  for (const auto& k : fixtures::all_cases()) {
    fs::create_directories(dir / k.name);
    const auto bundle = exporters::write_exports(k.transcript, k.metadata, dir / k.name);
    const std::pair<fs::path, std::string_view> outputs[] = {{bundle.timestamped_txt, exporters::kTimestampedTxt},
                                                             {bundle.plain_txt, exporters::kPlainTxt},
                                                             {bundle.qda_txt, exporters::kQdaTxt},
                                                             {bundle.raw_json, exporters::kRawJson}};
    for (const auto& [written, name] : outputs) {
      const fs::path expected = golden / (k.name + "." + std::string(name));
      c.expect(fs::exists(expected), "missing golden " + expected.string());
      c.expect(ts::read_text(written) == ts::read_text(expected), k.name + "/" + std::string(name) + " differs");
      ++files;
    }
    const auto raw = ts::read_text(bundle.raw_json);
    const auto parsed = exporters::parse_raw_json(raw);
    c.expect(parsed.transcript == k.transcript && parsed.metadata == k.metadata, k.name + ": round trip lossy");
    c.expect(exporters::export_raw_json(parsed.transcript, parsed.metadata) == raw, k.name + ": re-export differs");
    c.expect(exporters::export_timestamped_txt(parsed.transcript) == ts::read_text(bundle.timestamped_txt) &&
                 exporters::export_plain_txt(parsed.transcript) == ts::read_text(bundle.plain_txt) &&
                 exporters::export_qda_txt(parsed.transcript) == ts::read_text(bundle.qda_txt),
             k.name + ": text re-export differs");
  }
  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 5.0, "runtime " + num(elapsed) + " s exceeds 5 s");
  return c.outcome(std::to_string(files) + " golden files match, round trip byte-identical, " + num(elapsed) + " s");
}

Outcome rpt_arithmetic() {
  Checks c;
  c.expect(jobs::compute_rpt(4418.0, 4418.0) == 1.0, "compute_rpt(4418, 4418) != 1.0");
  std::mt19937_64 rng(4418);
  std::uniform_real_distribution<double> p(0.0, 20000.0), d(0.01, 20000.0), k(0.001, 1000.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double pp = p(rng), dd = d(rng), kk = k(rng);
    worst = std::max(worst, std::abs(jobs::compute_rpt(kk * pp, kk * dd) - jobs::compute_rpt(pp, dd)));
  }
  c.expect(worst <= 1e-9, "scale invariance off by " + std::to_string(worst));
  return c.outcome("rpt(4418, 4418) = 1.0, 100 scaled triples within " + num(worst, 12));
}

Outcome pipeline_state_machine() {
  using jobs::JobState;
  const auto t0 = Clock::now();
  Checks c;
  ts::TempDir dir;
  const auto input = ts::make_dialogue_fixture(dir / "in", "dialogue", 10.0);

  std::vector<jobs::JobEvent> events;
  auto r = run_job(dir / "data", input, "auto", {}, &events);
  const std::vector<JobState> full = {JobState::Created,  JobState::Converting, JobState::Transcribing,
                                      JobState::Diarizing, JobState::Aligning,  JobState::Exporting,
                                      JobState::Completed};
  c.expect(r.state == JobState::Completed, "diarized run ended " + std::string(to_string(r.state)));
  c.expect(state_trail(events) == full, "diarized run: state events are not one per transition");

  r = run_job(dir / "data", input, "off", {}, &events);
  const std::vector<JobState> plain = {JobState::Created,  JobState::Converting, JobState::Transcribing,
                                       JobState::Aligning, JobState::Exporting,  JobState::Completed};
  c.expect(r.state == JobState::Completed, "speakers-off run ended " + std::string(to_string(r.state)));
  c.expect(state_trail(events) == plain, "speakers-off run did not skip DIARIZING");

  r = run_job(dir / "data", input, "auto", {.fail_at = "transcribe"}, &events);
  c.expect(r.state == JobState::Failed && r.error && r.error->stage == "TRANSCRIBING",
           "injected fault did not fail in TRANSCRIBING");
  const auto trail = state_trail(events);
  c.expect(trail.size() == 4 && trail.back() == JobState::Failed, "fault run: unexpected state events");

  const double elapsed = seconds_since(t0);
  c.expect(elapsed < 30.0, "runtime " + num(elapsed) + " s exceeds 30 s");
  return c.outcome("full, speakers-off and faulted runs traced, " + num(elapsed) + " s");
}

Outcome offline_compliance() {
  Checks c;
  ts::TempDir dir;
  const auto input = ts::make_dialogue_fixture(dir / "in");
  int runs = 0;
  for (const char* speakers : {"auto", "off", "2"}) {
    auto r = run_job(dir / "data", input, speakers, {});
    c.expect(r.state == jobs::JobState::Completed, std::string("run speakers=") + speakers + " did not complete");
    c.expect(r.network_attempts.empty(), std::string("run speakers=") + speakers + " recorded network attempts");
    ++runs;
  }
  for (const std::string probe : {"127.0.0.1:9", "huggingface.co:443"}) {
    auto r = run_job(dir / "data", input, "auto", {.network_probe = probe});
    c.expect(r.state == jobs::JobState::Failed, "network-seeking engine (" + probe + ") was not failed");
    c.expect(r.error && r.error->code == "NetworkAttemptDenied", "wrong failure code for " + probe);
    c.expect(r.network_attempts.size() == 1, "attempt for " + probe + " not recorded exactly once");
  }
  return c.outcome(std::to_string(runs) + " mock runs with 0 attempts; 2 network-seeking runs denied and FAILED");
}

Outcome bench_calibration() {
  Checks c;
  ts::TempDir dir;
  const auto input = ts::make_dialogue_fixture(dir / "in", "dialogue", 10.0);
  bench::BenchOptions o;
  o.corpus = {input};
  o.models = {"tiny"};
  o.machine_label = "acceptance";

  auto slow = bench::run_benchmark(o, ts::mock_manager_options(dir / "slow", {.delay_factor = 0.5}));
  const double rpt = slow.at(0).rpt.value_or(-1.0);
  c.expect(rpt >= 0.45 && rpt <= 0.55, "delay 0.5 measured rpt " + num(rpt) + " outside [0.45, 0.55]");

  auto fast = bench::run_benchmark(o, ts::mock_manager_options(dir / "fast"));
  const double total = fast.at(0).total_s;
  c.expect(fast.at(0).error.empty(), "zero-delay cell failed: " + fast.at(0).error);
  c.expect(total < 1.0, "zero-delay total_s " + num(total) + " >= 1.0");
  return c.outcome("delay 0.5 rpt " + num(rpt) + ", zero-delay total_s " + num(total));
}

// Needs whisper-cli on PATH (or configured), an installed "tiny" model and
// ATRAIN_SMOKE_AUDIO pointing at a ~60 s speech excerpt (e.g. LibriSpeech).
Outcome real_backend_smoke() {
  const char* audio_env = std::getenv("ATRAIN_SMOKE_AUDIO");
  if (audio_env == nullptr || !fs::is_regular_file(audio_env)) {
    return {Verdict::Skip, "set ATRAIN_SMOKE_AUDIO to a 60 s speech excerpt to run"};
  }
  Settings settings;
  try {
    settings = load_settings();
  } catch (const Error& e) {
    return {Verdict::Skip, std::string("settings unusable: ") + e.what()};
  }
  if (!proc::find_executable(settings.backend.whisper_cli)) {
    return {Verdict::Skip, "ASR backend '" + settings.backend.whisper_cli + "' not found"};
  }
  auto registry = std::make_shared<models::ModelRegistry>(models::Manifest::load(settings.manifest_path),
                                                          settings.model_dir);
  if (!registry->spec("tiny").installed) return {Verdict::Skip, "model tiny not installed"};

  Checks c;
  ts::TempDir dir;
  jobs::ManagerOptions mo;
  mo.data_dir = dir.path();
  mo.registry = registry;
  mo.engines = engines::make_backend_factory(settings.backend);
  mo.converter.media_converter = settings.media_converter.empty() ? ts::ffmpeg() : settings.media_converter;
  jobs::JobManager m(mo);
  jobs::JobConfig cfg;
  cfg.input_path = audio_env;
  cfg.model_id = "tiny";
  cfg.speakers = jobs::SpeakerSetting::off();
  cfg.device = engines::DevicePreference::Cpu;
  const auto r = m.run_pipeline(m.create_job(cfg, {.enqueue = false}).job_id);
  if (r.state != jobs::JobState::Completed) {
    return {Verdict::Fail, "job failed: " + (r.error ? r.error->code + ": " + r.error->message : std::string())};
  }
  const auto raw = exporters::parse_raw_json(ts::read_text(r.directory / exporters::kRawJson));
  const auto& segs = raw.transcript.segments;
  const double limit = r.duration_s.value_or(0.0) + 0.5;
  c.expect(!segs.empty(), "empty transcript");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (i > 0) c.expect(segs[i].start_s >= segs[i - 1].start_s, "segment starts decrease at " + std::to_string(i));
    c.expect(segs[i].end_s <= limit, "segment " + std::to_string(i) + " ends past duration + 0.5 s");
    for (const auto& w : segs[i].words) c.expect(w.end_s <= limit, "word ends past duration + 0.5 s");
  }
  c.expect(r.network_attempts.empty(), "network attempts recorded");
  return c.outcome(std::to_string(segs.size()) + " segments over " + num(r.duration_s.value_or(0.0), 1) +
                   " s, rpt " + num(r.rpt.value_or(0.0)));
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"alignment-oracle-equivalence", alignment_oracle},
      {"export-determinism-and-closure", export_goldens},
      {"rpt-arithmetic", rpt_arithmetic},
      {"pipeline-state-machine", pipeline_state_machine},
      {"offline-compliance", offline_compliance},
      {"benchmark-harness-calibration", bench_calibration},
      {"real-backend-smoke", real_backend_smoke},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "SKIP";
    std::printf("%s %s: %s\n", tag, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    if (o.verdict == Verdict::Fail) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
