// Command line front end. Talks to the library only through atrain.h.
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <pthread.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "atrain/atrain.h"

using json = nlohmann::ordered_json;

namespace {

struct Owned {
  char* p = nullptr;
  ~Owned() { atrain_string_free(p); }
  std::string str() const { return p ? p : ""; }
  json parse() const { return json::parse(str()); }
};

int report(atrain_status st) {
  if (st == ATRAIN_OK) return 0;
  std::cerr << "error: " << atrain_status_name(st) << ": " << atrain_last_error() << "\n";
  return st == ATRAIN_E_JOB_FAILED ? 3 : 1;
}

struct Context {
  atrain_context* ctx = nullptr;
  ~Context() { atrain_context_close(ctx); }
};

std::string fmt_seconds(const json& v) {
  if (!v.is_number()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1fs", v.get<double>());
  return buf;
}

void print_event(const char* text, void*) {
  const auto e = json::parse(text);
  if (e["kind"] == "progress") {
    std::fprintf(stderr, "\r  %-14s %5.1f%%", e.value("phase", std::string()).c_str(), e.value("percent", 0.0));
    return;
  }
  if (e["kind"] == "state") {
    std::fprintf(stderr, "\r\033[K%s", e["state"].get<std::string>().c_str());
    if (e.contains("message") && e["message"].is_string() && !e["message"].get<std::string>().empty()) {
      std::fprintf(stderr, "  %s", e["message"].get<std::string>().c_str());
    }
    std::fprintf(stderr, "\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline transcription with speaker detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(atrain_version()));

  std::string home;
  std::string engine;
  std::string options_json;
  app.add_option("--home", home, "Data directory (default: $ATRAIN_HOME or the user data dir)");
  app.add_option("--engine", engine, "Engine backend: whisper-cli or mock");
  app.add_option("--options", options_json, "Settings overrides as a JSON object");

  auto open = [&](Context& c) {
    json overrides = options_json.empty() ? json::object() : json::parse(options_json);
    if (!home.empty()) overrides["data_dir"] = home;
    if (!engine.empty()) overrides["engine"] = engine;
    return atrain_context_open(overrides.dump().c_str(), &c.ctx);
  };

  // transcribe
  auto* transcribe = app.add_subcommand("transcribe", "Transcribe one audio or video file");
  std::string input;
  std::string model = "medium";
  std::string language = "auto";
  std::string speakers = "auto";
  std::string device = "auto";
  bool translate = false;
  transcribe->add_option("file", input, "Input file")->required();
  transcribe->add_option("--model", model, "Model id (tiny, base, small, medium, large)")->capture_default_str();
  transcribe->add_option("--language", language, "ISO code or auto")->capture_default_str();
  transcribe->add_option("--speakers", speakers, "off, auto or a speaker count")->capture_default_str();
  transcribe->add_option("--device", device, "auto, cpu or gpu")->capture_default_str();
  transcribe->add_flag("--translate", translate, "Translate into English");

  // models
  auto* models = app.add_subcommand("models", "List or download models");
  models->require_subcommand(1);
  auto* models_list = models->add_subcommand("list", "Show models and install state");
  auto* models_prefetch = models->add_subcommand("prefetch", "Download and verify a model");
  std::string model_id;
  models_prefetch->add_option("id", model_id, "Model id")->required();

  // jobs
  auto* jobs = app.add_subcommand("jobs", "Inspect stored jobs");
  jobs->require_subcommand(1);
  auto* jobs_list = jobs->add_subcommand("list", "All jobs, newest first");
  auto* jobs_show = jobs->add_subcommand("show", "One job record");
  auto* jobs_delete = jobs->add_subcommand("delete", "Delete a job and its files");
  std::string job_id;
  jobs_show->add_option("id", job_id)->required();
  jobs_delete->add_option("id", job_id)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP API and job worker");
  std::string host = "127.0.0.1";
  int port = 5514;
  std::string static_dir;
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--static", static_dir, "Directory served at /");

  // bench
  auto* bench = app.add_subcommand("bench", "Relative processing time benchmark");
  bench->require_subcommand(1);
  auto* bench_run = bench->add_subcommand("run", "Run the corpus x model matrix");
  std::string corpus;
  std::string model_list = "tiny,base,small,medium,large";
  std::string bench_device = "cpu";
  int reps = 1;
  std::string out = "results.csv";
  std::string machine_label;
  bench_run->add_option("--corpus", corpus, "Directory of recordings")->required();
  bench_run->add_option("--models", model_list, "Comma separated model ids")->capture_default_str();
  bench_run->add_option("--device", bench_device)->capture_default_str();
  bench_run->add_option("--reps", reps)->capture_default_str()->check(CLI::PositiveNumber);
  bench_run->add_option("--out", out, "CSV file, appended row by row")->capture_default_str();
  bench_run->add_option("--machine-label", machine_label, "Defaults to the host name");
  auto* bench_report = bench->add_subcommand("report", "Summarize a results CSV");
  std::string csv;
  std::string plot_out;
  bench_report->add_option("csv", csv)->required();
  bench_report->add_option("--plot", plot_out, "Write the plot series JSON here (default: <csv>.plot.json)");

  // probe
  auto* probe = app.add_subcommand("probe", "Show container, duration and audio presence");
  probe->add_option("file", input)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (bench_report->parsed()) {
      Owned r;
      if (int rc = report(atrain_bench_report(csv.c_str(), &r.p))) return rc;
      const auto j = r.parse();
      std::cout << j["markdown"].get<std::string>();
      const std::string path = plot_out.empty() ? csv + ".plot.json" : plot_out;
      std::ofstream(path) << j["plot"].dump(2) << "\n";
      std::cerr << "plot series written to " << path << "\n";
      return 0;
    }

    Context c;
    if (serve->parsed()) {
      // Block termination signals before any worker thread exists, then wait.
      sigset_t set;
      sigemptyset(&set);
      sigaddset(&set, SIGINT);
      sigaddset(&set, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &set, nullptr);
      if (int rc = report(open(c))) return rc;
      int bound = 0;
      if (int rc = report(atrain_serve_start(c.ctx, host.c_str(), port, static_dir.c_str(), &bound))) return rc;
      std::cerr << "listening on http://" << host << ":" << bound << "  (Ctrl-C to stop)\n";
      int sig = 0;
      sigwait(&set, &sig);
      return report(atrain_serve_stop(c.ctx));
    }

    if (int rc = report(open(c))) return rc;

    if (transcribe->parsed()) {
      json cfg = {{"input_path", input}, {"model", model},   {"language", language},
                  {"speakers", speakers}, {"device", device}, {"translate", translate}};
      Owned created;
      if (int rc = report(atrain_job_create(c.ctx, cfg.dump().c_str(), &created.p))) return rc;
      const auto id = created.parse()["job_id"].get<std::string>();
      std::cerr << "job " << id << "\n";
      Owned done;
      const auto st = atrain_job_run(c.ctx, id.c_str(), print_event, nullptr, &done.p);
      if (st == ATRAIN_OK) {
        const auto r = done.parse();
        std::cout << "transcript written to " << r["directory"].get<std::string>() << "\n";
        std::cout << "processing time " << fmt_seconds(r["processing_time_s"]) << ", rpt "
                  << (r["rpt"].is_number() ? std::to_string(r["rpt"].get<double>()) : "-") << "\n";
      }
      return report(st);
    }

    if (models_list->parsed()) {
      Owned r;
      if (int rc = report(atrain_models_list(c.ctx, &r.p))) return rc;
      const auto j = r.parse();
      std::printf("%-8s %-10s %-9s %s\n", "ID", "TIER", "INSTALLED", "SIZE");
      for (const auto& m : j["models"]) {
        const double size = m.value("size", 0.0);
        const std::string shown = size > 0 ? std::to_string(static_cast<long long>(size / (1024.0 * 1024.0))) + " MiB" : "-";
        std::printf("%-8s %-10s %-9s %s\n", m["id"].get<std::string>().c_str(), m["tier"].get<std::string>().c_str(),
                    m["installed"].get<bool>() ? "yes" : "no", shown.c_str());
      }
      std::printf("model directory: %s\n", j["model_dir"].get<std::string>().c_str());
      return 0;
    }

    if (models_prefetch->parsed()) {
      Owned r;
      auto progress = [](unsigned long long done, unsigned long long total, void*) {
        if (total > 0) std::fprintf(stderr, "\r%5.1f%%", 100.0 * static_cast<double>(done) / static_cast<double>(total));
      };
      const auto st = atrain_model_prefetch(c.ctx, model_id.c_str(), progress, nullptr, &r.p);
      std::fprintf(stderr, "\n");
      if (st == ATRAIN_OK) std::cout << r.parse()["path"].get<std::string>() << "\n";
      return report(st);
    }

    if (jobs_list->parsed()) {
      Owned r;
      if (int rc = report(atrain_job_list(c.ctx, &r.p))) return rc;
      const auto list = r.parse();
      for (const auto& j : list["jobs"]) {
        std::printf("%-48s %-12s %8s\n", j["job_id"].get<std::string>().c_str(), j["state"].get<std::string>().c_str(),
                    fmt_seconds(j["processing_time_s"]).c_str());
      }
      return 0;
    }

    if (jobs_show->parsed()) {
      Owned r;
      if (int rc = report(atrain_job_get(c.ctx, job_id.c_str(), &r.p))) return rc;
      std::cout << r.str() << "\n";
      return 0;
    }

    if (jobs_delete->parsed()) return report(atrain_job_delete(c.ctx, job_id.c_str()));

    if (bench_run->parsed()) {
      json models_json = json::array();
      std::stringstream ss(model_list);
      for (std::string m; std::getline(ss, m, ',');) {
        if (!m.empty()) models_json.push_back(m);
      }
      json opts = {{"corpus", corpus}, {"models", models_json}, {"device", bench_device},
                   {"reps", reps},     {"out", out}};
      if (!machine_label.empty()) opts["machine_label"] = machine_label;
      auto on_row = [](const char* row, size_t done, size_t total, void*) {
        const auto r = json::parse(row);
        std::fprintf(stderr, "[%zu/%zu] %s %s %s  ", done, total, r["file"].get<std::string>().c_str(),
                     r["model_id"].get<std::string>().c_str(), r["device"].get<std::string>().c_str());
        if (r["rpt"].is_number()) {
          std::fprintf(stderr, "total %.2fs rpt %.3f\n", r["total_s"].get<double>(), r["rpt"].get<double>());
        } else {
          std::fprintf(stderr, "failed: %s\n", r["error"].is_string() ? r["error"].get<std::string>().c_str() : "?");
        }
      };
      Owned r;
      if (int rc = report(atrain_bench_run(c.ctx, opts.dump().c_str(), on_row, nullptr, &r.p))) return rc;
      std::cerr << "results appended to " << out << "\n";
      return 0;
    }

    if (probe->parsed()) {
      Owned r;
      if (int rc = report(atrain_probe_media(c.ctx, input.c_str(), &r.p))) return rc;
      std::cout << r.str() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
