#include "atrain/atrain.h"

#include <cstdlib>
#include <cstring>
#include <mutex>

#include "json.hpp"

#include "atrain/bench.hpp"
#include "atrain/error.hpp"
#include "atrain/export.hpp"
#include "atrain/fsutil.hpp"
#include "atrain/http_api.hpp"
#include "atrain/media.hpp"
#include "atrain/net.hpp"
#include "atrain/runtime.hpp"
#include "atrain/version.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct atrain_context {
  std::unique_ptr<atrain::Runtime> rt;
  std::mutex serve_mutex;
  std::unique_ptr<atrain::http::Server> server;
};

namespace {

thread_local std::string last_error;

atrain_status status_of(atrain::ErrorCode code) { return static_cast<atrain_status>(static_cast<int>(code) + 1); }

atrain_status fail(atrain_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

template <typename Fn>
atrain_status wrap(Fn&& fn) {
  try {
    last_error.clear();
    return fn();
  } catch (const atrain::Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(ATRAIN_E_INVALID_CONFIG, std::string("bad JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(ATRAIN_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ATRAIN_E_INTERNAL, e.what());
  } catch (...) {
    return fail(ATRAIN_E_INTERNAL, "unknown error");
  }
}

char* dup(std::string_view s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size());
  p[s.size()] = '\0';
  return p;
}

void put(char** out, const ojson& j) {
  if (out != nullptr) *out = dup(j.dump(2, ' ', false, ojson::error_handler_t::replace));
}

void require(const void* p, const char* what) {
  if (p == nullptr) throw atrain::Error(atrain::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

nlohmann::json parse_object(const char* text, const char* what) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  auto j = nlohmann::json::parse(text);
  if (!j.is_object()) throw atrain::Error(atrain::ErrorCode::InvalidConfig, std::string(what) + " must be a JSON object");
  return j;
}

ojson bench_row_json(const atrain::bench::BenchResult& r) {
  ojson stages = ojson::object();
  for (const auto& [k, v] : r.stage_times_s) stages[k] = v;
  ojson j = {{"machine_label", r.machine_label}, {"device", r.device},     {"model_id", r.model_id},
             {"file", r.file},                   {"duration_s", r.duration_s}, {"total_s", r.total_s}};
  j["rpt"] = r.rpt ? ojson(*r.rpt) : ojson(nullptr);
  j["stage_times_s"] = stages;
  j["error"] = r.error.empty() ? ojson(nullptr) : ojson(r.error);
  return j;
}

}  // namespace

extern "C" {

const char* atrain_version(void) { return atrain::kVersion.data(); }

const char* atrain_status_name(atrain_status status) {
  if (status == ATRAIN_OK) return "Ok";
  if (status == ATRAIN_E_JOB_FAILED) return "JobFailed";
  const int code = static_cast<int>(status) - 1;
  if (code < 0 || code > static_cast<int>(atrain::ErrorCode::Internal)) return "Unknown";
  return atrain::to_string(static_cast<atrain::ErrorCode>(code)).data();
}

const char* atrain_last_error(void) { return last_error.c_str(); }

void atrain_string_free(char* s) { std::free(s); }

atrain_status atrain_context_open(const char* options_json, atrain_context** out) {
  return wrap([&] {
    require(out, "out");
    *out = nullptr;
    const auto overrides = parse_object(options_json, "options");
    auto ctx = std::make_unique<atrain_context>();
    ctx->rt = atrain::open_runtime(atrain::load_settings(overrides.dump()));
    *out = ctx.release();
    return ATRAIN_OK;
  });
}

void atrain_context_close(atrain_context* ctx) {
  if (ctx == nullptr) return;
  try {
    atrain_serve_stop(ctx);
    ctx->rt->manager->stop_worker();
  } catch (...) {
  }
  delete ctx;
}

atrain_status atrain_context_info(atrain_context* ctx, char** out_json) {
  return wrap([&] {
    require(ctx, "ctx");
    const auto& s = ctx->rt->settings;
    put(out_json, {{"data_dir", s.data_dir.string()},
                   {"model_dir", s.model_dir.string()},
                   {"manifest", s.manifest_path.string()},
                   {"engine", s.engine},
                   {"recovered_jobs", ctx->rt->manager->recovered_jobs()}});
    return ATRAIN_OK;
  });
}

atrain_status atrain_job_create(atrain_context* ctx, const char* config_json, char** out_record_json) {
  return wrap([&] {
    require(ctx, "ctx");
    const auto j = parse_object(config_json, "config");
    atrain::jobs::JobConfig base;
    base.gap_tolerance_s = ctx->rt->settings.gap_tolerance_s;
    auto config = atrain::jobs::config_from_json(j, base);
    if (config.input_path.empty()) throw atrain::Error(atrain::ErrorCode::InvalidArgument, "input_path is required");
    std::error_code ec;
    auto abs = fs::absolute(config.input_path, ec);
    if (!ec) config.input_path = abs.lexically_normal();
    put(out_record_json, atrain::jobs::to_json(ctx->rt->manager->create_job(config)));
    return ATRAIN_OK;
  });
}

atrain_status atrain_job_run(atrain_context* ctx, const char* job_id, atrain_event_fn on_event, void* user,
                             char** out_record_json) {
  return wrap([&] {
    require(ctx, "ctx");
    require(job_id, "job_id");
    auto& manager = *ctx->rt->manager;
    std::uint64_t token = 0;
    if (on_event != nullptr) {
      const std::string id = job_id;
      token = manager.subscribe([on_event, user, id](const atrain::jobs::JobEvent& e) {
        if (e.job_id != id) return;
        const auto text = atrain::jobs::to_json(e).dump();
        on_event(text.c_str(), user);
      });
    }
    struct Unsub {
      atrain::jobs::JobManager& m;
      std::uint64_t t;
      ~Unsub() {
        if (t != 0) m.unsubscribe(t);
      }
    } unsub{manager, token};
    const auto record = manager.run_pipeline(job_id);
    put(out_record_json, atrain::jobs::to_json(record));
    if (record.state != atrain::jobs::JobState::Completed) {
      return fail(ATRAIN_E_JOB_FAILED, record.error ? record.error->code + " during " + record.error->stage + ": " +
                                                          record.error->message
                                                    : std::string("job failed"));
    }
    return ATRAIN_OK;
  });
}

atrain_status atrain_job_list(atrain_context* ctx, char** out_json) {
  return wrap([&] {
    require(ctx, "ctx");
    ojson list = ojson::array();
    for (const auto& r : ctx->rt->manager->list_jobs()) list.push_back(atrain::jobs::to_json(r));
    put(out_json, {{"jobs", list}});
    return ATRAIN_OK;
  });
}

atrain_status atrain_job_get(atrain_context* ctx, const char* job_id, char** out_record_json) {
  return wrap([&] {
    require(ctx, "ctx");
    require(job_id, "job_id");
    put(out_record_json, atrain::jobs::to_json(ctx->rt->manager->get_job(job_id)));
    return ATRAIN_OK;
  });
}

atrain_status atrain_job_events(atrain_context* ctx, const char* job_id, char** out_json) {
  return wrap([&] {
    require(ctx, "ctx");
    require(job_id, "job_id");
    ojson list = ojson::array();
    for (const auto& e : ctx->rt->manager->events(job_id)) list.push_back(atrain::jobs::to_json(e));
    put(out_json, {{"events", list}});
    return ATRAIN_OK;
  });
}

atrain_status atrain_job_delete(atrain_context* ctx, const char* job_id) {
  return wrap([&] {
    require(ctx, "ctx");
    require(job_id, "job_id");
    ctx->rt->manager->delete_job(job_id);
    return ATRAIN_OK;
  });
}

atrain_status atrain_models_list(atrain_context* ctx, char** out_json) {
  return wrap([&] {
    require(ctx, "ctx");
    const auto& registry = *ctx->rt->registry;
    ojson list = ojson::array();
    for (const auto& spec : registry.list()) {
      ojson m = {{"id", spec.model_id}, {"tier", atrain::engines::to_string(spec.tier)}, {"installed", spec.installed}};
      m["path"] = spec.local_path ? ojson(spec.local_path->string()) : ojson(nullptr);
      if (const auto* entry = registry.manifest().find(spec.model_id)) {
        m["size"] = entry->size_bytes;
        m["description"] = entry->description;
      }
      list.push_back(std::move(m));
    }
    put(out_json, {{"model_dir", registry.model_dir().string()}, {"models", list}});
    return ATRAIN_OK;
  });
}

atrain_status atrain_model_prefetch(atrain_context* ctx, const char* model_id, atrain_progress_fn progress, void* user,
                                    char** out_spec_json) {
  return wrap([&] {
    require(ctx, "ctx");
    require(model_id, "model_id");
    auto downloader = atrain::net::make_curl_downloader();
    atrain::net::DownloadProgress cb;
    if (progress != nullptr) cb = [progress, user](std::uint64_t done, std::uint64_t total) { progress(done, total, user); };
    const auto spec = ctx->rt->registry->prefetch(model_id, *downloader, cb);
    put(out_spec_json, {{"id", spec.model_id},
                        {"tier", atrain::engines::to_string(spec.tier)},
                        {"installed", spec.installed},
                        {"path", spec.local_path ? spec.local_path->string() : std::string()}});
    return ATRAIN_OK;
  });
}

atrain_status atrain_serve_start(atrain_context* ctx, const char* host, int port, const char* static_dir,
                                 int* out_port) {
  return wrap([&] {
    require(ctx, "ctx");
    if (port < 0 || port > 65535) throw atrain::Error(atrain::ErrorCode::InvalidArgument, "port out of range");
    std::lock_guard lock(ctx->serve_mutex);
    if (ctx->server) throw atrain::Error(atrain::ErrorCode::InvalidArgument, "already serving");
    atrain::http::ServerOptions options;
    if (host != nullptr && *host != '\0') options.host = host;
    options.port = port;
    if (static_dir != nullptr && *static_dir != '\0') options.static_dir = static_dir;
    auto server = std::make_unique<atrain::http::Server>(*ctx->rt->manager, options);
    const int bound = server->start();
    ctx->rt->manager->start_worker();
    ctx->server = std::move(server);
    if (out_port != nullptr) *out_port = bound;
    return ATRAIN_OK;
  });
}

atrain_status atrain_serve_stop(atrain_context* ctx) {
  return wrap([&] {
    require(ctx, "ctx");
    std::unique_ptr<atrain::http::Server> server;
    {
      std::lock_guard lock(ctx->serve_mutex);
      server = std::move(ctx->server);
    }
    if (server) server->stop();
    ctx->rt->manager->stop_worker();
    return ATRAIN_OK;
  });
}

atrain_status atrain_bench_run(atrain_context* ctx, const char* options_json, atrain_bench_fn on_row, void* user,
                               char** out_results_json) {
  return wrap([&] {
    require(ctx, "ctx");
    const auto j = parse_object(options_json, "options");
    atrain::bench::BenchOptions options;
    if (!j.contains("corpus")) throw atrain::Error(atrain::ErrorCode::InvalidArgument, "corpus is required");
    if (j["corpus"].is_array()) {
      for (const auto& f : j["corpus"]) options.corpus.emplace_back(f.get<std::string>());
    } else {
      options.corpus = atrain::bench::collect_corpus(j["corpus"].get<std::string>());
    }
    if (j.contains("models")) {
      options.models = j["models"].get<std::vector<std::string>>();
    } else {
      for (const auto& e : ctx->rt->registry->manifest().entries()) options.models.push_back(e.model_id);
    }
    const auto device = j.value("device", std::string("cpu"));
    auto pref = atrain::engines::parse_device_preference(device);
    if (!pref) throw atrain::Error(atrain::ErrorCode::InvalidConfig, "unknown device '" + device + "'");
    options.device = *pref;
    options.repetitions = j.value("reps", 1);
    options.machine_label = j.value("machine_label", std::string());
    options.csv_out = j.value("out", std::string());
    const fs::path work_dir = j.value("work_dir", (ctx->rt->settings.data_dir / "bench").string());

    atrain::bench::BenchProgress cb;
    if (on_row != nullptr) {
      cb = [on_row, user](const atrain::bench::BenchResult& r, std::size_t done, std::size_t total) {
        on_row(bench_row_json(r).dump().c_str(), done, total, user);
      };
    }
    const auto results = atrain::bench::run_benchmark(options, ctx->rt->manager_options(work_dir), cb);
    ojson rows = ojson::array();
    for (const auto& r : results) rows.push_back(bench_row_json(r));
    put(out_results_json, {{"results", rows}});
    return ATRAIN_OK;
  });
}

atrain_status atrain_bench_report(const char* csv_path, char** out_report_json) {
  return wrap([&] {
    require(csv_path, "csv_path");
    const auto report = atrain::bench::emit_report(atrain::bench::parse_csv(atrain::fsutil::read_file(csv_path)));
    put(out_report_json,
        {{"markdown", report.markdown}, {"plot", ojson::parse(report.plot_json)}, {"flags", report.flags}});
    return ATRAIN_OK;
  });
}

atrain_status atrain_probe_media(atrain_context* ctx, const char* path, char** out_json) {
  return wrap([&] {
    require(ctx, "ctx");
    require(path, "path");
    atrain::media::ConverterConfig converter;
    converter.media_converter = ctx->rt->settings.media_converter;
    const auto info = atrain::media::probe_media(path, converter);
    put(out_json, {{"source_path", info.source_path.string()},
                   {"container_format", info.container_format},
                   {"duration_s", info.duration_s},
                   {"has_audio", info.has_audio}});
    return ATRAIN_OK;
  });
}

atrain_status atrain_compute_rpt(double processing_time_s, double duration_s, double* out_rpt) {
  return wrap([&] {
    require(out_rpt, "out_rpt");
    *out_rpt = atrain::jobs::compute_rpt(processing_time_s, duration_s);
    return ATRAIN_OK;
  });
}

atrain_status atrain_format_timestamp(double seconds, char** out_text) {
  return wrap([&] {
    require(out_text, "out_text");
    *out_text = dup(atrain::exporters::format_timestamp(seconds));
    return ATRAIN_OK;
  });
}

}  // extern "C"
