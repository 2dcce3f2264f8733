#include "atrain/http_api.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <random>

#include <httplib.h>

#include "json.hpp"

#include "atrain/error.hpp"
#include "atrain/export.hpp"
#include "atrain/fsutil.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace atrain::http {
namespace {

void send_json(httplib::Response& res, const ojson& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2, ' ', false, ojson::error_handler_t::replace) + "\n", "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, {{"error", {{"code", to_string(code)}, {"message", message}}}}, status_for(code));
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    send_error(res, e.code(), e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, ErrorCode::InvalidConfig, std::string("bad JSON: ") + e.what());
  } catch (const std::exception& e) {
    send_error(res, ErrorCode::Internal, e.what());
  }
}

std::string safe_filename(const std::string& name) {
  std::string base = fs::path(name).filename().string();
  std::string out;
  for (char c : base) {
    const auto u = static_cast<unsigned char>(c);
    out += (u < 0x20 || c == '/' || c == '\\') ? '_' : c;
  }
  if (out.empty() || out == "." || out == "..") out = "upload";
  return out;
}

std::string random_token() {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

bool is_export_name(std::string_view name) {
  return name == exporters::kTimestampedTxt || name == exporters::kPlainTxt || name == exporters::kQdaTxt ||
         name == exporters::kRawJson;
}

// Events for one subscriber, in order.
struct EventStream {
  std::mutex mutex;
  std::condition_variable cv;
  std::deque<jobs::JobEvent> pending;
};

std::string sse_frame(const jobs::JobEvent& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + e.kind + "\ndata: " + jobs::to_json(e).dump() + "\n\n";
}

bool ends_stream(const jobs::JobEvent& e) {
  return e.kind == "deleted" || (e.kind == "state" && jobs::is_terminal(e.state));
}

}  // namespace

int status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::FileNotFound:
    case ErrorCode::JobNotFound: return 404;
    case ErrorCode::ModelNotInstalled: return 409;
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidConfig:
    case ErrorCode::UnsupportedLanguage:
    case ErrorCode::DeviceUnavailable:
    case ErrorCode::UnreadableMedia:
    case ErrorCode::NoAudioStream: return 422;
    default: return 500;
  }
}

Server::Server(jobs::JobManager& manager, ServerOptions options)
    : manager_(manager),
      options_(std::move(options)),
      server_(std::make_unique<httplib::Server>()),
      stopping_(std::make_shared<std::atomic<bool>>(false)) {
  if (options_.upload_dir.empty()) options_.upload_dir = manager_.options().data_dir / ".uploads";
  routes();
}

Server::~Server() { stop(); }

int Server::start() {
  if (thread_.joinable()) return port_;
  port_ = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                             : (server_->bind_to_port(options_.host, options_.port) ? options_.port : -1);
  if (port_ <= 0) {
    throw Error(ErrorCode::Io, "cannot bind " + options_.host + ":" + std::to_string(options_.port));
  }
  stopping_->store(false);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void Server::stop() {
  stopping_->store(true);
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

void Server::routes() {
  auto& srv = *server_;
  if (!options_.static_dir.empty()) srv.set_mount_point("/", options_.static_dir.string());

  srv.Post("/api/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (!req.is_multipart_form_data() || !req.has_file("file")) {
        throw Error(ErrorCode::InvalidArgument, "expected multipart form data with a 'file' part");
      }
      const auto upload = req.get_file_value("file");
      nlohmann::json cfg = nlohmann::json::object();
      if (req.has_file("config")) {
        const auto text = req.get_file_value("config").content;
        if (!text.empty()) cfg = nlohmann::json::parse(text);
        if (!cfg.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
        cfg.erase("input_path");
      }
      jobs::JobConfig base;
      base.gap_tolerance_s = manager_.options().gap_tolerance_s;
      auto config = jobs::config_from_json(cfg, base);

      const fs::path staging = options_.upload_dir / random_token();
      fs::create_directories(staging);
      config.input_path = staging / safe_filename(upload.filename);
      try {
        fsutil::write_file_atomic(config.input_path, upload.content);
        const auto record = manager_.create_job(config, {.move_input = true, .enqueue = true});
        std::error_code ec;
        fs::remove_all(staging, ec);
        send_json(res, {{"job_id", record.job_id}}, 201);
      } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
      }
    });
  });

  srv.Get("/api/jobs", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      ojson list = ojson::array();
      for (const auto& r : manager_.list_jobs()) list.push_back(jobs::to_json(r));
      send_json(res, {{"jobs", list}});
    });
  });

  srv.Get(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, jobs::to_json(manager_.get_job(req.matches[1]))); });
  });

  srv.Delete(R"(/api/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      manager_.delete_job(id);
      send_json(res, {{"deleted", id}});
    });
  });

  srv.Get(R"(/api/jobs/([^/]+)/files/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto record = manager_.get_job(req.matches[1]);
      const std::string name = req.matches[2];
      if (!is_export_name(name)) throw Error(ErrorCode::FileNotFound, "no such export: " + name);
      const fs::path file = record.directory / name;
      std::error_code ec;
      if (!fs::is_regular_file(file, ec)) throw Error(ErrorCode::FileNotFound, "export not available: " + name);
      res.set_content(fsutil::read_file(file),
                      name == exporters::kRawJson ? "application/json" : "text/plain; charset=utf-8");
      res.set_header("Content-Disposition", "attachment; filename=\"" + name + "\"");
    });
  });

  srv.Get(R"(/api/jobs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      auto stream = std::make_shared<EventStream>();
      const auto token = manager_.subscribe([stream, id](const jobs::JobEvent& e) {
        if (e.job_id != id) return;
        std::lock_guard lock(stream->mutex);
        stream->pending.push_back(e);
        stream->cv.notify_all();
      });
      std::vector<jobs::JobEvent> replay;
      try {
        replay = manager_.events(id);
      } catch (...) {
        manager_.unsubscribe(token);
        throw;
      }
      std::optional<std::uint64_t> last_seq;
      {
        std::lock_guard lock(stream->mutex);
        std::deque<jobs::JobEvent> merged(replay.begin(), replay.end());
        if (!replay.empty()) last_seq = replay.back().seq;
        for (auto& e : stream->pending) {
          if (!last_seq || e.seq > *last_seq) merged.push_back(e);
        }
        stream->pending = std::move(merged);
      }
      auto stopping = stopping_;
      auto& manager = manager_;
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [stream, stopping](std::size_t, httplib::DataSink& sink) {
            auto last_write = std::chrono::steady_clock::now();
            while (!stopping->load()) {
              std::deque<jobs::JobEvent> batch;
              {
                std::unique_lock lock(stream->mutex);
                stream->cv.wait_for(lock, std::chrono::milliseconds(250), [&] { return !stream->pending.empty(); });
                batch.swap(stream->pending);
              }
              for (const auto& e : batch) {
                const auto frame = sse_frame(e);
                if (!sink.write(frame.data(), frame.size())) return false;
                if (ends_stream(e)) {
                  sink.done();
                  return true;
                }
              }
              if (!batch.empty()) {
                last_write = std::chrono::steady_clock::now();
                return true;
              }
              if (!sink.is_writable()) return false;
              if (std::chrono::steady_clock::now() - last_write > std::chrono::seconds(15)) {
                static constexpr std::string_view kHeartbeat = ": keep-alive\n\n";
                if (!sink.write(kHeartbeat.data(), kHeartbeat.size())) return false;
                last_write = std::chrono::steady_clock::now();
              }
            }
            return false;
          },
          [&manager, token](bool) { manager.unsubscribe(token); });
    });
  });

  srv.Get("/api/models", [this](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      ojson list = ojson::array();
      const auto& manifest = manager_.registry().manifest();
      for (const auto& spec : manager_.registry().list()) {
        ojson m = {{"id", spec.model_id}, {"tier", engines::to_string(spec.tier)}, {"installed", spec.installed}};
        if (const auto* entry = manifest.find(spec.model_id)) {
          m["size"] = entry->size_bytes;
          m["description"] = entry->description;
        }
        list.push_back(std::move(m));
      }
      send_json(res, {{"models", list}});
    });
  });
}

}  // namespace atrain::http
