#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "atrain/error.hpp"
#include "atrain/jobs.hpp"

namespace httplib {
class Server;
}

namespace atrain::http {

struct ServerOptions {
  std::string host = "127.0.0.1";
  // 0 picks a free port.
  int port = 5514;
  // Served at "/" when set.
  std::filesystem::path static_dir;
  // Where uploads are staged before they move into a job directory.
  std::filesystem::path upload_dir;
};

// JSON API over a JobManager:
//   POST   /api/jobs                   multipart "file" + optional "config" (JSON)
//   GET    /api/jobs                   {"jobs": [...]}, newest first
//   GET    /api/jobs/{id}
//   GET    /api/jobs/{id}/events       text/event-stream, replay then live
//   GET    /api/jobs/{id}/files/{name}
//   DELETE /api/jobs/{id}
//   GET    /api/models
// Errors are {"error": {"code", "message"}}.
class Server {
 public:
  Server(jobs::JobManager& manager, ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and serves on a background thread. Returns the bound port.
  int start();
  void stop();
  int port() const noexcept { return port_; }

 private:
  void routes();

  jobs::JobManager& manager_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::shared_ptr<std::atomic<bool>> stopping_;
  int port_ = 0;
};

// HTTP status for an error code.
int status_for(ErrorCode code) noexcept;

}  // namespace atrain::http
