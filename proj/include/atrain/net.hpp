#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace atrain::net {

struct NetworkAttempt {
  std::string operation;    // connect | resolve | sendto | download
  std::string destination;  // address, host name or URL

  bool operator==(const NetworkAttempt&) const = default;
};

struct NetworkReport {
  std::vector<NetworkAttempt> attempts;
  bool compliant() const noexcept { return attempts.empty(); }
};

// Denies outbound network operations made on the constructing thread while
// in scope and records each attempt. Covers in-house code (require_network)
// and any library that goes through libc connect/getaddrinfo/sendto for
// internet sockets; Unix-domain sockets stay allowed. Subprocess backends
// are not visible here and get offline_environment() instead.
class OfflineGuard {
 public:
  OfflineGuard();
  ~OfflineGuard();
  OfflineGuard(const OfflineGuard&) = delete;
  OfflineGuard& operator=(const OfflineGuard&) = delete;

  NetworkReport report() const;
  std::size_t attempt_count() const;

  // Throws NetworkAttemptDenied naming `stage` if attempts were recorded
  // after the first `since` ones.
  void raise_if_attempted_since(std::size_t since, std::string_view stage) const;

  void record(std::string operation, std::string destination);

  // Innermost guard active on this thread, or nullptr.
  static OfflineGuard* active() noexcept;

 private:
  mutable std::mutex mutex_;
  std::vector<NetworkAttempt> attempts_;
  OfflineGuard* previous_ = nullptr;
};

// Gate for code that intends to use the network. Records the attempt and
// throws NetworkAttemptDenied when a guard is active on this thread.
void require_network(std::string_view destination);

using DownloadProgress = std::function<void(std::uint64_t done, std::uint64_t total)>;

class Downloader {
 public:
  virtual ~Downloader() = default;
  // Writes the resource to `dest` (truncating). Throws DownloadFailed.
  virtual void download(const std::string& url, const std::filesystem::path& dest,
                        const DownloadProgress& progress) = 0;
};

// libcurl-backed; http(s) goes through require_network, file:// does not.
std::unique_ptr<Downloader> make_curl_downloader();

}  // namespace atrain::net
