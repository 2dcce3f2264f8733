#include "atrain/net.hpp"

#include <arpa/inet.h>
#include <curl/curl.h>
#include <dlfcn.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>

#include <cerrno>
#include <cstdio>

#include "atrain/error.hpp"

namespace atrain::net {
namespace {

thread_local OfflineGuard* t_active_guard = nullptr;

bool is_internet(const sockaddr* addr) {
  return addr != nullptr && (addr->sa_family == AF_INET || addr->sa_family == AF_INET6);
}

std::string describe(const sockaddr* addr) {
  char host[INET6_ADDRSTRLEN] = {};
  unsigned port = 0;
  if (addr->sa_family == AF_INET) {
    const auto* in = reinterpret_cast<const sockaddr_in*>(addr);
    ::inet_ntop(AF_INET, &in->sin_addr, host, sizeof host);
    port = ntohs(in->sin_port);
    return std::string(host) + ":" + std::to_string(port);
  }
  const auto* in6 = reinterpret_cast<const sockaddr_in6*>(addr);
  ::inet_ntop(AF_INET6, &in6->sin6_addr, host, sizeof host);
  port = ntohs(in6->sin6_port);
  return "[" + std::string(host) + "]:" + std::to_string(port);
}

bool is_numeric_host(const char* node) {
  in6_addr buf{};
  return ::inet_pton(AF_INET, node, &buf) == 1 || ::inet_pton(AF_INET6, node, &buf) == 1;
}

template <typename Fn>
Fn next_symbol(const char* name) {
  return reinterpret_cast<Fn>(::dlsym(RTLD_NEXT, name));
}

}  // namespace

OfflineGuard::OfflineGuard() : previous_(t_active_guard) { t_active_guard = this; }

OfflineGuard::~OfflineGuard() { t_active_guard = previous_; }

NetworkReport OfflineGuard::report() const {
  std::lock_guard lock(mutex_);
  return NetworkReport{attempts_};
}

std::size_t OfflineGuard::attempt_count() const {
  std::lock_guard lock(mutex_);
  return attempts_.size();
}

void OfflineGuard::raise_if_attempted_since(std::size_t since, std::string_view stage) const {
  std::lock_guard lock(mutex_);
  if (attempts_.size() <= since) return;
  const auto& first = attempts_[since];
  throw Error(ErrorCode::NetworkAttemptDenied,
              "network access denied during " + std::string(stage) + ": " + first.operation + " " +
                  first.destination + " (" + std::to_string(attempts_.size() - since) + " attempt(s))");
}

void OfflineGuard::record(std::string operation, std::string destination) {
  std::lock_guard lock(mutex_);
  attempts_.push_back({std::move(operation), std::move(destination)});
}

OfflineGuard* OfflineGuard::active() noexcept { return t_active_guard; }

void require_network(std::string_view destination) {
  if (auto* guard = OfflineGuard::active()) {
    guard->record("download", std::string(destination));
    throw Error(ErrorCode::NetworkAttemptDenied,
                "network access denied inside a transcription run: " + std::string(destination));
  }
}

namespace {

std::size_t write_to_file(char* data, std::size_t size, std::size_t n, void* user) {
  return std::fwrite(data, size, n, static_cast<std::FILE*>(user)) * size;
}

int on_progress(void* user, curl_off_t total, curl_off_t done, curl_off_t, curl_off_t) {
  const auto* progress = static_cast<const DownloadProgress*>(user);
  if (progress != nullptr && *progress) {
    (*progress)(static_cast<std::uint64_t>(done), static_cast<std::uint64_t>(total));
  }
  return 0;
}

class CurlDownloader final : public Downloader {
 public:
  CurlDownloader() { curl_global_init(CURL_GLOBAL_DEFAULT); }

  void download(const std::string& url, const std::filesystem::path& dest, const DownloadProgress& progress) override {
    if (!url.starts_with("file://")) require_network(url);

    std::FILE* out = std::fopen(dest.c_str(), "wb");
    if (out == nullptr) throw Error(ErrorCode::Io, "cannot write " + dest.string());
    CURL* curl = curl_easy_init();
    if (curl == nullptr) {
      std::fclose(out);
      throw Error(ErrorCode::DownloadFailed, "curl initialisation failed");
    }
    char errbuf[CURL_ERROR_SIZE] = {};
    curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
    curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_to_file);
    curl_easy_setopt(curl, CURLOPT_WRITEDATA, out);
    curl_easy_setopt(curl, CURLOPT_ERRORBUFFER, errbuf);
    curl_easy_setopt(curl, CURLOPT_NOPROGRESS, 0L);
    curl_easy_setopt(curl, CURLOPT_XFERINFOFUNCTION, on_progress);
    curl_easy_setopt(curl, CURLOPT_XFERINFODATA, &progress);
    const CURLcode rc = curl_easy_perform(curl);
    curl_easy_cleanup(curl);
    const bool flushed = std::fclose(out) == 0;
    if (rc != CURLE_OK) {
      throw Error(ErrorCode::DownloadFailed,
                  "download of " + url + " failed: " + (errbuf[0] != '\0' ? errbuf : curl_easy_strerror(rc)));
    }
    if (!flushed) throw Error(ErrorCode::Io, "short write to " + dest.string());
  }
};

}  // namespace

std::unique_ptr<Downloader> make_curl_downloader() { return std::make_unique<CurlDownloader>(); }

}  // namespace atrain::net

// libc interposition. Only threads inside an OfflineGuard scope are
// affected; everything else is forwarded to the next definition.

extern "C" int connect(int fd, const struct sockaddr* addr, socklen_t len) {
  using Fn = int (*)(int, const struct sockaddr*, socklen_t);
  static const Fn real = atrain::net::next_symbol<Fn>("connect");
  if (auto* guard = atrain::net::OfflineGuard::active(); guard != nullptr && atrain::net::is_internet(addr)) {
    guard->record("connect", atrain::net::describe(addr));
    errno = EACCES;
    return -1;
  }
  return real(fd, addr, len);
}

extern "C" ssize_t sendto(int fd, const void* buf, size_t n, int flags, const struct sockaddr* addr,
                          socklen_t len) {
  using Fn = ssize_t (*)(int, const void*, size_t, int, const struct sockaddr*, socklen_t);
  static const Fn real = atrain::net::next_symbol<Fn>("sendto");
  if (auto* guard = atrain::net::OfflineGuard::active(); guard != nullptr && atrain::net::is_internet(addr)) {
    guard->record("sendto", atrain::net::describe(addr));
    errno = EACCES;
    return -1;
  }
  return real(fd, buf, n, flags, addr, len);
}

extern "C" int getaddrinfo(const char* node, const char* service, const struct addrinfo* hints,
                           struct addrinfo** res) {
  using Fn = int (*)(const char*, const char*, const struct addrinfo*, struct addrinfo**);
  static const Fn real = atrain::net::next_symbol<Fn>("getaddrinfo");
  if (auto* guard = atrain::net::OfflineGuard::active();
      guard != nullptr && node != nullptr && !atrain::net::is_numeric_host(node)) {
    guard->record("resolve", std::string(node) + (service != nullptr ? std::string(":") + service : ""));
    return EAI_FAIL;
  }
  return real(node, service, hints, res);
}
