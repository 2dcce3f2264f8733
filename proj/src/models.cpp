#include "atrain/models.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

#include "atrain/error.hpp"
#include "atrain/fsutil.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace atrain::models {
namespace {

std::string stamp_for(const ManifestEntry& entry, const fs::path& file) {
  std::error_code ec;
  const auto size = fs::file_size(file, ec);
  const auto mtime = fs::last_write_time(file, ec).time_since_epoch().count();
  return entry.checksum + " " + std::to_string(size) + " " + std::to_string(mtime);
}

fs::path stamp_path(const fs::path& file) { return file.string() + ".verified"; }

std::pair<std::string, std::string> split_checksum(const std::string& checksum) {
  auto colon = checksum.find(':');
  if (colon == std::string::npos) return {"sha256", checksum};
  return {checksum.substr(0, colon), checksum.substr(colon + 1)};
}

}  // namespace

Manifest::Manifest(std::vector<ManifestEntry> entries) : entries_(std::move(entries)) {}

Manifest Manifest::parse(std::string_view json_text) {
  std::vector<ManifestEntry> entries;
  try {
    const json doc = json::parse(json_text);
    for (const auto& m : doc.at("models")) {
      ManifestEntry e;
      e.model_id = m.at("id").get<std::string>();
      auto tier = engines::parse_model_tier(m.value("tier", e.model_id));
      if (!tier) throw Error(ErrorCode::InvalidConfig, "manifest: unknown tier for model " + e.model_id);
      e.tier = *tier;
      e.file = m.at("file").get<std::string>();
      e.url = m.value("url", std::string());
      e.checksum = m.at("checksum").get<std::string>();
      e.size_bytes = m.value("size", std::uint64_t{0});
      e.description = m.value("description", std::string());
      const auto algo = split_checksum(e.checksum).first;
      if (algo != "sha1" && algo != "sha256") {
        throw Error(ErrorCode::InvalidConfig, "manifest: unsupported checksum algorithm " + algo);
      }
      entries.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("malformed model manifest: ") + e.what());
  }
  return Manifest(std::move(entries));
}

Manifest Manifest::load(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw Error(ErrorCode::FileNotFound, "model manifest not found: " + path.string());
  return parse(fsutil::read_file(path));
}

const ManifestEntry* Manifest::find(std::string_view model_id) const noexcept {
  for (const auto& e : entries_) {
    if (e.model_id == model_id) return &e;
  }
  return nullptr;
}

std::string file_digest(const fs::path& path, std::string_view algorithm) {
  const EVP_MD* md = algorithm == "sha1" ? EVP_sha1() : algorithm == "sha256" ? EVP_sha256() : nullptr;
  if (md == nullptr) throw Error(ErrorCode::InvalidArgument, "unsupported digest " + std::string(algorithm));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());

  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), md, nullptr);
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

ModelRegistry::ModelRegistry(Manifest manifest, fs::path model_dir)
    : manifest_(std::move(manifest)), model_dir_(std::move(model_dir)) {}

const ManifestEntry& ModelRegistry::entry(std::string_view model_id) const {
  const auto* e = manifest_.find(model_id);
  if (e == nullptr) throw Error(ErrorCode::InvalidConfig, "unknown model '" + std::string(model_id) + "'");
  return *e;
}

bool ModelRegistry::verify(const ManifestEntry& e, const fs::path& file) const {
  std::error_code ec;
  if (!fs::is_regular_file(file, ec)) return false;
  if (e.size_bytes != 0 && fs::file_size(file, ec) != e.size_bytes) return false;
  const auto expected_stamp = stamp_for(e, file);
  if (fs::exists(stamp_path(file), ec)) {
    try {
      if (fsutil::read_file(stamp_path(file)) == expected_stamp) return true;
    } catch (const Error&) {
    }
  }
  const auto [algo, hex] = split_checksum(e.checksum);
  if (file_digest(file, algo) != hex) return false;
  try {
    fsutil::write_file_atomic(stamp_path(file), expected_stamp);
  } catch (const Error&) {
    // read-only model directory: verification simply repeats next time
  }
  return true;
}

engines::ModelSpec ModelRegistry::spec(std::string_view model_id) const {
  const auto& e = entry(model_id);
  engines::ModelSpec spec;
  spec.model_id = e.model_id;
  spec.tier = e.tier;
  const fs::path file = model_dir_ / e.file;
  std::error_code ec;
  if (fs::exists(file, ec)) spec.local_path = file;
  spec.installed = verify(e, file);
  return spec;
}

std::vector<engines::ModelSpec> ModelRegistry::list() const {
  std::vector<engines::ModelSpec> out;
  for (const auto& e : manifest_.entries()) out.push_back(spec(e.model_id));
  return out;
}

engines::ModelSpec ModelRegistry::prefetch(std::string_view model_id, net::Downloader& downloader,
                                           const net::DownloadProgress& progress) {
  auto current = spec(model_id);
  if (current.installed) return current;

  const auto& e = entry(model_id);
  if (e.url.empty()) throw Error(ErrorCode::DownloadFailed, "no download URL for model " + e.model_id);
  std::error_code ec;
  fs::create_directories(model_dir_, ec);
  const fs::path target = model_dir_ / e.file;
  const fs::path part = target.string() + ".part";
  try {
    downloader.download(e.url, part, progress);
  } catch (...) {
    fs::remove(part, ec);
    throw;
  }

  const auto [algo, hex] = split_checksum(e.checksum);
  const auto actual = file_digest(part, algo);
  if (actual != hex || (e.size_bytes != 0 && fs::file_size(part, ec) != e.size_bytes)) {
    fs::remove(part, ec);
    throw Error(ErrorCode::ChecksumMismatch,
                "checksum mismatch for model " + e.model_id + ": expected " + hex + ", got " + actual);
  }
  fs::rename(part, target);
  fsutil::write_file_atomic(stamp_path(target), stamp_for(e, target));
  return spec(model_id);
}

}  // namespace atrain::models
