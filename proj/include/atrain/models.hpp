#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "atrain/engines.hpp"
#include "atrain/net.hpp"

namespace atrain::models {

struct ManifestEntry {
  std::string model_id;
  engines::ModelTier tier = engines::ModelTier::Tiny;
  std::string file;
  std::string url;
  // "<algorithm>:<lowercase hex>", algorithm sha1 or sha256.
  std::string checksum;
  // 0 = not checked.
  std::uint64_t size_bytes = 0;
  std::string description;
};

class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<ManifestEntry> entries);

  // {"models": [{"id", "tier", "file", "url", "checksum", "size", "description"}]}
  static Manifest parse(std::string_view json_text);
  static Manifest load(const std::filesystem::path& path);

  const std::vector<ManifestEntry>& entries() const noexcept { return entries_; }
  const ManifestEntry* find(std::string_view model_id) const noexcept;

 private:
  std::vector<ManifestEntry> entries_;
};

// Lowercase hex digest of a file; algorithm "sha1" or "sha256".
std::string file_digest(const std::filesystem::path& path, std::string_view algorithm);

// Local model store. A model counts as installed when its file exists and a
// checksum verification has succeeded for exactly that file (size + mtime
// recorded in a `.verified` stamp next to it, so large files are hashed once).
class ModelRegistry {
 public:
  ModelRegistry(Manifest manifest, std::filesystem::path model_dir);

  std::vector<engines::ModelSpec> list() const;
  // Throws InvalidConfig for ids missing from the manifest.
  engines::ModelSpec spec(std::string_view model_id) const;

  // Downloads, verifies and installs a model. No-op when already installed.
  // A download failing verification is deleted and ChecksumMismatch thrown.
  engines::ModelSpec prefetch(std::string_view model_id, net::Downloader& downloader,
                              const net::DownloadProgress& progress = {});

  const Manifest& manifest() const noexcept { return manifest_; }
  const std::filesystem::path& model_dir() const noexcept { return model_dir_; }

 private:
  const ManifestEntry& entry(std::string_view model_id) const;
  bool verify(const ManifestEntry& entry, const std::filesystem::path& file) const;

  Manifest manifest_;
  std::filesystem::path model_dir_;
};

}  // namespace atrain::models
