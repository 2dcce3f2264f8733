#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace atrain::fsutil {

// Writes to a sibling temp file, fsyncs and renames over `path`, so readers
// see either the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

// Appends one line (LF added) and flushes it to disk.
void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace atrain::fsutil
