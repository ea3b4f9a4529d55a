#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace postural::io {

/// Whole-file read; `.gz` paths are inflated.
std::string read_file(const std::filesystem::path& path);

/// Write-temp-then-rename so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string gunzip(std::string_view compressed);

}  // namespace postural::io
