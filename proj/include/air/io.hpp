#pragma once

#include <filesystem>
#include <string>

namespace air {

std::string read_file(const std::filesystem::path& path);

// Writes `contents` to `path` via a temp file in the same directory and a
// rename, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// Shortest decimal text that parses back to the same value.
std::string format_float(double value);
std::string format_float(float value);

}  // namespace air
