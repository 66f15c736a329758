#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace inrd {

std::string read_text_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: truncate + write, errors carry the path.
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// Non-empty lines of a JSON-lines file.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Shortest decimal that round-trips, "%.17g" style; used in CSV output.
std::string format_double(double v);

}  // namespace inrd
