#pragma once

#include <filesystem>
#include <string>

namespace maple::util {

// Reads a whole file as bytes. Throws std::runtime_error on failure.
std::string read_file(const std::filesystem::path& path);

// Writes bytes, creating parent directories as needed.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace maple::util
