#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace ordemo {

// Lowercase hex SHA-256 digests.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Whole-file helpers shared by the loaders and the CLI.
std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never see a
// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ordemo
