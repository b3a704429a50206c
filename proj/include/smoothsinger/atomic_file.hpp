#pragma once

#include <filesystem>
#include <string_view>

namespace smoothsinger {

// Writes `bytes` to a sibling temporary file and renames it over `path`, so
// readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

}  // namespace smoothsinger
