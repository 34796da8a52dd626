#pragma once

#include <filesystem>
#include <string_view>

namespace memalign {

/// Writes `contents` to a sibling temp file, then renames it over `path`.
void write_file_atomically(const std::filesystem::path& path, std::string_view contents);

}  // namespace memalign
