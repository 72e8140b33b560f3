#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace polyforge::detail {

std::string_view trim(std::string_view s) noexcept;
std::string ascii_lower(std::string_view s);

/// Splits on '\n', dropping one trailing '\r' per line.
std::vector<std::string_view> split_lines(std::string_view s);

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace polyforge::detail
