#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace polyforge {

/// Lowercase hex SHA-256 of `data`. Used for cache fingerprints, session ids
/// and run-manifest digests so all of them share one stable hash.
std::string sha256_hex(std::string_view data);

/// SHA-256 of a file's bytes; throws Error(kIo) when unreadable.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace polyforge
