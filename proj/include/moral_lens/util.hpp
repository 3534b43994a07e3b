#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace moral_lens {

/// Whole-file read. Missing or unreadable files raise SchemaError.
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// half-written document. Parent directories are created as needed.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Shortest round-trip decimal representation ("0.1", "-3.63", "1e-12").
std::string format_number(double value);
/// Fixed-point rendering for display tables and SVG coordinates.
std::string format_fixed(double value, int decimals);

/// Maps an arbitrary id onto [A-Za-z0-9._-]; other bytes become '_'.
std::string sanitize_component(std::string_view text);

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First 8 bytes of the SHA-256 digest, big-endian.
std::uint64_t sha256_prefix64(std::string_view data);

std::string utc_timestamp();

}  // namespace moral_lens
