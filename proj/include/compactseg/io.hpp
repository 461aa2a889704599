#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace compactseg {

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

std::uint64_t fnv1a64(std::span<const std::byte> bytes, std::uint64_t hash = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text);
// Digest of a whole file, hex formatted.
std::string file_digest(const std::filesystem::path& path);
std::string to_hex(std::uint64_t value);

}  // namespace compactseg

namespace compactseg {

// Shortest-safe round-trip text for a double ("%.17g"); empty for nullopt-style NaN.
std::string format_double(double value);

}  // namespace compactseg
