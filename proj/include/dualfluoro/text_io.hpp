#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dualfluoro::text {

/// One non-blank, non-comment line of a whitespace-separated table.
struct Row {
  int line_number = 0;
  std::vector<std::string> fields;

  double number(std::size_t i) const;
  long integer(std::size_t i) const;
};

/// Splits `content` into rows; '#' starts a comment that runs to end of line.
std::vector<Row> parse_rows(std::string_view content);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
std::vector<std::uint8_t> read_binary(const std::filesystem::path& path);

/// Round-trip exact decimal representation of a double.
std::string format_double(double v);

/// FNV-1a, 64 bit. Used to stamp outputs with the hash of their config.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace dualfluoro::text
