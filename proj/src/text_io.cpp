#include "dualfluoro/text_io.hpp"

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"

namespace dualfluoro::text {

namespace {

Error parse_error(const Row& row, std::size_t i, std::string_view what) {
  return Error(ErrorCode::Parse, fmt::format("line {}: field {} {}", row.line_number, i + 1, what));
}

}  // namespace

double Row::number(std::size_t i) const {
  if (i >= fields.size()) throw parse_error(*this, i, "missing");
  const std::string& s = fields[i];
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw parse_error(*this, i, "is not a number: " + s);
  return v;
}

long Row::integer(std::size_t i) const {
  if (i >= fields.size()) throw parse_error(*this, i, "missing");
  const std::string& s = fields[i];
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw parse_error(*this, i, "is not an integer: " + s);
  return v;
}

std::vector<Row> parse_rows(std::string_view content) {
  std::vector<Row> rows;
  int line_number = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    std::size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    ++line_number;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::istringstream in{std::string(line)};
    Row row;
    row.line_number = line_number;
    for (std::string tok; in >> tok;) row.fields.push_back(tok);
    if (!row.fields.empty()) rows.push_back(std::move(row));
    pos = end + 1;
  }
  return rows;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

std::vector<std::uint8_t> read_binary(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  return {s.begin(), s.end()};
}

std::string format_double(double v) { return fmt::format("{}", v); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace dualfluoro::text
