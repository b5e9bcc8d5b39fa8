#include "dualfluoro/landmarks.hpp"

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro {

LandmarkSet3D::LandmarkSet3D(std::vector<std::string> names, std::vector<Vec3> points,
                             std::vector<std::pair<int, int>> symmetric_pairs)
    : names_(std::move(names)), points_(std::move(points)), pairs_(std::move(symmetric_pairs)) {
  if (names_.size() != points_.size())
    throw Error(ErrorCode::InvalidArgument, "landmark names and points differ in count");
  std::vector<bool> used(points_.size(), false);
  for (const auto& [a, b] : pairs_) {
    if (a < 0 || b < 0 || a >= size() || b >= size())
      throw Error(ErrorCode::InvalidArgument, fmt::format("pair ({}, {}) out of range", a + 1, b + 1));
    if (a == b) throw Error(ErrorCode::InvalidArgument, fmt::format("landmark {} paired with itself", a + 1));
    if (used[a] || used[b])
      throw Error(ErrorCode::InvalidArgument, fmt::format("pair ({}, {}) reuses a landmark", a + 1, b + 1));
    used[a] = used[b] = true;
  }
}

bool LandmarkSet3D::is_skull_configuration() const {
  return size() == kSkullLandmarkCount && static_cast<int>(pairs_.size()) == kSkullSymmetricPairs;
}

LandmarkSet3D parse_landmark_set(std::string_view content) {
  struct Entry {
    std::string name;
    Vec3 p;
    bool seen = false;
  };
  std::vector<Entry> entries;
  std::vector<std::pair<int, int>> pairs;
  for (const auto& row : text::parse_rows(content)) {
    const std::string& kind = row.fields[0];
    if (kind == "landmark") {
      if (row.fields.size() != 6)
        throw Error(ErrorCode::Parse, fmt::format("line {}: expected 'landmark i name x y z'", row.line_number));
      const long idx = row.integer(1);
      if (idx < 1) throw Error(ErrorCode::Parse, fmt::format("line {}: index must be >= 1", row.line_number));
      if (static_cast<std::size_t>(idx) > entries.size()) entries.resize(static_cast<std::size_t>(idx));
      Entry& e = entries[static_cast<std::size_t>(idx - 1)];
      if (e.seen) throw Error(ErrorCode::Parse, fmt::format("line {}: duplicate landmark {}", row.line_number, idx));
      e = {row.fields[2], Vec3(row.number(3), row.number(4), row.number(5)), true};
    } else if (kind == "pair") {
      if (row.fields.size() != 3)
        throw Error(ErrorCode::Parse, fmt::format("line {}: expected 'pair a b'", row.line_number));
      pairs.emplace_back(static_cast<int>(row.integer(1) - 1), static_cast<int>(row.integer(2) - 1));
    } else {
      throw Error(ErrorCode::Parse, fmt::format("line {}: unknown record '{}'", row.line_number, kind));
    }
  }
  std::vector<std::string> names;
  std::vector<Vec3> points;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (!entries[i].seen) throw Error(ErrorCode::Parse, fmt::format("landmark {} missing", i + 1));
    names.push_back(entries[i].name);
    points.push_back(entries[i].p);
  }
  try {
    return LandmarkSet3D(std::move(names), std::move(points), std::move(pairs));
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, e.what());
  }
}

LandmarkSet3D load_landmark_set(const std::filesystem::path& path) {
  return parse_landmark_set(text::read_file(path));
}

std::string format_landmark_set(const LandmarkSet3D& set) {
  std::string out = "# landmark <index> <name> <x mm> <y mm> <z mm>\n";
  for (int i = 0; i < set.size(); ++i) {
    const Vec3& p = set.point(i);
    out += fmt::format("landmark {} {} {} {} {}\n", i + 1, set.names()[static_cast<std::size_t>(i)], p.x(), p.y(), p.z());
  }
  for (const auto& [a, b] : set.symmetric_pairs()) out += fmt::format("pair {} {}\n", a + 1, b + 1);
  return out;
}

}  // namespace dualfluoro
