#include "dualfluoro/system_io.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro {

namespace {

Vec3 vec3_of(const text::Row& row) {
  if (row.fields.size() != 4)
    throw Error(ErrorCode::Parse, fmt::format("line {}: expected '{} x y z'", row.line_number, row.fields[0]));
  return {row.number(1), row.number(2), row.number(3)};
}

struct Block {
  std::map<std::string, text::Row> rows;
  int line_number = 0;
};

FluoroscopeGeometry geometry_of(const Block& block, std::string_view name) {
  auto need = [&](const std::string& key) -> const text::Row& {
    auto it = block.rows.find(key);
    if (it == block.rows.end())
      throw Error(ErrorCode::Parse, fmt::format("fluoroscope {}: missing '{}'", name, key));
    return it->second;
  };
  const text::Row& extent = need("half_extent");
  if (extent.fields.size() != 3)
    throw Error(ErrorCode::Parse, fmt::format("line {}: expected 'half_extent w h'", extent.line_number));
  const text::Row& pitch = need("pixel_pitch");
  if (pitch.fields.size() != 2)
    throw Error(ErrorCode::Parse, fmt::format("line {}: expected 'pixel_pitch p'", pitch.line_number));
  try {
    return FluoroscopeGeometry(vec3_of(need("source")), vec3_of(need("center")), vec3_of(need("axis_u")),
                               vec3_of(need("axis_v")), extent.number(1), extent.number(2), pitch.number(1));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Parse) throw;
    throw Error(ErrorCode::Parse, fmt::format("fluoroscope {}: {}", name, e.what()));
  }
}

std::string vec_line(std::string_view key, const Vec3& v) {
  return fmt::format("{:<11} {} {} {}\n", key, v.x(), v.y(), v.z());
}

}  // namespace

DualFluoroSystem parse_system(std::string_view content) {
  std::map<std::string, Block> blocks;
  Block* current = nullptr;
  for (const auto& row : text::parse_rows(content)) {
    const std::string& key = row.fields[0];
    if (key == "fluoroscope") {
      if (row.fields.size() != 2 || (row.fields[1] != "F1" && row.fields[1] != "F2"))
        throw Error(ErrorCode::Parse, fmt::format("line {}: expected 'fluoroscope F1|F2'", row.line_number));
      if (blocks.count(row.fields[1]))
        throw Error(ErrorCode::Parse, fmt::format("line {}: duplicate {}", row.line_number, row.fields[1]));
      current = &blocks[row.fields[1]];
      current->line_number = row.line_number;
      continue;
    }
    if (!current) throw Error(ErrorCode::Parse, fmt::format("line {}: '{}' outside a fluoroscope block", row.line_number, key));
    static const std::array<std::string_view, 6> keys{"source", "center", "axis_u", "axis_v", "half_extent", "pixel_pitch"};
    if (std::find(keys.begin(), keys.end(), key) == keys.end())
      throw Error(ErrorCode::Parse, fmt::format("line {}: unknown key '{}'", row.line_number, key));
    if (!current->rows.emplace(key, row).second)
      throw Error(ErrorCode::Parse, fmt::format("line {}: duplicate key '{}'", row.line_number, key));
  }
  if (!blocks.count("F1") || !blocks.count("F2")) throw Error(ErrorCode::Parse, "system needs fluoroscopes F1 and F2");
  return DualFluoroSystem(geometry_of(blocks["F1"], "F1"), geometry_of(blocks["F2"], "F2"));
}

DualFluoroSystem load_system(const std::filesystem::path& path) { return parse_system(text::read_file(path)); }

std::string format_system(const DualFluoroSystem& system) {
  std::string out;
  for (int i = 0; i < 2; ++i) {
    const FluoroscopeGeometry& g = system.view(i);
    out += fmt::format("fluoroscope F{}\n", i + 1);
    out += vec_line("source", g.source());
    out += vec_line("center", g.intensifier_center());
    out += vec_line("axis_u", g.axis_u());
    out += vec_line("axis_v", g.axis_v());
    out += fmt::format("{:<11} {} {}\n", "half_extent", g.half_width(), g.half_height());
    out += fmt::format("{:<11} {}\n", "pixel_pitch", g.pixel_pitch());
  }
  return out;
}

RigidPose parse_pose(std::string_view content) {
  std::optional<Vec3> theta, tau;
  for (const auto& row : text::parse_rows(content)) {
    if (row.fields[0] == "theta" && !theta) {
      theta = vec3_of(row);
    } else if (row.fields[0] == "tau" && !tau) {
      tau = vec3_of(row);
    } else {
      throw Error(ErrorCode::Parse, fmt::format("line {}: unexpected '{}'", row.line_number, row.fields[0]));
    }
  }
  if (!theta || !tau) throw Error(ErrorCode::Parse, "pose needs 'theta' and 'tau'");
  return RigidPose{*theta, *tau};
}

RigidPose load_pose(const std::filesystem::path& path) { return parse_pose(text::read_file(path)); }

std::string format_pose(const RigidPose& pose) {
  return vec_line("theta", pose.theta) + vec_line("tau", pose.tau);
}

}  // namespace dualfluoro
