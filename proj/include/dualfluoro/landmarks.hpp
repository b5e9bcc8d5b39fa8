#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dualfluoro/geometry.hpp"

namespace dualfluoro {

inline constexpr int kSkullLandmarkCount = 33;
inline constexpr int kSkullSymmetricPairs = 13;

/// Named model-frame landmarks (mm) and the left/right symmetric pairs among
/// them. Indices are 0-based in code and 1-based in files.
class LandmarkSet3D {
 public:
  LandmarkSet3D() = default;
  /// Throws InvalidArgument if a pair index is out of range, pairs a point
  /// with itself, or reuses an index in more than one pair.
  LandmarkSet3D(std::vector<std::string> names, std::vector<Vec3> points,
                std::vector<std::pair<int, int>> symmetric_pairs);

  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<Vec3>& points() const { return points_; }
  const Vec3& point(int i) const { return points_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<std::pair<int, int>>& symmetric_pairs() const { return pairs_; }

  /// True for the 33-landmark / 13-pair skull configuration.
  bool is_skull_configuration() const;

 private:
  std::vector<std::string> names_;
  std::vector<Vec3> points_;
  std::vector<std::pair<int, int>> pairs_;
};

/// Text format:
///   landmark <index> <name> <x> <y> <z>
///   pair <index_a> <index_b>
/// Indices are 1-based and must cover 1..n exactly once.
LandmarkSet3D parse_landmark_set(std::string_view content);
LandmarkSet3D load_landmark_set(const std::filesystem::path& path);
std::string format_landmark_set(const LandmarkSet3D& set);

}  // namespace dualfluoro
