#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "dualfluoro/geometry.hpp"

namespace dualfluoro {

// System-definition file. One block per fluoroscope, F1 first; mm throughout.
//
//   fluoroscope F1
//   source      <x> <y> <z>
//   center      <x> <y> <z>
//   axis_u      <x> <y> <z>
//   axis_v      <x> <y> <z>
//   half_extent <half_width> <half_height>
//   pixel_pitch <mm per pixel>
//   fluoroscope F2
//   ...
//
// The loaded system is re-expressed in the F1-anchored global frame.
DualFluoroSystem parse_system(std::string_view content);
DualFluoroSystem load_system(const std::filesystem::path& path);
std::string format_system(const DualFluoroSystem& system);

// Pose file: "theta <x> <y> <z>" (degrees) and "tau <x> <y> <z>" (mm).
RigidPose parse_pose(std::string_view content);
RigidPose load_pose(const std::filesystem::path& path);
std::string format_pose(const RigidPose& pose);

}  // namespace dualfluoro
