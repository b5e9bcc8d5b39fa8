#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "dualfluoro/geometry.hpp"

namespace dualfluoro {

/// Voxel grid of attenuation values. Voxel (i, j, k) has its center at
/// origin + (i*sx, j*sy, k*sz) in the model frame (mm); x varies fastest.
class CtVolume {
 public:
  CtVolume() = default;
  /// Throws InvalidArgument on non-positive spacing or buffer-size mismatch.
  /// Zero dims are allowed here and rejected by the renderer (EmptyVolume).
  CtVolume(std::array<int, 3> dims, Vec3 spacing, Vec3 origin, std::vector<float> intensities,
           std::optional<std::vector<std::uint8_t>> skull_label = std::nullopt);

  const std::array<int, 3>& dims() const { return dims_; }
  const Vec3& spacing() const { return spacing_; }
  const Vec3& origin() const { return origin_; }
  bool empty() const { return dims_[0] == 0 || dims_[1] == 0 || dims_[2] == 0; }
  std::size_t voxel_count() const;

  const std::vector<float>& intensities() const { return intensities_; }
  bool has_label() const { return label_.has_value(); }
  const std::vector<std::uint8_t>& label() const;

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims_[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * static_cast<std::size_t>(k));
  }
  float value(int i, int j, int k) const { return intensities_[index(i, j, k)]; }

  /// Trilinear interpolation at continuous voxel-index coordinates with
  /// zero outside the grid.
  double sample(const Vec3& ijk) const;
  /// Same for the 0/1 skull label.
  double sample_label(const Vec3& ijk) const;

  Vec3 to_index(const Vec3& model_mm) const { return (model_mm - origin_).cwiseQuotient(spacing_); }
  Vec3 to_model(const Vec3& ijk) const { return origin_ + ijk.cwiseProduct(spacing_); }
  /// Model-frame center of the voxel grid.
  Vec3 center() const;

 private:
  template <typename Fetch>
  double trilinear(const Vec3& ijk, Fetch fetch) const;

  std::array<int, 3> dims_{0, 0, 0};
  Vec3 spacing_ = Vec3::Ones();
  Vec3 origin_ = Vec3::Zero();
  std::vector<float> intensities_;
  std::optional<std::vector<std::uint8_t>> label_;
};

// Volume header (plain text; paths relative to the header file):
//
//   dims        <nx> <ny> <nz>
//   spacing     <sx> <sy> <sz>        mm per voxel
//   origin      <x> <y> <z>           mm, center of voxel (0,0,0)
//   voxel_type  int16 | uint16        little-endian raw samples
//   rescale     <slope> <intercept>   optional, value = slope*raw + intercept
//   data        <file.raw>
//   label       <file.raw>            optional, one byte per voxel, nonzero = skull
CtVolume load_volume(const std::filesystem::path& header_path);

/// Writes <stem>.hdr, <stem>.raw and (if labeled) <stem>_label.raw. Values are
/// stored as int16 with the given rescale slope.
void save_volume(const std::filesystem::path& header_path, const CtVolume& volume, double slope);

}  // namespace dualfluoro
