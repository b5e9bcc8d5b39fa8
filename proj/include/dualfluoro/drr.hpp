#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dualfluoro/geometry.hpp"
#include "dualfluoro/image.hpp"
#include "dualfluoro/landmarks.hpp"
#include "dualfluoro/volume.hpp"

namespace dualfluoro {

/// Parallel-beam rendering setup. `view` maps model-frame points into the
/// rendering frame; rays run along the rendering frame's z axis and the
/// image plane is its x-y plane, with the plane origin at the image center.
struct RenderParams {
  RigidPose view;
  int width = 128;
  int height = 128;
  /// Line integrals (attenuation x mm) mapped linearly onto [0, 255], clamped.
  double window_lo = 0.0;
  double window_hi = 1.0;
  /// mm per output pixel on the rendering plane.
  double scale = 1.0;

  /// Throws InvalidArgument on non-positive size/scale or lo >= hi.
  void validate() const;
};

struct Landmark2D {
  Vec2 px;  // 1-based pixel-center coordinates
  bool visible = false;
};

struct Drr {
  Image image;                          // [0, 255]
  std::vector<Landmark2D> landmarks2d;  // empty unless landmarks were supplied
  std::optional<Image> mask;            // 0/1, present when the volume is labeled
};

/// Unwindowed line integrals via shear-warp factorization: the principal
/// viewing axis is chosen in voxel-index space, slices are resampled
/// bilinearly into a sheared intermediate image on the base plane, and the
/// intermediate image is warped bilinearly onto the output grid.
/// Throws EmptyVolume if any dimension is zero.
Image integrate_shear_warp(const CtVolume& volume, const RenderParams& params);

/// Unwindowed line integrals by direct trilinear sampling along each ray at
/// quarter-voxel steps. Reference implementation for testing; slow.
Image integrate_brute_force(const CtVolume& volume, const RenderParams& params);

/// Linear window onto [0, 255] with clamping.
Image apply_window(const Image& integrals, double lo, double hi);

/// Shear-warp DRR; the mask is rendered too when the volume carries a label.
Drr render_drr(const CtVolume& volume, const RenderParams& params);
/// As above, plus co-projected landmarks.
Drr render_drr(const CtVolume& volume, const LandmarkSet3D& landmarks, const RenderParams& params);

/// Windowed brute-force image; testing oracle for render_drr.
Image brute_force_raycast(const CtVolume& volume, const RenderParams& params);

/// Orthographic projection of the posed landmarks into 1-based pixel
/// coordinates; landmarks outside [1, w] x [1, h] are flagged invisible.
std::vector<Landmark2D> project_landmarks_parallel(const LandmarkSet3D& landmarks, const RenderParams& params);

/// Binary skull mask: a pixel is set iff its ray meets the labeled region,
/// taken as the set where the trilinearly interpolated label is >= 0.5.
/// Rendered with the same shear-warp factorization using max compositing.
/// Throws MissingLabel when the volume has no label.
Image render_mask(const CtVolume& volume, const RenderParams& params);

/// Landmark table: "<index> <u_px> <v_px> <visible>" with 1-based index.
std::string format_landmarks_2d(const std::vector<Landmark2D>& landmarks, const std::vector<std::string>& comments = {});
std::vector<Landmark2D> parse_landmarks_2d(std::string_view content);

}  // namespace dualfluoro
