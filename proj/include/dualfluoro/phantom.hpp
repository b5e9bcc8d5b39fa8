#pragma once

#include <cstdint>
#include <vector>

#include "dualfluoro/geometry.hpp"
#include "dualfluoro/landmarks.hpp"
#include "dualfluoro/volume.hpp"

namespace dualfluoro::phantom {

/// Ellipsoidal skull shell with a soft-tissue interior and an off-midline
/// dense blob that breaks left/right symmetry. Shell voxels carry the skull
/// label. Cubic grid of n voxels per side at `spacing` mm, centered at the
/// model origin.
CtVolume skull_shell(int n = 64, double spacing = 3.0);

/// Sum of random Gaussian blobs; smooth at voxel scale. Unlabeled.
CtVolume smooth_random(int n, double spacing, std::uint64_t seed, int blobs = 24);

/// Solid ellipsoid (radii in mm) labeled as skull, unit intensity inside.
CtVolume labeled_ellipsoid(int n, double spacing, const Vec3& radii);

/// 33 landmarks on the skull shell: 13 left/right pairs mirrored across the
/// x = 0 plane, followed by 7 midline landmarks.
LandmarkSet3D skull_landmarks();

/// Point where both beam axes of `dual_system()` cross (mm, global frame).
Vec3 subject_center();

/// Two fluoroscopes whose beam axes cross at 60 degrees.
DualFluoroSystem dual_system();

/// Four non-coplanar beads in the alignment tool's own frame (mm).
std::vector<Vec3> alignment_tool_beads();

/// Square bead lattice of n x n beads at `pitch` mm, centered on the origin,
/// row-major from the most negative corner.
std::vector<Vec2> bead_plate(int n, double pitch);

/// Pincushion-like correction field (observed -> ideal, mm): a total-degree-5
/// polynomial in the coordinates scaled by `half_extent`.
Vec2 correction_field(const Vec2& observed, double half_extent = 150.0);

/// Inverse of correction_field by Newton iteration: where an ideal point is
/// observed on the intensifier.
Vec2 distort(const Vec2& ideal, double half_extent = 150.0);

}  // namespace dualfluoro::phantom
