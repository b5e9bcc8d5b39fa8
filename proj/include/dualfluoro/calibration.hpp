#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dualfluoro/geometry.hpp"
#include "dualfluoro/image.hpp"
#include "dualfluoro/optim.hpp"

namespace dualfluoro {

// ---------------------------------------------------------------------------
// Bead detection

struct BeadDetectionOptions {
  double threshold = 128.0;
  int min_area = 3;
  int max_area = 400;
  /// Beads darker than the background (radiographs of steel beads).
  bool dark_beads = false;
};

/// Intensity-weighted centroids (1-based pixel coordinates) of 8-connected
/// components above threshold whose area passes the filter. With `ideal_px`
/// the result is ordered like `ideal_px` by nearest-ideal assignment and
/// fewer detections than ideals throws TooFewBeads; without it, centroids are
/// returned in raster order and `expected` sets the minimum count.
std::vector<Vec2> detect_beads(const Image& image, const BeadDetectionOptions& options,
                               const std::vector<Vec2>& ideal_px = {}, int expected = 1);

// ---------------------------------------------------------------------------
// Distortion correction

inline constexpr int kDistortionDegree = 5;
inline constexpr int kDistortionTerms = 21;  // (5 + 1)(5 + 2) / 2
inline constexpr int kDistortionFormatVersion = 1;

/// Ideal plate bead positions and their observed (distorted) positions, mm.
/// Correspondence is by position in the vectors.
struct BeadGrid {
  std::vector<Vec2> ideal;
  std::vector<Vec2> observed;

  /// Throws LengthMismatch / WrongCount (fewer than 21 beads).
  void validate() const;
};

/// Bivariate monomials x^i y^j with i + j <= 5, ordered by total degree and
/// then by descending power of x: 1, x, y, x^2, xy, y^2, x^3, ...
std::array<double, kDistortionTerms> distortion_basis(const Vec2& normalized);

/// Observed -> ideal mapping: each output coordinate is a degree-5 polynomial
/// in inputs normalized to [-1, 1]^2 over the observed bead bounding box.
class DistortionModel {
 public:
  static DistortionModel identity();

  Vec2 normalize(const Vec2& observed) const { return (observed - center_).cwiseQuotient(half_range_); }
  Vec2 apply(const Vec2& observed) const;
  /// Inside the convex hull of the observed beads expanded by 5% about its
  /// centroid. A model without a hull has no region limit.
  bool in_calibrated_region(const Vec2& observed) const;

  const Vec2& center() const { return center_; }
  const Vec2& half_range() const { return half_range_; }
  const std::array<Vector, 2>& coefficients() const { return coef_; }
  const std::vector<Vec2>& region() const { return hull_; }
  double rms_residual() const { return rms_; }

 private:
  friend DistortionModel fit_distortion(const BeadGrid& grid);
  friend DistortionModel parse_distortion_model(std::string_view content);

  Vec2 center_ = Vec2::Zero();
  Vec2 half_range_ = Vec2::Ones();
  std::array<Vector, 2> coef_;
  std::vector<Vec2> hull_;
  double rms_ = 0.0;
};

/// Least-squares fit over the degree-5 basis. Throws RankDeficient when the
/// design matrix loses rank (e.g. collinear beads).
DistortionModel fit_distortion(const BeadGrid& grid);

struct UndistortedPoint {
  Vec2 point;
  bool extrapolated = false;
};

std::vector<UndistortedPoint> undistort_points(const DistortionModel& model, const std::vector<Vec2>& points);

/// Versioned text file: header, normalization, 2 x 21 coefficients, fit RMS
/// and the calibrated region polygon.
std::string format_distortion_model(const DistortionModel& model, const std::vector<std::string>& comments = {});
DistortionModel parse_distortion_model(std::string_view content);

/// Bead table "<index> <u> <v>", 1-based consecutive indices.
std::vector<Vec2> parse_bead_table(std::string_view content);
std::string format_bead_table(const std::vector<Vec2>& beads, const std::vector<std::string>& comments = {});

/// Convex hull (counter-clockwise, no repeated end point).
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

// ---------------------------------------------------------------------------
// Dual-fluoroscope pose calibration

/// Four beads in the tool frame (mm) and their observed intensifier
/// coordinates (mm) on F1 and F2.
struct AlignmentTool {
  std::vector<Vec3> beads;
  std::array<std::vector<Vec2>, 2> observed;

  /// Throws WrongCount unless there are four beads seen in both views, and
  /// InvalidArgument when the beads are coplanar.
  void validate() const;
};

struct DualPoseCalibration {
  DualFluoroSystem system;
  /// F2 intensifier frame in the global frame (see intensifier_pose).
  RigidPose f2_pose;
  /// Tool frame -> global frame.
  RigidPose tool_pose;
  /// Root mean square 2D reprojection error over the 8 bead observations, mm.
  double rms_mm = 0.0;
  /// Per view, per bead reprojection distance, mm.
  std::array<std::vector<double>, 2> bead_residuals;
  int iterations = 0;
  bool converged = false;
  std::vector<double> cost_history;
};

/// Jointly refines F2's rigid pose (F1 fixed as the global frame, F2's
/// source-to-intensifier geometry held) and the tool pose by least squares on
/// the 16 reprojection residuals. Without `tool_init` the tool starts at the
/// closest approach of the two beam axes, trying a set of orientations.
/// Throws NonConvergence if the iteration budget runs out without lowering
/// the residual.
DualPoseCalibration calibrate_dual_pose(const AlignmentTool& tool, const DualFluoroSystem& initial,
                                        const std::optional<RigidPose>& tool_init = std::nullopt);

/// Projections of the tool beads posed by `tool_pose` in `system`.
std::array<std::vector<Vec2>, 2> project_tool(const std::vector<Vec3>& beads, const RigidPose& tool_pose,
                                              const DualFluoroSystem& system);

/// Tool file:
///   bead <index> <x> <y> <z>          tool frame, mm
///   f1 <index> <u> <v>                observed, mm
///   f2 <index> <u> <v>
///   tool_theta <x> <y> <z>            optional initial tool pose
///   tool_tau <x> <y> <z>
struct ToolFile {
  AlignmentTool tool;
  std::optional<RigidPose> tool_init;
};
ToolFile parse_tool_file(std::string_view content);
std::string format_tool_file(const ToolFile& file);

}  // namespace dualfluoro
