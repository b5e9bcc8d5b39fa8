#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "dualfluoro/geometry.hpp"
#include "dualfluoro/landmarks.hpp"
#include "dualfluoro/optim.hpp"

namespace dualfluoro {

/// One predicted landmark on an intensifier: post-undistortion intensifier
/// coordinates in mm.
struct PredictedEntry {
  Vec2 uv = Vec2::Zero();
  bool visible = false;
};

/// Predicted landmarks on F1 (view 0) and F2 (view 1). Each view holds one
/// entry per landmark of the shared LandmarkSet3D, indexed identically.
struct PredictedLandmarks {
  std::array<std::vector<PredictedEntry>, 2> views;

  int size() const { return static_cast<int>(views[0].size()); }
};

/// Indices flagged visible in both views and inside both fields of view.
std::vector<int> common_visible(const PredictedLandmarks& pred, const DualFluoroSystem& system);

/// Exact projections of the posed model; entries outside a field of view (or
/// behind a source) are flagged invisible.
PredictedLandmarks synthesize_predictions(const LandmarkSet3D& landmarks, const RigidPose& pose,
                                          const DualFluoroSystem& system);

/// Mirror strategy rows: which views get their symmetric pairs exchanged.
enum class MirrorVariant { None = 0, F1Mirrored = 1, F2Mirrored = 2, BothMirrored = 3 };

inline constexpr std::array<MirrorVariant, 4> kMirrorVariants{MirrorVariant::None, MirrorVariant::F1Mirrored,
                                                              MirrorVariant::F2Mirrored, MirrorVariant::BothMirrored};

std::string_view to_string(MirrorVariant v);
MirrorVariant mirror_variant_from_string(std::string_view s);

/// Swaps the entries (coordinates and visibility) of every symmetric pair in
/// the views selected by `variant`.
PredictedLandmarks mirror_landmarks(const PredictedLandmarks& pred, const std::vector<std::pair<int, int>>& pairs,
                                    MirrorVariant variant);

inline constexpr int kMinCommonLandmarks = 3;
inline constexpr double kDegeneratePenalty = 1e6;

/// Sum over both views of the Frobenius norm of (predicted - projected)
/// intensifier points, over the commonly visible landmarks. Poses that put a
/// used landmark on a degenerate ray score kDegeneratePenalty.
/// Throws TooFewLandmarks when fewer than 3 landmarks are commonly visible.
double objective_mu(const RigidPose& pose, const LandmarkSet3D& landmarks, const PredictedLandmarks& pred,
                    const DualFluoroSystem& system);

/// Precomputed form of objective_mu for repeated evaluation.
class TriangulationObjective {
 public:
  TriangulationObjective(const LandmarkSet3D& landmarks, const PredictedLandmarks& pred, const DualFluoroSystem& system);

  double operator()(const RigidPose& pose) const;
  /// Per used landmark and view: in-plane (u, v) differences, mm. Degenerate
  /// poses yield kDegeneratePenalty entries.
  Vector residual_vector(const RigidPose& pose) const;
  /// Per view, distance (mm) of each used landmark's projection from its prediction.
  std::array<std::vector<double>, 2> distances(const RigidPose& pose) const;

  const std::vector<int>& used() const { return used_; }

 private:
  const DualFluoroSystem* system_;
  std::vector<int> used_;
  std::vector<Vec3> model_;
  std::array<std::vector<Vec3>, 2> targets_;
  std::array<std::vector<Vec2>, 2> targets_uv_;
};

struct PoseSearchOptions {
  double angle_step_deg = 5.0;
  double translation_step_mm = 20.0;
  double x_tolerance = 1e-6;
  double f_tolerance = 1e-9;
  int max_iterations = 50000;
  int max_restarts = 8;
};

struct PoseOptimum {
  RigidPose pose;
  double value = 0.0;
  int iterations = 0;
  int improvements = 0;
  bool converged = false;
};

/// Nelder-Mead over (theta, tau) starting at `init`.
PoseOptimum optimize_pose(const std::function<double(const RigidPose&)>& objective, const RigidPose& init,
                          const PoseSearchOptions& options = {});

struct LandmarkResidual {
  int index = 0;  // 0-based landmark index
  double distance_mm = 0.0;
};

struct VariantOutcome {
  MirrorVariant variant = MirrorVariant::None;
  PoseOptimum optimum;
};

struct RegistrationResult {
  RigidPose pose;
  double objective_value = 0.0;
  MirrorVariant variant = MirrorVariant::None;
  std::array<std::vector<LandmarkResidual>, 2> residuals;
  int iterations = 0;
  bool converged = false;
  int n_vis = 0;
  /// All four runs, in mirror-strategy order.
  std::array<VariantOutcome, 4> variants;
};

/// Runs the pose search once per mirror variant, each from theta = 0 and
/// tau = system_center(system), and keeps the lowest objective (ties go to
/// the earlier variant). Throws TooFewLandmarks.
RegistrationResult register_pose(const LandmarkSet3D& landmarks, const PredictedLandmarks& pred,
                                 const DualFluoroSystem& system, const PoseSearchOptions& options = {});

/// Squared-residual Levenberg-Marquardt refinement of a pose; cross-check
/// for the simplex search.
PoseOptimum refine_pose_lm(const LandmarkSet3D& landmarks, const PredictedLandmarks& pred,
                           const DualFluoroSystem& system, const RigidPose& init);

/// Prediction table for one view: "<index> <u_mm> <v_mm> <visible>", 1-based
/// index. Landmarks missing from the table are treated as invisible.
std::vector<PredictedEntry> parse_prediction_view(std::string_view content, int landmark_count);
std::string format_prediction_view(const std::vector<PredictedEntry>& view, const std::vector<std::string>& comments = {});

}  // namespace dualfluoro
