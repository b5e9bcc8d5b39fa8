#include "dualfluoro/registration.hpp"

#include <cmath>
#include <future>

#include <fmt/format.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro {

std::vector<int> common_visible(const PredictedLandmarks& pred, const DualFluoroSystem& system) {
  std::vector<int> out;
  const auto n = std::min(pred.views[0].size(), pred.views[1].size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = pred.views[0][i];
    const auto& b = pred.views[1][i];
    if (a.visible && b.visible && is_visible(system.f1(), a.uv) && is_visible(system.f2(), b.uv))
      out.push_back(static_cast<int>(i));
  }
  return out;
}

PredictedLandmarks synthesize_predictions(const LandmarkSet3D& landmarks, const RigidPose& pose,
                                          const DualFluoroSystem& system) {
  PredictedLandmarks pred;
  for (int v = 0; v < 2; ++v) {
    for (const Vec3& p : landmarks.points()) {
      PredictedEntry e;
      try {
        e.uv = project_point(system.view(v), pose.apply(p)).uv;
        e.visible = is_visible(system.view(v), e.uv);
      } catch (const Error& err) {
        if (err.code() != ErrorCode::DegenerateRay) throw;
      }
      pred.views[static_cast<std::size_t>(v)].push_back(e);
    }
  }
  return pred;
}

std::string_view to_string(MirrorVariant v) {
  switch (v) {
    case MirrorVariant::None: return "none";
    case MirrorVariant::F1Mirrored: return "f1-mirrored";
    case MirrorVariant::F2Mirrored: return "f2-mirrored";
    case MirrorVariant::BothMirrored: return "both-mirrored";
  }
  return "none";
}

MirrorVariant mirror_variant_from_string(std::string_view s) {
  for (auto v : kMirrorVariants)
    if (to_string(v) == s) return v;
  throw Error(ErrorCode::Parse, fmt::format("unknown mirror variant '{}'", s));
}

PredictedLandmarks mirror_landmarks(const PredictedLandmarks& pred, const std::vector<std::pair<int, int>>& pairs,
                                    MirrorVariant variant) {
  PredictedLandmarks out = pred;
  const bool mirror[2] = {variant == MirrorVariant::F1Mirrored || variant == MirrorVariant::BothMirrored,
                          variant == MirrorVariant::F2Mirrored || variant == MirrorVariant::BothMirrored};
  for (std::size_t v = 0; v < 2; ++v) {
    if (!mirror[v]) continue;
    auto& entries = out.views[v];
    for (const auto& [a, b] : pairs) {
      if (a < 0 || b < 0 || static_cast<std::size_t>(std::max(a, b)) >= entries.size())
        throw Error(ErrorCode::InvalidArgument, fmt::format("pair ({}, {}) out of range", a + 1, b + 1));
      std::swap(entries[static_cast<std::size_t>(a)], entries[static_cast<std::size_t>(b)]);
    }
  }
  return out;
}

TriangulationObjective::TriangulationObjective(const LandmarkSet3D& landmarks, const PredictedLandmarks& pred,
                                               const DualFluoroSystem& system)
    : system_(&system), used_(common_visible(pred, system)) {
  if (pred.size() != landmarks.size() || pred.views[1].size() != pred.views[0].size())
    throw Error(ErrorCode::LengthMismatch, "predictions do not match the landmark set");
  if (static_cast<int>(used_.size()) < kMinCommonLandmarks)
    throw Error(ErrorCode::TooFewLandmarks,
                fmt::format("{} landmarks visible in both views, need {}", used_.size(), kMinCommonLandmarks));
  for (int i : used_) {
    model_.push_back(landmarks.point(i));
    for (std::size_t v = 0; v < 2; ++v) {
      const Vec2& uv = pred.views[v][static_cast<std::size_t>(i)].uv;
      targets_uv_[v].push_back(uv);
      targets_[v].push_back(system.view(static_cast<int>(v)).plane_point(uv));
    }
  }
}

double TriangulationObjective::operator()(const RigidPose& pose) const {
  const Mat3 r = pose.rotation();
  double total = 0.0;
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& geom = system_->view(static_cast<int>(v));
    double sq = 0.0;
    for (std::size_t i = 0; i < model_.size(); ++i) {
      try {
        sq += (targets_[v][i] - project_point(geom, r * model_[i] + pose.tau).landing).squaredNorm();
      } catch (const Error&) {
        return kDegeneratePenalty;
      }
    }
    total += std::sqrt(sq);
  }
  return total;
}

Vector TriangulationObjective::residual_vector(const RigidPose& pose) const {
  const Mat3 r = pose.rotation();
  Vector out(static_cast<Eigen::Index>(model_.size() * 4));
  Eigen::Index k = 0;
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& geom = system_->view(static_cast<int>(v));
    for (std::size_t i = 0; i < model_.size(); ++i) {
      try {
        const Vec2 d = project_point(geom, r * model_[i] + pose.tau).uv - targets_uv_[v][i];
        out[k++] = d.x();
        out[k++] = d.y();
      } catch (const Error&) {
        out[k++] = kDegeneratePenalty;
        out[k++] = kDegeneratePenalty;
      }
    }
  }
  return out;
}

std::array<std::vector<double>, 2> TriangulationObjective::distances(const RigidPose& pose) const {
  std::array<std::vector<double>, 2> out;
  for (std::size_t v = 0; v < 2; ++v) {
    const auto& geom = system_->view(static_cast<int>(v));
    for (std::size_t i = 0; i < model_.size(); ++i) {
      try {
        out[v].push_back((targets_[v][i] - project_point(geom, pose.apply(model_[i])).landing).norm());
      } catch (const Error&) {
        out[v].push_back(kDegeneratePenalty);
      }
    }
  }
  return out;
}

double objective_mu(const RigidPose& pose, const LandmarkSet3D& landmarks, const PredictedLandmarks& pred,
                    const DualFluoroSystem& system) {
  return TriangulationObjective(landmarks, pred, system)(pose);
}

namespace {

Vector to_vector(const RigidPose& p) {
  Vector x(6);
  x << p.theta, p.tau;
  return x;
}

RigidPose from_vector(const Vector& x) { return RigidPose{x.head<3>(), x.tail<3>()}; }

}  // namespace

PoseOptimum optimize_pose(const std::function<double(const RigidPose&)>& objective, const RigidPose& init,
                          const PoseSearchOptions& options) {
  NelderMeadOptions nm;
  nm.initial_step.resize(6);
  nm.initial_step << Vec3::Constant(options.angle_step_deg), Vec3::Constant(options.translation_step_mm);
  nm.x_tolerance = options.x_tolerance;
  nm.f_tolerance = options.f_tolerance;
  nm.max_iterations = options.max_iterations;
  nm.max_restarts = options.max_restarts;
  const auto res = nelder_mead([&](const Vector& x) { return objective(from_vector(x)); }, to_vector(init), nm);
  PoseOptimum out;
  out.pose = from_vector(res.x).normalized();
  out.value = res.value;
  out.iterations = res.iterations;
  out.improvements = res.improvements;
  out.converged = res.converged;
  return out;
}

RegistrationResult register_pose(const LandmarkSet3D& landmarks, const PredictedLandmarks& pred,
                                 const DualFluoroSystem& system, const PoseSearchOptions& options) {
  const RigidPose init{Vec3::Zero(), system_center(system)};
  std::array<PredictedLandmarks, 4> variants_pred;
  std::array<std::future<PoseOptimum>, 4> runs;
  for (std::size_t k = 0; k < 4; ++k) {
    variants_pred[k] = mirror_landmarks(pred, landmarks.symmetric_pairs(), kMirrorVariants[k]);
    // Validate up front so TooFewLandmarks surfaces from this thread.
    TriangulationObjective probe(landmarks, variants_pred[k], system);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    runs[k] = std::async(std::launch::async, [&, k] {
      const TriangulationObjective objective(landmarks, variants_pred[k], system);
      return optimize_pose(std::cref(objective), init, options);
    });
  }
  RegistrationResult result;
  std::size_t best = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    result.variants[k] = {kMirrorVariants[k], runs[k].get()};
    if (result.variants[k].optimum.value < result.variants[best].optimum.value) best = k;
  }
  const PoseOptimum& win = result.variants[best].optimum;
  result.pose = win.pose;
  result.objective_value = win.value;
  result.variant = kMirrorVariants[best];
  result.iterations = win.iterations;
  result.converged = win.converged;

  const TriangulationObjective objective(landmarks, variants_pred[best], system);
  result.n_vis = static_cast<int>(objective.used().size());
  const auto dist = objective.distances(win.pose);
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t i = 0; i < objective.used().size(); ++i) result.residuals[v].push_back({objective.used()[i], dist[v][i]});
  return result;
}

PoseOptimum refine_pose_lm(const LandmarkSet3D& landmarks, const PredictedLandmarks& pred,
                           const DualFluoroSystem& system, const RigidPose& init) {
  const TriangulationObjective objective(landmarks, pred, system);
  LevenbergMarquardtOptions opts;
  opts.max_iterations = 500;
  const auto res = levenberg_marquardt([&](const Vector& x) { return objective.residual_vector(from_vector(x)); },
                                       to_vector(init), opts);
  PoseOptimum out;
  out.pose = from_vector(res.x).normalized();
  out.value = objective(out.pose);
  out.iterations = res.iterations;
  out.converged = res.converged;
  return out;
}

std::vector<PredictedEntry> parse_prediction_view(std::string_view content, int landmark_count) {
  std::vector<PredictedEntry> view(static_cast<std::size_t>(landmark_count));
  std::vector<bool> seen(view.size(), false);
  for (const auto& row : text::parse_rows(content)) {
    if (row.fields.size() != 4)
      throw Error(ErrorCode::Parse, fmt::format("line {}: expected 'index u v visible'", row.line_number));
    const long idx = row.integer(0);
    if (idx < 1 || idx > landmark_count)
      throw Error(ErrorCode::Parse, fmt::format("line {}: landmark index {} out of range", row.line_number, idx));
    if (seen[static_cast<std::size_t>(idx - 1)])
      throw Error(ErrorCode::Parse, fmt::format("line {}: duplicate landmark {}", row.line_number, idx));
    seen[static_cast<std::size_t>(idx - 1)] = true;
    view[static_cast<std::size_t>(idx - 1)] = {Vec2(row.number(1), row.number(2)), row.integer(3) != 0};
  }
  return view;
}

std::string format_prediction_view(const std::vector<PredictedEntry>& view, const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "# index u_mm v_mm visible\n";
  for (std::size_t i = 0; i < view.size(); ++i)
    out += fmt::format("{} {} {} {}\n", i + 1, view[i].uv.x(), view[i].uv.y(), view[i].visible ? 1 : 0);
  return out;
}

}  // namespace dualfluoro
