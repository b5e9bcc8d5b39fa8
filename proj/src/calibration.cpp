#include "dualfluoro/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/text_io.hpp"

namespace dualfluoro {

// ---------------------------------------------------------------------------
// Bead detection

std::vector<Vec2> detect_beads(const Image& image, const BeadDetectionOptions& options,
                               const std::vector<Vec2>& ideal_px, int expected) {
  const int w = image.width(), h = image.height();
  auto strength = [&](int c, int r) {
    const double v = options.dark_beads ? 255.0 - image.at(c, r) : image.at(c, r);
    return v - options.threshold;
  };
  std::vector<char> visited(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0);
  std::vector<Vec2> centroids;
  std::vector<std::pair<int, int>> stack;
  for (int r0 = 0; r0 < h; ++r0)
    for (int c0 = 0; c0 < w; ++c0) {
      const std::size_t i0 = static_cast<std::size_t>(r0) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c0);
      if (visited[i0] || strength(c0, r0) <= 0.0) continue;
      visited[i0] = 1;
      stack.assign(1, {c0, r0});
      int area = 0;
      double wsum = 0.0;
      Vec2 acc = Vec2::Zero();
      while (!stack.empty()) {
        const auto [c, r] = stack.back();
        stack.pop_back();
        const double s = strength(c, r);
        ++area;
        wsum += s;
        acc += s * Vec2(c + 1, r + 1);
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            const int cc = c + dc, rr = r + dr;
            if (cc < 0 || rr < 0 || cc >= w || rr >= h) continue;
            const std::size_t j = static_cast<std::size_t>(rr) * static_cast<std::size_t>(w) + static_cast<std::size_t>(cc);
            if (visited[j] || strength(cc, rr) <= 0.0) continue;
            visited[j] = 1;
            stack.emplace_back(cc, rr);
          }
      }
      if (area >= options.min_area && area <= options.max_area && wsum > 0.0) centroids.push_back(acc / wsum);
    }

  const int need = ideal_px.empty() ? expected : static_cast<int>(ideal_px.size());
  if (static_cast<int>(centroids.size()) < need)
    throw Error(ErrorCode::TooFewBeads, fmt::format("detected {} beads, expected {}", centroids.size(), need));
  if (ideal_px.empty()) {
    std::sort(centroids.begin(), centroids.end(), [](const Vec2& a, const Vec2& b) {
      return std::lround(a.y()) != std::lround(b.y()) ? a.y() < b.y() : a.x() < b.x();
    });
    return centroids;
  }
  // Greedy global nearest-pair assignment.
  struct Candidate {
    double d;
    std::size_t ideal, found;
  };
  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < ideal_px.size(); ++i)
    for (std::size_t j = 0; j < centroids.size(); ++j) cands.push_back({(ideal_px[i] - centroids[j]).squaredNorm(), i, j});
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    return a.d != b.d ? a.d < b.d : (a.ideal != b.ideal ? a.ideal < b.ideal : a.found < b.found);
  });
  std::vector<Vec2> ordered(ideal_px.size());
  std::vector<bool> ideal_done(ideal_px.size(), false), found_used(centroids.size(), false);
  std::size_t assigned = 0;
  for (const auto& c : cands) {
    if (ideal_done[c.ideal] || found_used[c.found]) continue;
    ordered[c.ideal] = centroids[c.found];
    ideal_done[c.ideal] = found_used[c.found] = true;
    if (++assigned == ideal_px.size()) break;
  }
  return ordered;
}

// ---------------------------------------------------------------------------
// Distortion correction

void BeadGrid::validate() const {
  if (ideal.size() != observed.size())
    throw Error(ErrorCode::LengthMismatch, fmt::format("{} ideal vs {} observed beads", ideal.size(), observed.size()));
  if (static_cast<int>(ideal.size()) < kDistortionTerms)
    throw Error(ErrorCode::WrongCount,
                fmt::format("{} beads; a degree-{} fit needs at least {}", ideal.size(), kDistortionDegree, kDistortionTerms));
}

std::array<double, kDistortionTerms> distortion_basis(const Vec2& n) {
  std::array<double, kDistortionTerms> out{};
  std::array<double, kDistortionDegree + 1> xp{}, yp{};
  xp[0] = yp[0] = 1.0;
  for (int k = 1; k <= kDistortionDegree; ++k) {
    xp[static_cast<std::size_t>(k)] = xp[static_cast<std::size_t>(k - 1)] * n.x();
    yp[static_cast<std::size_t>(k)] = yp[static_cast<std::size_t>(k - 1)] * n.y();
  }
  std::size_t t = 0;
  for (int d = 0; d <= kDistortionDegree; ++d)
    for (int j = 0; j <= d; ++j) out[t++] = xp[static_cast<std::size_t>(d - j)] * yp[static_cast<std::size_t>(j)];
  return out;
}

DistortionModel DistortionModel::identity() {
  DistortionModel m;
  m.coef_[0] = Vector::Zero(kDistortionTerms);
  m.coef_[1] = Vector::Zero(kDistortionTerms);
  m.coef_[0][1] = 1.0;
  m.coef_[1][2] = 1.0;
  return m;
}

Vec2 DistortionModel::apply(const Vec2& observed) const {
  const auto basis = distortion_basis(normalize(observed));
  const Eigen::Map<const Vector> b(basis.data(), kDistortionTerms);
  return {coef_[0].dot(b), coef_[1].dot(b)};
}

bool DistortionModel::in_calibrated_region(const Vec2& p) const {
  if (hull_.size() < 3) return true;
  for (std::size_t i = 0; i < hull_.size(); ++i) {
    const Vec2& a = hull_[i];
    const Vec2& b = hull_[(i + 1) % hull_.size()];
    const Vec2 e = b - a, q = p - a;
    if (e.x() * q.y() - e.y() * q.x() < 0.0) return false;
  }
  return true;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) { return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y(); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

DistortionModel fit_distortion(const BeadGrid& grid) {
  grid.validate();
  const auto n = static_cast<Eigen::Index>(grid.observed.size());
  Vec2 lo = grid.observed.front(), hi = lo;
  for (const auto& p : grid.observed) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  DistortionModel m;
  m.center_ = 0.5 * (lo + hi);
  m.half_range_ = (0.5 * (hi - lo)).cwiseMax(1e-12);

  Eigen::MatrixXd a(n, kDistortionTerms);
  Eigen::MatrixXd rhs(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = distortion_basis(m.normalize(grid.observed[static_cast<std::size_t>(i)]));
    for (int t = 0; t < kDistortionTerms; ++t) a(i, t) = row[static_cast<std::size_t>(t)];
    rhs.row(i) = grid.ideal[static_cast<std::size_t>(i)].transpose();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  qr.setThreshold(1e-10);
  if (qr.rank() < kDistortionTerms)
    throw Error(ErrorCode::RankDeficient, fmt::format("design matrix rank {} < {}", qr.rank(), kDistortionTerms));
  const Eigen::MatrixXd coef = qr.solve(rhs);
  m.coef_[0] = coef.col(0);
  m.coef_[1] = coef.col(1);
  m.rms_ = std::sqrt((a * coef - rhs).rowwise().squaredNorm().mean());

  auto hull = convex_hull(grid.observed);
  Vec2 c = Vec2::Zero();
  for (const auto& p : hull) c += p;
  c /= static_cast<double>(hull.size());
  for (auto& p : hull) p = c + 1.05 * (p - c);
  m.hull_ = std::move(hull);
  return m;
}

std::vector<UndistortedPoint> undistort_points(const DistortionModel& model, const std::vector<Vec2>& points) {
  std::vector<UndistortedPoint> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back({model.apply(p), !model.in_calibrated_region(p)});
  return out;
}

std::string format_distortion_model(const DistortionModel& model, const std::vector<std::string>& comments) {
  std::string out = fmt::format("dualfluoro-distortion {}\n", kDistortionFormatVersion);
  for (const auto& c : comments) out += "# " + c + "\n";
  out += fmt::format("degree {}\n", kDistortionDegree);
  out += fmt::format("normalization {} {} {} {}\n", model.center().x(), model.center().y(), model.half_range().x(),
                     model.half_range().y());
  for (int k = 0; k < 2; ++k) {
    out += k == 0 ? "coef_u" : "coef_v";
    for (Eigen::Index t = 0; t < kDistortionTerms; ++t) out += fmt::format(" {}", model.coefficients()[static_cast<std::size_t>(k)][t]);
    out += "\n";
  }
  out += fmt::format("rms {}\n", model.rms_residual());
  out += fmt::format("region {}\n", model.region().size());
  for (const auto& p : model.region()) out += fmt::format("{} {}\n", p.x(), p.y());
  return out;
}

DistortionModel parse_distortion_model(std::string_view content) {
  const auto rows = text::parse_rows(content);
  if (rows.empty() || rows[0].fields.size() != 2 || rows[0].fields[0] != "dualfluoro-distortion")
    throw Error(ErrorCode::Parse, "not a distortion model file");
  if (rows[0].integer(1) != kDistortionFormatVersion)
    throw Error(ErrorCode::Parse, fmt::format("unsupported distortion model version {}", rows[0].fields[1]));
  DistortionModel m;
  bool have_norm = false, have_u = false, have_v = false;
  std::size_t i = 1;
  for (; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string& key = r.fields[0];
    if (key == "degree") {
      if (r.integer(1) != kDistortionDegree) throw Error(ErrorCode::Parse, "only degree 5 models are supported");
    } else if (key == "normalization") {
      m.center_ = Vec2(r.number(1), r.number(2));
      m.half_range_ = Vec2(r.number(3), r.number(4));
      have_norm = true;
    } else if (key == "coef_u" || key == "coef_v") {
      if (r.fields.size() != kDistortionTerms + 1)
        throw Error(ErrorCode::Parse, fmt::format("line {}: expected {} coefficients", r.line_number, kDistortionTerms));
      Vector c(kDistortionTerms);
      for (int t = 0; t < kDistortionTerms; ++t) c[t] = r.number(static_cast<std::size_t>(t) + 1);
      m.coef_[key == "coef_u" ? 0 : 1] = c;
      (key == "coef_u" ? have_u : have_v) = true;
    } else if (key == "rms") {
      m.rms_ = r.number(1);
    } else if (key == "region") {
      const long count = r.integer(1);
      if (count < 0 || i + static_cast<std::size_t>(count) >= rows.size())
        throw Error(ErrorCode::Parse, "truncated region polygon");
      for (long k = 0; k < count; ++k) {
        const auto& pr = rows[++i];
        m.hull_.emplace_back(pr.number(0), pr.number(1));
      }
    } else {
      throw Error(ErrorCode::Parse, fmt::format("line {}: unknown key '{}'", r.line_number, key));
    }
  }
  if (!have_norm || !have_u || !have_v) throw Error(ErrorCode::Parse, "distortion model is incomplete");
  return m;
}

std::vector<Vec2> parse_bead_table(std::string_view content) {
  std::vector<Vec2> out;
  for (const auto& row : text::parse_rows(content)) {
    if (row.fields.size() != 3) throw Error(ErrorCode::Parse, fmt::format("line {}: expected 'index u v'", row.line_number));
    if (row.integer(0) != static_cast<long>(out.size()) + 1)
      throw Error(ErrorCode::Parse, fmt::format("line {}: indices must be consecutive from 1", row.line_number));
    out.emplace_back(row.number(1), row.number(2));
  }
  return out;
}

std::string format_bead_table(const std::vector<Vec2>& beads, const std::vector<std::string>& comments) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "# index u v\n";
  for (std::size_t i = 0; i < beads.size(); ++i) out += fmt::format("{} {} {}\n", i + 1, beads[i].x(), beads[i].y());
  return out;
}

// ---------------------------------------------------------------------------
// Dual-fluoroscope pose calibration

void AlignmentTool::validate() const {
  if (beads.size() != 4) throw Error(ErrorCode::WrongCount, fmt::format("alignment tool needs 4 beads, got {}", beads.size()));
  for (const auto& obs : observed)
    if (obs.size() != 4) throw Error(ErrorCode::WrongCount, "each view needs 4 bead observations");
  Mat3 m;
  m << beads[1] - beads[0], beads[2] - beads[0], beads[3] - beads[0];
  const double s = std::max({m.col(0).norm(), m.col(1).norm(), m.col(2).norm()});
  if (!(std::abs(m.determinant()) > 1e-6 * s * s * s))
    throw Error(ErrorCode::InvalidArgument, "alignment tool beads are coplanar");
}

std::array<std::vector<Vec2>, 2> project_tool(const std::vector<Vec3>& beads, const RigidPose& tool_pose,
                                              const DualFluoroSystem& system) {
  std::array<std::vector<Vec2>, 2> out;
  for (int v = 0; v < 2; ++v)
    for (const auto& b : beads) out[static_cast<std::size_t>(v)].push_back(project_point(system.view(v), tool_pose.apply(b)).uv);
  return out;
}

namespace {

Mat3 exp_rotation(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

/// Parameter vector: [F2 rotation increment (rad), F2 translation increment,
/// tool rotation increment (rad), tool translation increment].
struct CalibrationModel {
  const AlignmentTool* tool;
  FluoroscopeGeometry f1, f2_init;
  Mat3 tool_r0;
  Vec3 tool_t0;

  FluoroscopeGeometry f2_at(const Vector& x) const {
    const Mat3 r = exp_rotation(x.segment<3>(0));
    const Vec3 c0 = f2_init.intensifier_center();
    // Rotate about the intensifier center, then translate.
    return f2_init.transformed(r, c0 - r * c0 + x.segment<3>(3));
  }

  RigidPose tool_at(const Vector& x) const {
    const Mat3 r = exp_rotation(x.segment<3>(6)) * tool_r0;
    return RigidPose{euler_deg_from_rotation(r), tool_t0 + x.segment<3>(9)};
  }

  Vector residuals(const Vector& x) const {
    const FluoroscopeGeometry f2 = f2_at(x);
    const Mat3 r = exp_rotation(x.segment<3>(6)) * tool_r0;
    const Vec3 t = tool_t0 + x.segment<3>(9);
    Vector out(16);
    Eigen::Index k = 0;
    for (int v = 0; v < 2; ++v) {
      const FluoroscopeGeometry& g = v == 0 ? f1 : f2;
      for (std::size_t b = 0; b < 4; ++b) {
        Vec2 d;
        try {
          d = project_point(g, r * tool->beads[b] + t).uv - tool->observed[static_cast<std::size_t>(v)][b];
        } catch (const Error&) {
          d = Vec2::Constant(1e6);
        }
        out[k++] = d.x();
        out[k++] = d.y();
      }
    }
    return out;
  }
};

/// Closest point between the two beam axes (source -> intensifier center).
Vec3 beam_crossing(const DualFluoroSystem& s) {
  const Vec3 p1 = s.f1().source(), d1 = (s.f1().intensifier_center() - p1).normalized();
  const Vec3 p2 = s.f2().source(), d2 = (s.f2().intensifier_center() - p2).normalized();
  const Vec3 w = p1 - p2;
  const double b = d1.dot(d2), d = d1.dot(w), e = d2.dot(w);
  const double denom = 1.0 - b * b;
  if (denom < 1e-12) return system_center(s);
  const double t1 = (b * e - d) / denom, t2 = (e - b * d) / denom;
  return 0.5 * ((p1 + t1 * d1) + (p2 + t2 * d2));
}

/// The 24 rotations of the cube; starting orientations for the tool search.
std::vector<Mat3> cube_rotations() {
  std::vector<Mat3> out;
  const std::array<Vec3, 6> axes{Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY(), Vec3::UnitZ(), -Vec3::UnitZ()};
  for (const auto& a : axes)
    for (const auto& b : axes) {
      if (std::abs(a.dot(b)) > 0.5) continue;
      Mat3 r;
      r << a, b, a.cross(b);
      out.push_back(r);
    }
  return out;
}

}  // namespace

DualPoseCalibration calibrate_dual_pose(const AlignmentTool& tool, const DualFluoroSystem& initial,
                                        const std::optional<RigidPose>& tool_init) {
  tool.validate();
  CalibrationModel model{&tool, initial.f1(), initial.f2(), Mat3::Identity(), Vec3::Zero()};

  // Stage 1: tool pose only, F2 held at the initial guess.
  std::vector<Mat3> starts = tool_init ? std::vector<Mat3>{tool_init->rotation()} : cube_rotations();
  model.tool_t0 = tool_init ? tool_init->tau : beam_crossing(initial);
  double best_cost = std::numeric_limits<double>::infinity();
  Mat3 best_r = starts.front();
  Vec3 best_t = model.tool_t0;
  for (const Mat3& r0 : starts) {
    CalibrationModel m = model;
    m.tool_r0 = r0;
    auto tool_only = [&m](const Vector& y) {
      Vector x = Vector::Zero(12);
      x.tail<6>() = y;
      return m.residuals(x);
    };
    LevenbergMarquardtOptions opts;
    opts.max_iterations = 100;
    const auto res = levenberg_marquardt(tool_only, Vector::Zero(6), opts);
    if (res.cost < best_cost) {
      best_cost = res.cost;
      best_r = exp_rotation(res.x.segment<3>(0)) * r0;
      best_t = model.tool_t0 + res.x.segment<3>(3);
    }
  }
  model.tool_r0 = best_r;
  model.tool_t0 = best_t;

  // Stage 2: joint refinement of F2 and the tool.
  LevenbergMarquardtOptions opts;
  opts.max_iterations = 500;
  const auto res = levenberg_marquardt([&model](const Vector& x) { return model.residuals(x); }, Vector::Zero(12), opts);
  if (!res.converged && !(res.cost < res.initial_cost))
    throw Error(ErrorCode::NonConvergence, fmt::format("pose calibration stalled after {} iterations", res.iterations));

  DualPoseCalibration out;
  out.system = DualFluoroSystem(model.f1, model.f2_at(res.x));
  out.f2_pose = intensifier_pose(out.system.f2());
  out.tool_pose = model.tool_at(res.x);
  out.iterations = res.iterations;
  out.converged = res.converged;
  out.cost_history = res.cost_history;
  for (std::size_t v = 0; v < 2; ++v)
    for (std::size_t b = 0; b < 4; ++b)
      out.bead_residuals[v].push_back(Vec2(res.residuals[static_cast<Eigen::Index>(v * 8 + b * 2)],
                                           res.residuals[static_cast<Eigen::Index>(v * 8 + b * 2 + 1)])
                                          .norm());
  out.rms_mm = std::sqrt(res.cost / 8.0);

  return out;
}

ToolFile parse_tool_file(std::string_view content) {
  ToolFile file;
  std::map<long, Vec3> beads;
  std::array<std::map<long, Vec2>, 2> obs;
  std::optional<Vec3> theta, tau;
  for (const auto& row : text::parse_rows(content)) {
    const std::string& key = row.fields[0];
    auto need = [&](std::size_t n) {
      if (row.fields.size() != n)
        throw Error(ErrorCode::Parse, fmt::format("line {}: '{}' expects {} values", row.line_number, key, n - 1));
    };
    if (key == "bead") {
      need(5);
      beads[row.integer(1)] = Vec3(row.number(2), row.number(3), row.number(4));
    } else if (key == "f1" || key == "f2") {
      need(4);
      obs[key == "f1" ? 0 : 1][row.integer(1)] = Vec2(row.number(2), row.number(3));
    } else if (key == "tool_theta") {
      need(4);
      theta = Vec3(row.number(1), row.number(2), row.number(3));
    } else if (key == "tool_tau") {
      need(4);
      tau = Vec3(row.number(1), row.number(2), row.number(3));
    } else {
      throw Error(ErrorCode::Parse, fmt::format("line {}: unknown record '{}'", row.line_number, key));
    }
  }
  auto dense = [](const auto& m, const char* what) {
    std::vector<typename std::decay_t<decltype(m)>::mapped_type> out;
    long expect = 1;
    for (const auto& [k, v] : m) {
      if (k != expect++) throw Error(ErrorCode::Parse, fmt::format("{} indices must be consecutive from 1", what));
      out.push_back(v);
    }
    return out;
  };
  file.tool.beads = dense(beads, "bead");
  file.tool.observed[0] = dense(obs[0], "f1");
  file.tool.observed[1] = dense(obs[1], "f2");
  if (theta.has_value() != tau.has_value()) throw Error(ErrorCode::Parse, "tool_theta and tool_tau go together");
  if (theta) file.tool_init = RigidPose{*theta, *tau};
  return file;
}

std::string format_tool_file(const ToolFile& file) {
  std::string out;
  for (std::size_t i = 0; i < file.tool.beads.size(); ++i) {
    const auto& b = file.tool.beads[i];
    out += fmt::format("bead {} {} {} {}\n", i + 1, b.x(), b.y(), b.z());
  }
  for (int v = 0; v < 2; ++v)
    for (std::size_t i = 0; i < file.tool.observed[static_cast<std::size_t>(v)].size(); ++i) {
      const auto& o = file.tool.observed[static_cast<std::size_t>(v)][i];
      out += fmt::format("f{} {} {} {}\n", v + 1, i + 1, o.x(), o.y());
    }
  if (file.tool_init) {
    const auto& p = *file.tool_init;
    out += fmt::format("tool_theta {} {} {}\ntool_tau {} {} {}\n", p.theta.x(), p.theta.y(), p.theta.z(), p.tau.x(),
                       p.tau.y(), p.tau.z());
  }
  return out;
}

}  // namespace dualfluoro
