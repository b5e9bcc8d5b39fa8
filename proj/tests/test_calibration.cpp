#include <cmath>
#include <random>

#include <doctest.h>

#include "dualfluoro/calibration.hpp"
#include "dualfluoro/errors.hpp"
#include "dualfluoro/metrics.hpp"
#include "dualfluoro/phantom.hpp"

using namespace dualfluoro;

namespace {

// Bright Gaussian spot centred at a 1-based pixel position.
void add_spot(Image& img, const Vec2& center_px, double sigma = 1.2, double peak = 250.0) {
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      const double dx = c + 1 - center_px.x(), dy = r + 1 - center_px.y();
      img.at(c, r) = std::max(img.at(c, r), peak * std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)));
    }
}

// Evaluates sum_t c_t * basis_t on a normalized point.
double poly(const std::array<double, kDistortionTerms>& c, const Vec2& n) {
  const auto b = distortion_basis(n);
  double s = 0.0;
  for (int t = 0; t < kDistortionTerms; ++t) s += c[t] * b[t];
  return s;
}

AlignmentTool tool_seen_by(const DualFluoroSystem& sys, const RigidPose& pose) {
  AlignmentTool tool;
  tool.beads = phantom::alignment_tool_beads();
  tool.observed = project_tool(tool.beads, pose, sys);
  return tool;
}

const RigidPose kToolPose{Vec3(10, -5, 15), Vec3::Zero()};

RigidPose tool_pose() { return {kToolPose.theta, phantom::subject_center() + Vec3(-20, 10, 5)}; }

DualFluoroSystem perturbed(const DualFluoroSystem& truth, double deg, const Vec3& axis, const Vec3& shift) {
  const Mat3 r = Eigen::AngleAxisd(deg * M_PI / 180.0, axis.normalized()).toRotationMatrix();
  const Vec3 c0 = truth.f2().intensifier_center();
  return {truth.f1(), truth.f2().transformed(r, c0 - r * c0 + shift)};
}

}  // namespace

TEST_CASE("bead detection") {
  Image blank(64, 64);
  try {
    detect_beads(blank, {}, {}, 1);
    FAIL("expected TooFewBeads");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewBeads);
  }

  Image one(80, 100);
  add_spot(one, {40.5, 60.5});
  BeadDetectionOptions opts;
  opts.threshold = 20.0;
  const auto found = detect_beads(one, opts);
  REQUIRE(found.size() == 1);
  CHECK((found[0] - Vec2(40.5, 60.5)).norm() < 0.1);

  // A lattice of spots at sub-pixel offsets, matched back to the ideal order.
  Image lattice(120, 120);
  std::vector<Vec2> truth;
  for (int j = 0; j < 5; ++j)
    for (int i = 0; i < 5; ++i) truth.emplace_back(15.3 + 22 * i, 14.7 + 22.5 * j);
  for (const auto& p : truth) add_spot(lattice, p);
  std::vector<Vec2> guess = truth;
  for (auto& g : guess) g += Vec2(2.0, -1.5);
  const auto matched = detect_beads(lattice, opts, guess);
  REQUIRE(matched.size() == truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) CHECK((matched[k] - truth[k]).norm() < 0.1);

  // Dark beads on a bright background.
  Image dark(64, 64);
  for (double& v : dark.pixels()) v = 255.0;
  Image spot(64, 64);
  add_spot(spot, {20.25, 30.75});
  for (std::size_t i = 0; i < dark.pixels().size(); ++i) dark.pixels()[i] -= spot.pixels()[i];
  opts.dark_beads = true;
  const auto d = detect_beads(dark, opts);
  REQUIRE(d.size() == 1);
  CHECK((d[0] - Vec2(20.25, 30.75)).norm() < 0.1);
}

TEST_CASE("distortion basis is the total-degree-5 monomial set") {
  const Vec2 n(0.3, -0.7);
  const auto b = distortion_basis(n);
  int t = 0;
  for (int d = 0; d <= 5; ++d)
    for (int j = 0; j <= d; ++j) CHECK(b[t++] == doctest::Approx(std::pow(n.x(), d - j) * std::pow(n.y(), j)).epsilon(1e-14));
  CHECK(t == kDistortionTerms);
}

TEST_CASE("identical bead sets fit the identity") {
  const auto plate = phantom::bead_plate(10, 20.0);
  const auto m = fit_distortion({plate, plate});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-90, 90);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p(u(rng), u(rng));
    CHECK((m.apply(p) - p).norm() < 1e-9);
  }
  CHECK(m.rms_residual() < 1e-10);
}

TEST_CASE("fit is exact for any polynomial field of degree at most five") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto observed = phantom::bead_plate(12, 15.0);
  for (int trial = 0; trial < 5; ++trial) {
    std::array<double, kDistortionTerms> cu{}, cv{};
    for (auto& c : cu) c = g(rng);
    for (auto& c : cv) c = g(rng);
    // The field is defined on the plate's normalized coordinates.
    const DistortionModel probe = fit_distortion({observed, observed});
    std::vector<Vec2> ideal;
    for (const auto& p : observed) {
      const Vec2 n = probe.normalize(p);
      ideal.emplace_back(poly(cu, n), poly(cv, n));
    }
    const auto m = fit_distortion({ideal, observed});
    for (int i = 0; i < 100; ++i) {
      const Vec2 p(g(rng) * 40, g(rng) * 40);
      const Vec2 n = probe.normalize(p);
      CHECK((m.apply(p) - Vec2(poly(cu, n), poly(cv, n))).norm() < 1e-8);
    }
  }
}

TEST_CASE("degenerate bead layouts are rejected") {
  std::vector<Vec2> line;
  for (int i = 0; i < 40; ++i) line.emplace_back(i, 2.0 * i);
  try {
    fit_distortion({line, line});
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
  const auto few = phantom::bead_plate(4, 10.0);
  CHECK_THROWS_AS(fit_distortion({few, few}), Error);
  auto plate = phantom::bead_plate(6, 10.0);
  auto shorter = plate;
  shorter.pop_back();
  CHECK_THROWS_AS(fit_distortion({plate, shorter}), Error);
}

TEST_CASE("noisy fit residual sits near the noise floor") {
  const auto ideal = phantom::bead_plate(20, 14.0);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<Vec2> observed;
  for (const auto& p : ideal) observed.push_back(phantom::distort(p) + Vec2(noise(rng), noise(rng)));
  const auto m = fit_distortion({ideal, observed});
  // Per-point RMS of 2D noise with sigma 0.1, less the fitted degrees of freedom.
  const double expected = 0.1 * std::sqrt(2.0 * (400.0 - 21.0) / 400.0);
  CHECK(m.rms_residual() == doctest::Approx(expected).epsilon(0.15));
}

TEST_CASE("undistortion flags points outside the calibrated region") {
  const auto ideal = phantom::bead_plate(10, 20.0);
  std::vector<Vec2> observed;
  for (const auto& p : ideal) observed.push_back(phantom::distort(p));
  const auto m = fit_distortion({ideal, observed});
  const auto out = undistort_points(m, {Vec2(0, 0), Vec2(500, 0), observed.front(), Vec2(-120, 130)});
  CHECK_FALSE(out[0].extrapolated);
  CHECK(out[1].extrapolated);
  CHECK_FALSE(out[2].extrapolated);
  CHECK(out[3].extrapolated);
  CHECK((out[2].point - ideal.front()).norm() < 1e-3);

  const auto id = undistort_points(DistortionModel::identity(), {Vec2(3, -4), Vec2(1e4, 2)});
  CHECK(id[0].point == Vec2(3, -4));
  CHECK(id[1].point == Vec2(1e4, 2));
  CHECK_FALSE(id[1].extrapolated);
}

TEST_CASE("distortion model and bead table files round trip") {
  const auto ideal = phantom::bead_plate(8, 25.0);
  std::vector<Vec2> observed;
  for (const auto& p : ideal) observed.push_back(phantom::distort(p));
  const auto m = fit_distortion({ideal, observed});
  const auto back = parse_distortion_model(format_distortion_model(m, {"config_hash x"}));
  CHECK(back.region().size() == m.region().size());
  for (const auto& p : observed) CHECK((back.apply(p) - m.apply(p)).norm() < 1e-9);
  CHECK_THROWS_AS(parse_distortion_model("dualfluoro-distortion 2\n"), Error);
  CHECK_THROWS_AS(parse_distortion_model("hello\n"), Error);

  CHECK(parse_bead_table(format_bead_table(ideal)) == ideal);
  CHECK_THROWS_AS(parse_bead_table("1 0 0\n3 1 1\n"), Error);
}

TEST_CASE("convex hull") {
  const auto h = convex_hull({{0, 0}, {2, 0}, {1, 1}, {2, 2}, {0, 2}, {1, 0}});
  CHECK(h.size() == 4);
}

TEST_CASE("dual-pose calibration is a fixed point at the truth") {
  const auto truth = phantom::dual_system();
  const auto tool = tool_seen_by(truth, tool_pose());
  const auto cal = calibrate_dual_pose(tool, truth, tool_pose());
  CHECK(cal.rms_mm < 1e-9);
  const auto e = dof_errors(intensifier_pose(truth.f2()), cal.f2_pose);
  CHECK(e.eps_theta < 1e-6);
  CHECK(e.eps_tau < 1e-6);
  const auto te = dof_errors(tool_pose(), cal.tool_pose);
  CHECK(te.eps_theta < 1e-6);
  CHECK(te.eps_tau < 1e-6);
}

TEST_CASE("dual-pose calibration recovers a perturbed second fluoroscope") {
  const auto truth = phantom::dual_system();
  const auto tool = tool_seen_by(truth, tool_pose());
  for (const auto& [axis, shift] : {std::pair{Vec3(0, 0, 1), Vec3(50, 0, 0)}, std::pair{Vec3(1, -1, 2), Vec3(0, 30, -40)}}) {
    const auto cal = calibrate_dual_pose(tool, perturbed(truth, 10.0, axis, shift));
    const auto e = dof_errors(intensifier_pose(truth.f2()), cal.f2_pose);
    CHECK(e.eps_theta < 1e-3);
    CHECK(e.eps_tau < 1e-2);
    CHECK(cal.rms_mm < 1e-6);
    // F1 is the reference and never moves.
    CHECK(cal.system.f1().source() == truth.f1().source());
    // Cost never increases across accepted steps.
    for (std::size_t i = 1; i < cal.cost_history.size(); ++i) CHECK(cal.cost_history[i] <= cal.cost_history[i - 1]);
    // The recovered tool is rigid: bead distances are unchanged.
    const auto& b = tool.beads;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j)
        CHECK((cal.tool_pose.apply(b[i]) - cal.tool_pose.apply(b[j])).norm() ==
              doctest::Approx((b[i] - b[j]).norm()).epsilon(1e-12));
  }
}

TEST_CASE("a corrupted bead observation stays in its own view") {
  const auto truth = phantom::dual_system();
  for (std::size_t view = 0; view < 2; ++view)
    for (std::size_t bead = 0; bead < 4; ++bead) {
      auto tool = tool_seen_by(truth, tool_pose());
      tool.observed[view][bead] += Vec2(5.0, 0.0);
      const auto cal = calibrate_dual_pose(tool, truth, tool_pose());
      CHECK(cal.rms_mm > 0.05);
      double in_view = 0.0;
      for (std::size_t b = 0; b < 4; ++b) {
        CHECK(cal.bead_residuals[1 - view][b] < 1e-6);
        in_view = std::max(in_view, cal.bead_residuals[view][b]);
      }
      CHECK(in_view > 0.1);
    }
}

TEST_CASE("three beads of a view are always consistent") {
  // Each view has 8 coordinates against a 6-parameter pose, so dropping any
  // one bead leaves an exactly determined fit. A single corrupted bead can be
  // traced to its view but not singled out within it.
  const auto truth = phantom::dual_system();
  auto tool = tool_seen_by(truth, tool_pose());
  tool.observed[0][1] += Vec2(5.0, 0.0);
  for (std::size_t drop = 0; drop < 4; ++drop) {
    std::vector<Vec3> beads;
    std::vector<Vec2> seen;
    for (std::size_t b = 0; b < 4; ++b)
      if (b != drop) {
        beads.push_back(tool.beads[b]);
        seen.push_back(tool.observed[0][b]);
      }
    auto res = [&](const Vector& x) {
      const RigidPose p{x.head<3>(), x.tail<3>()};
      Vector r(6);
      for (std::size_t b = 0; b < 3; ++b) r.segment<2>(static_cast<Eigen::Index>(2 * b)) = project_point(truth.f1(), p.apply(beads[b])).uv - seen[b];
      return r;
    };
    Vector x0(6);
    x0 << tool_pose().theta, tool_pose().tau;
    CHECK(levenberg_marquardt(res, x0).cost < 1e-16);
  }
}

TEST_CASE("alignment tool validation and file round trip") {
  const auto truth = phantom::dual_system();
  auto tool = tool_seen_by(truth, tool_pose());
  ToolFile file{tool, tool_pose()};
  const auto back = parse_tool_file(format_tool_file(file));
  CHECK(back.tool.beads == tool.beads);
  CHECK(back.tool.observed[0] == tool.observed[0]);
  CHECK(back.tool.observed[1] == tool.observed[1]);
  REQUIRE(back.tool_init.has_value());
  CHECK(back.tool_init->tau == tool_pose().tau);
  CHECK_THROWS_AS(parse_tool_file("bead 1 0 0 0\nbead 3 0 0 1\n"), Error);
  CHECK_THROWS_AS(parse_tool_file("tool_theta 0 0 0\n"), Error);

  AlignmentTool flat = tool;
  flat.beads = {{0, 0, 0}, {10, 0, 0}, {0, 10, 0}, {10, 10, 0}};
  try {
    flat.validate();
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
  AlignmentTool three = tool;
  three.beads.pop_back();
  CHECK_THROWS_AS(three.validate(), Error);
}
