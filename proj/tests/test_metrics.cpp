#include <cmath>
#include <limits>
#include <random>

#include <doctest.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/metrics.hpp"

using namespace dualfluoro;

namespace {

Image random_image(std::mt19937_64& rng, int w = 32, int h = 24) {
  std::uniform_real_distribution<double> u(0, 255);
  Image img(w, h);
  for (double& v : img.pixels()) v = u(rng);
  return img;
}

Image map_pixels(const Image& in, double scale, double offset) {
  Image out = in;
  for (double& v : out.pixels()) v = scale * v + offset;
  return out;
}

// Pearson correlation of central differences along one axis.
double gradient_correlation(const Image& a, const Image& b, bool along_x) {
  std::vector<double> x, y;
  for (int r = 1; r + 1 < a.height(); ++r)
    for (int c = 1; c + 1 < a.width(); ++c) {
      if (along_x) {
        x.push_back(a.at(c + 1, r) - a.at(c - 1, r));
        y.push_back(b.at(c + 1, r) - b.at(c - 1, r));
      } else {
        x.push_back(a.at(c, r + 1) - a.at(c, r - 1));
        y.push_back(b.at(c, r + 1) - b.at(c, r - 1));
      }
    }
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("per-axis pose errors") {
  const RigidPose a{Vec3(1, -2, 0.5), Vec3(10, 20, 30)};
  const RigidPose b{Vec3(3, -4, 1), Vec3(14, 17, 30)};
  const auto e = dof_errors(a, b);
  CHECK(e.eps_theta == doctest::Approx(2.0));
  CHECK(e.eps_tau == doctest::Approx(4.0));

  // Angles compare on the circle.
  const auto w = dof_errors({Vec3(179, 0, 0), Vec3::Zero()}, {Vec3(-179, 0, 0), Vec3::Zero()});
  CHECK(w.eps_theta == doctest::Approx(2.0));
  CHECK(angle_difference_deg(-170, 170) == doctest::Approx(20.0));
  CHECK(angle_difference_deg(10, 370) == doctest::Approx(0.0).epsilon(1e-12));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-180, 180);
  auto pose = [&] { return RigidPose{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))}; };
  for (int i = 0; i < 500; ++i) {
    const auto p = pose(), q = pose(), r = pose();
    const auto pq = dof_errors(p, q), qp = dof_errors(q, p);
    CHECK(pq.eps_theta == qp.eps_theta);
    CHECK(pq.eps_tau == qp.eps_tau);
    CHECK(dof_errors(p, p).eps_theta == 0.0);
    CHECK(pq.eps_theta <= 180.0);
    const auto pr = dof_errors(p, r), rq = dof_errors(r, q);
    CHECK(pq.eps_theta <= pr.eps_theta + rq.eps_theta + 1e-9);
    CHECK(pq.eps_tau <= pr.eps_tau + rq.eps_tau + 1e-9);
  }
}

TEST_CASE("landmark mean squared error") {
  std::vector<double> label(66);
  for (std::size_t i = 0; i < label.size(); ++i) label[i] = std::sin(static_cast<double>(i));
  const auto zero = landmark_mse(label, label);
  CHECK(zero.mse == 0.0);
  CHECK(zero.log10_mse == -std::numeric_limits<double>::infinity());

  auto shifted = label;
  for (double& v : shifted) v += 0.1;
  const auto r = landmark_mse(shifted, label);
  CHECK(r.mse == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(r.log10_mse == doctest::Approx(-2.0).epsilon(1e-12));

  try {
    landmark_mse({1, 2}, {1});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LengthMismatch);
  }
}

TEST_CASE("gradient correlation similarity") {
  std::mt19937_64 rng(2);
  const Image a = random_image(rng);
  const Image b = random_image(rng);
  CHECK(grad_zncc_phi(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grad_zncc_phi(a, map_pixels(a, -1.0, 255.0)) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(grad_zncc_phi(a, map_pixels(a, 0.3, 40.0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grad_zncc_phi(map_pixels(a, 2.0, -7.0), a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(grad_zncc_phi(a, b) == doctest::Approx(grad_zncc_phi(b, a)).epsilon(1e-12));

  const double oracle = 0.5 * (gradient_correlation(a, b, true) + gradient_correlation(a, b, false));
  CHECK(grad_zncc_phi(a, b) == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(std::abs(grad_zncc_phi(a, b)) < 0.2);

  try {
    grad_zncc_phi(a, Image(10, 10));
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimMismatch);
  }
}

TEST_CASE("content-preserving loss") {
  std::mt19937_64 rng(3);
  const Image x = random_image(rng), d = random_image(rng);
  const auto same = content_preserving_loss(x, x, d, d);
  CHECK(same.l_cp == doctest::Approx(0.0).epsilon(1e-12));

  // Anti-correlated pairs clamp to zero similarity.
  const auto neg = content_preserving_loss(x, map_pixels(x, -1, 255), d, map_pixels(d, -1, 255));
  CHECK(neg.l_cp == doctest::Approx(1.0));
  CHECK(neg.phi_x_to_drr < -0.99);

  const auto half = content_preserving_loss(x, x, d, map_pixels(d, -1, 255));
  CHECK(half.l_cp == doctest::Approx(0.5));

  for (int i = 0; i < 50; ++i) {
    const auto r = content_preserving_loss(random_image(rng), random_image(rng), random_image(rng), random_image(rng));
    CHECK(r.l_cp >= 0.0);
    CHECK(r.l_cp <= 1.0);
    CHECK(r.l_cp > 0.8);
  }
}

TEST_CASE("mean and sample standard deviation") {
  const auto m = mean_sd({2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(m.n == 8);
  CHECK(m.mean == doctest::Approx(5.0));
  CHECK(m.sd == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(mean_sd({3.5}).sd == 0.0);
  CHECK(mean_sd({}).n == 0);
}
