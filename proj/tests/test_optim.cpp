#include <cmath>

#include <doctest.h>

#include "dualfluoro/errors.hpp"
#include "dualfluoro/optim.hpp"

using namespace dualfluoro;

TEST_CASE("nelder-mead finds the minimum of a quadratic bowl") {
  const Vector center = (Vector(4) << 1.0, -2.0, 3.5, 0.25).finished();
  auto f = [&](const Vector& x) {
    const Vector d = x - center;
    return d.dot(d) + 0.5 * d[0] * d[1];
  };
  NelderMeadOptions opts;
  opts.initial_step = Vector::Constant(4, 1.0);
  opts.x_tolerance = 1e-10;
  opts.f_tolerance = 1e-16;
  const auto r = nelder_mead(f, Vector::Zero(4), opts);
  CHECK(r.converged);
  CHECK((r.x - center).norm() < 1e-6);
  CHECK(r.value < 1e-12);
}

TEST_CASE("nelder-mead handles the rosenbrock valley") {
  auto f = [](const Vector& x) { return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2); };
  NelderMeadOptions opts;
  opts.initial_step = Vector::Constant(2, 0.5);
  opts.x_tolerance = 1e-10;
  opts.f_tolerance = 1e-18;
  const auto r = nelder_mead(f, (Vector(2) << -1.2, 1.0).finished(), opts);
  CHECK((r.x - Vector::Ones(2)).norm() < 1e-5);
}

TEST_CASE("nelder-mead started at the minimum stays there") {
  auto f = [](const Vector& x) { return x.squaredNorm(); };
  NelderMeadOptions opts;
  opts.initial_step = Vector::Constant(3, 0.1);
  const auto r = nelder_mead(f, Vector::Zero(3), opts);
  CHECK(r.value == 0.0);
  CHECK(r.x == Vector::Zero(3));
}

TEST_CASE("levenberg-marquardt fits an exponential decay") {
  // y = a * exp(-b t) + c sampled without noise.
  const double a = 3.0, b = 0.7, c = -0.4;
  std::vector<double> ts, ys;
  for (int i = 0; i < 30; ++i) {
    ts.push_back(0.2 * i);
    ys.push_back(a * std::exp(-b * ts.back()) + c);
  }
  auto res = [&](const Vector& p) {
    Vector r(static_cast<Eigen::Index>(ts.size()));
    for (std::size_t i = 0; i < ts.size(); ++i) r[static_cast<Eigen::Index>(i)] = p[0] * std::exp(-p[1] * ts[i]) + p[2] - ys[i];
    return r;
  };
  const auto out = levenberg_marquardt(res, (Vector(3) << 1.0, 0.1, 0.0).finished());
  CHECK(out.cost < 1e-20);
  CHECK(out.x[0] == doctest::Approx(a).epsilon(1e-8));
  CHECK(out.x[1] == doctest::Approx(b).epsilon(1e-8));
  CHECK(out.x[2] == doctest::Approx(c).epsilon(1e-8));
  CHECK(out.cost <= out.initial_cost);
  for (std::size_t i = 1; i < out.cost_history.size(); ++i) CHECK(out.cost_history[i] < out.cost_history[i - 1]);
}

TEST_CASE("levenberg-marquardt rejects a non-finite start") {
  auto res = [](const Vector& p) { return Vector::Constant(2, std::log(p[0])); };
  CHECK_THROWS_AS(levenberg_marquardt(res, Vector::Constant(1, -1.0)), Error);
}

TEST_CASE("numeric jacobian of a linear map is the matrix") {
  Eigen::MatrixXd m(3, 2);
  m << 1, 2, -3, 4, 0.5, -6;
  auto res = [&](const Vector& x) -> Vector { return m * x; };
  const auto j = numeric_jacobian(res, (Vector(2) << 3.0, -1.0).finished(), 1e-6);
  CHECK((j - m).norm() < 1e-7);
}
