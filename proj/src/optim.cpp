#include "dualfluoro/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "dualfluoro/errors.hpp"

namespace dualfluoro {

namespace {

struct Simplex {
  std::vector<Vector> x;
  std::vector<double> f;

  void sort() {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
    std::vector<Vector> xs;
    std::vector<double> fs;
    for (std::size_t i : order) {
      xs.push_back(x[i]);
      fs.push_back(f[i]);
    }
    x = std::move(xs);
    f = std::move(fs);
  }

  double diameter() const {
    double d = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) d = std::max(d, (x[i] - x[0]).norm());
    return d;
  }
};

}  // namespace

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& options) {
  const auto n = x0.size();
  if (options.initial_step.size() != n) throw Error(ErrorCode::InvalidArgument, "initial step size differs from dimension");
  NelderMeadResult res;
  auto eval = [&](const Vector& x) {
    ++res.evaluations;
    return f(x);
  };

  Vector best = x0;
  double best_value = eval(x0);
  res.x = best;
  res.value = best_value;
  if (!std::isfinite(best_value)) throw Error(ErrorCode::InvalidArgument, "objective is not finite at the start point");

  for (int restart = 0; restart <= options.max_restarts; ++restart) {
    Simplex s;
    s.x.push_back(best);
    s.f.push_back(best_value);
    for (Eigen::Index i = 0; i < n; ++i) {
      Vector v = best;
      v[i] += options.initial_step[i];
      s.x.push_back(v);
      s.f.push_back(eval(v));
    }
    s.sort();

    bool converged = false;
    while (res.iterations < options.max_iterations) {
      if (s.diameter() < options.x_tolerance && s.f.back() - s.f.front() < options.f_tolerance) {
        converged = true;
        break;
      }
      ++res.iterations;
      const double prev_best = s.f.front();
      const auto worst = static_cast<std::size_t>(n);
      Vector centroid = Vector::Zero(n);
      for (std::size_t i = 0; i < worst; ++i) centroid += s.x[i];
      centroid /= static_cast<double>(n);

      const Vector xr = centroid + (centroid - s.x[worst]);
      const double fr = eval(xr);
      if (fr < s.f.front()) {
        const Vector xe = centroid + 2.0 * (centroid - s.x[worst]);
        const double fe = eval(xe);
        if (fe < fr) {
          s.x[worst] = xe;
          s.f[worst] = fe;
        } else {
          s.x[worst] = xr;
          s.f[worst] = fr;
        }
      } else if (fr < s.f[worst - 1]) {
        s.x[worst] = xr;
        s.f[worst] = fr;
      } else {
        const bool outside = fr < s.f[worst];
        const Vector xc = outside ? Vector(centroid + 0.5 * (xr - centroid)) : Vector(centroid + 0.5 * (s.x[worst] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : s.f[worst])) {
          s.x[worst] = xc;
          s.f[worst] = fc;
        } else {
          for (std::size_t i = 1; i <= worst; ++i) {
            s.x[i] = s.x[0] + 0.5 * (s.x[i] - s.x[0]);
            s.f[i] = eval(s.x[i]);
          }
        }
      }
      s.sort();
      if (s.f.front() < prev_best) ++res.improvements;
    }

    const bool improved = s.f.front() < best_value - options.f_tolerance;
    if (s.f.front() < best_value) {
      best = s.x.front();
      best_value = s.f.front();
    }
    res.converged = converged;
    if (!converged || !improved) break;
  }
  res.x = best;
  res.value = best_value;
  return res;
}

Eigen::MatrixXd numeric_jacobian(const std::function<Vector(const Vector&)>& residuals, const Vector& x,
                                 double relative_step) {
  const Vector r0 = residuals(x);
  Eigen::MatrixXd j(r0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = relative_step * std::max(1.0, std::abs(x[i]));
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    j.col(i) = (residuals(xp) - residuals(xm)) / (2.0 * h);
  }
  return j;
}

LeastSquaresResult levenberg_marquardt(const std::function<Vector(const Vector&)>& residuals, const Vector& x0,
                                       const LevenbergMarquardtOptions& options) {
  LeastSquaresResult res;
  res.x = x0;
  res.residuals = residuals(x0);
  res.cost = res.residuals.squaredNorm();
  res.initial_cost = res.cost;
  res.cost_history.push_back(res.cost);
  if (!std::isfinite(res.cost)) throw Error(ErrorCode::InvalidArgument, "residuals are not finite at the start point");

  double lambda = options.initial_lambda;
  while (res.iterations < options.max_iterations) {
    if (res.cost == 0.0) {
      res.converged = true;
      break;
    }
    ++res.iterations;
    const Eigen::MatrixXd j = numeric_jacobian(residuals, res.x, options.diff_step);
    const Vector g = j.transpose() * res.residuals;
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Vector diag = jtj.diagonal().cwiseMax(1e-12);
    bool accepted = false;
    bool tiny_step = false;
    for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
      Eigen::MatrixXd a = jtj;
      a.diagonal() += lambda * diag;
      const Vector dx = a.ldlt().solve(-g);
      if (dx.norm() < options.step_tolerance * (res.x.norm() + options.step_tolerance)) {
        tiny_step = true;
        break;
      }
      const Vector x_new = res.x + dx;
      const Vector r_new = residuals(x_new);
      const double cost_new = r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < res.cost) {
        res.x = x_new;
        res.residuals = r_new;
        res.cost = cost_new;
        res.cost_history.push_back(cost_new);
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (tiny_step || !accepted) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace dualfluoro
