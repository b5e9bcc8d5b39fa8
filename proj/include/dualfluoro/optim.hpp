#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

namespace dualfluoro {

using Vector = Eigen::VectorXd;

struct NelderMeadOptions {
  /// Edge length of the initial simplex along each coordinate.
  Vector initial_step;
  /// Converged when every vertex lies within this distance of the best one
  /// and the objective spread across vertices is below f_tolerance.
  double x_tolerance = 1e-6;
  double f_tolerance = 1e-9;
  /// Total iteration budget, shared by all restarts.
  int max_iterations = 50000;
  /// After convergence the simplex is rebuilt around the best vertex; this
  /// repeats while a restart still lowers the best value.
  int max_restarts = 8;
};

struct NelderMeadResult {
  Vector x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  /// Iterations in which the best vertex changed.
  int improvements = 0;
  bool converged = false;
};

NelderMeadResult nelder_mead(const std::function<double(const Vector&)>& f, const Vector& x0,
                             const NelderMeadOptions& options);

struct LevenbergMarquardtOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-14;
  double step_tolerance = 1e-14;
  /// Relative step for central-difference Jacobians.
  double diff_step = 1e-6;
  double initial_lambda = 1e-3;
};

struct LeastSquaresResult {
  Vector x;
  Vector residuals;
  /// Sum of squared residuals.
  double cost = 0.0;
  double initial_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Cost after each accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

/// Minimizes the sum of squared residuals. Steps solve the damped normal
/// equations (J^T J + lambda diag(J^T J)) dx = -J^T r and are accepted only
/// when they lower the cost.
LeastSquaresResult levenberg_marquardt(const std::function<Vector(const Vector&)>& residuals, const Vector& x0,
                                       const LevenbergMarquardtOptions& options = {});

/// Central-difference Jacobian.
Eigen::MatrixXd numeric_jacobian(const std::function<Vector(const Vector&)>& residuals, const Vector& x,
                                 double relative_step);

}  // namespace dualfluoro
