#pragma once

#include <Eigen/Dense>
#include <functional>

namespace iontel {

struct CurveFitResult {
  Eigen::VectorXd params;
  Eigen::MatrixXd covariance;
  double chi_square = 0.0;
  int dof = 0;
  int iterations = 0;
  bool converged = false;
};

// Weighted nonlinear least squares with Levenberg damping and a numerical
// Jacobian. `model(params, x)` evaluates the fit function at one abscissa.
// Throws fit_error on degenerate inputs or when damping cannot produce a
// step after max_iterations.
CurveFitResult levenberg_fit(
    const std::function<double(const Eigen::VectorXd&, double)>& model,
    const Eigen::VectorXd& x, const Eigen::VectorXd& y,
    const Eigen::VectorXd& sigma, const Eigen::VectorXd& initial,
    int max_iterations = 200, double tolerance = 1e-12);

}  // namespace iontel
