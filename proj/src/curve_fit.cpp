#include "iontel/curve_fit.hpp"

#include <cmath>

#include "iontel/errors.hpp"

namespace iontel {

namespace {

Eigen::VectorXd residuals(
    const std::function<double(const Eigen::VectorXd&, double)>& model,
    const Eigen::VectorXd& params, const Eigen::VectorXd& x,
    const Eigen::VectorXd& y, const Eigen::VectorXd& sigma) {
  Eigen::VectorXd r(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    r[i] = (y[i] - model(params, x[i])) / sigma[i];
  }
  return r;
}

Eigen::MatrixXd jacobian(
    const std::function<double(const Eigen::VectorXd&, double)>& model,
    const Eigen::VectorXd& params, const Eigen::VectorXd& x,
    const Eigen::VectorXd& sigma) {
  Eigen::MatrixXd j(x.size(), params.size());
  for (Eigen::Index p = 0; p < params.size(); ++p) {
    const double h = 1e-7 * std::max(1.0, std::abs(params[p]));
    Eigen::VectorXd lo = params, hi = params;
    lo[p] -= h;
    hi[p] += h;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      // d(residual)/d(param); residual = (y - f)/sigma.
      j(i, p) = -(model(hi, x[i]) - model(lo, x[i])) / (2.0 * h * sigma[i]);
    }
  }
  return j;
}

}  // namespace

CurveFitResult levenberg_fit(
    const std::function<double(const Eigen::VectorXd&, double)>& model,
    const Eigen::VectorXd& x, const Eigen::VectorXd& y,
    const Eigen::VectorXd& sigma, const Eigen::VectorXd& initial,
    int max_iterations, double tolerance) {
  if (x.size() != y.size() || x.size() != sigma.size()) {
    throw input_error("curve-fit", "point arrays disagree in length",
                      {{"x", std::to_string(x.size())},
                       {"y", std::to_string(y.size())},
                       {"sigma", std::to_string(sigma.size())}});
  }
  if (x.size() < initial.size()) {
    throw fit_error("curve-fit", "fewer points than parameters",
                    {{"points", std::to_string(x.size())},
                     {"parameters", std::to_string(initial.size())}});
  }
  if ((sigma.array() <= 0.0).any()) {
    throw input_error("curve-fit", "sigma values must be positive");
  }

  CurveFitResult out;
  out.params = initial;
  out.dof = static_cast<int>(x.size() - initial.size());

  Eigen::VectorXd r = residuals(model, out.params, x, y, sigma);
  double cost = r.squaredNorm();
  double lambda = 1e-3;

  for (int iter = 0; iter < max_iterations; ++iter) {
    out.iterations = iter + 1;
    const Eigen::MatrixXd j = jacobian(model, out.params, x, sigma);
    const Eigen::MatrixXd jtj = j.transpose() * j;
    const Eigen::VectorXd g = -j.transpose() * r;

    bool stepped = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal().array() += lambda * jtj.diagonal().array().max(1e-12);
      const Eigen::VectorXd step = damped.ldlt().solve(g);
      if (!step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd trial = out.params + step;
      const Eigen::VectorXd rt = residuals(model, trial, x, y, sigma);
      const double trial_cost = rt.squaredNorm();
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        const double drop = cost - trial_cost;
        out.params = trial;
        r = rt;
        cost = trial_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (drop <= tolerance * (1.0 + cost) &&
            step.norm() <= 1e-10 * (1.0 + out.params.norm())) {
          out.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      // No damping value produced a downhill step: treat as stationary.
      out.converged = true;
    }
    if (out.converged) break;
  }

  if (!out.converged) {
    throw convergence_error("curve-fit", "no convergence within iteration cap",
                            {{"iterations", std::to_string(out.iterations)},
                             {"chi_square", std::to_string(cost)}});
  }

  const Eigen::MatrixXd j = jacobian(model, out.params, x, sigma);
  const Eigen::MatrixXd jtj = j.transpose() * j;
  out.covariance =
      jtj.completeOrthogonalDecomposition().pseudoInverse();
  out.chi_square = cost;
  return out;
}

}  // namespace iontel
