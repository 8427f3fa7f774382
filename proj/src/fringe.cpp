#include "iontel/fringe.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "iontel/errors.hpp"

namespace iontel {

double WavepacketShape::envelope(double t) const {
  if (t < start) return 0.0;
  return std::exp(-(t - start) / tau);
}

double WavepacketShape::envelope_integral(double t1, double t2) const {
  const double u1 = std::max(t1 - start, 0.0);
  const double u2 = std::max(t2 - start, 0.0);
  if (u2 <= u1) return 0.0;
  return tau * (std::exp(-u1 / tau) - std::exp(-u2 / tau));
}

std::pair<double, double> WavepacketShape::modulated_integral(
    double t1, double t2, double omega) const {
  const double u1 = std::max(t1 - start, 0.0);
  const double u2 = std::max(t2 - start, 0.0);
  if (u2 <= u1) return {0.0, 0.0};
  const std::complex<double> z(-1.0 / tau, omega);
  const std::complex<double> v = (std::exp(z * u2) - std::exp(z * u1)) / z;
  return {v.real(), v.imag()};
}

double wavepacket_tau(double window_length, double window_fraction) {
  if (!(window_length > 0.0)) {
    throw domain_error("fringe", "window length must be positive");
  }
  if (!(window_fraction > 0.0) || !(window_fraction < 1.0)) {
    throw domain_error("fringe", "window fraction must lie in (0, 1)",
                       "fraction=" + std::to_string(window_fraction));
  }
  return window_length / std::log(1.0 / (1.0 - window_fraction));
}

double quadrature_rotation(Axis ion_axis) {
  switch (ion_axis) {
    case Axis::X:
      return 0.0;
    case Axis::Y:
      return M_PI / 2.0;
    default:
      throw input_error("fringe", "precession axis must be x or y");
  }
}

FringeFit fit_larmor_fringe(const CorrectedHistogram& h,
                            const WavepacketShape& shape,
                            double larmor_frequency,
                            double reference_rotation) {
  if (!(h.bin_width > 0.0) || h.bins() == 0) {
    throw input_error("fringe", "histogram has no bins");
  }
  if (!(larmor_frequency > 0.0)) {
    throw input_error("fringe", "precession frequency must be positive");
  }
  const double dt = h.bin_width;
  const int first = std::max(
      0, static_cast<int>(std::floor(shape.start / dt + 0.5)));
  const int last = std::min(
      h.bins(), static_cast<int>(std::floor(shape.span_end / dt + 0.5)));
  const int n = last - first;
  if (n < 6) {
    throw fit_error("fringe", "fit region holds too few bins",
                    "bins=" + std::to_string(std::max(n, 0)));
  }
  int populated = 0;
  for (int i = first; i < last; ++i) {
    if (h.values[i] != 0.0) ++populated;
  }
  if (populated < 6) {
    throw fit_error("fringe", "fit region holds too few populated bins",
                    "populated=" + std::to_string(populated));
  }
  const double periods =
      (shape.span_end - shape.start) * larmor_frequency / (2.0 * M_PI);
  if (periods < 2.0) {
    throw fit_error("fringe", "fit region covers fewer than two fringe periods",
                    "periods=" + std::to_string(periods));
  }

  Eigen::MatrixXd x(n, 4);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double t1 = (first + i) * dt;
    const double t2 = t1 + dt;
    const auto [ci, si] = shape.modulated_integral(t1, t2, larmor_frequency);
    x(i, 0) = shape.envelope_integral(t1, t2) / dt;
    x(i, 1) = ci / dt;
    x(i, 2) = si / dt;
    x(i, 3) = 1.0;
    y[i] = h.values[first + i];
  }

  const bool provided_variances =
      h.subtracted_fraction != 0.0 || h.dark_per_bin_variance != 0.0;

  Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  Eigen::Vector4d beta = Eigen::Vector4d::Zero();
  Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
  for (int pass = 0; pass < 2; ++pass) {
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd xw = sw.asDiagonal() * x;
    beta = xw.colPivHouseholderQr().solve(sw.asDiagonal() * y);
    const Eigen::Matrix4d xtwx = xw.transpose() * xw;
    cov = xtwx.inverse();
    if (pass == 0) {
      if (provided_variances) {
        for (int i = 0; i < n; ++i) {
          w[i] = 1.0 / std::max(h.variances[first + i], 0.5);
        }
      } else {
        const Eigen::VectorXd mu = x * beta;
        for (int i = 0; i < n; ++i) w[i] = 1.0 / std::max(mu[i], 0.5);
      }
    }
  }

  const double amp = beta[0];
  const double a = beta[1];
  const double b = beta[2];
  if (!std::isfinite(amp) || !std::isfinite(a) || !std::isfinite(b)) {
    throw fit_error("fringe", "fit did not produce finite parameters");
  }
  const double s = std::hypot(a, b);
  const bool degenerate_amplitude = !(amp > 0.0);

  FringeFit out;
  out.setting = h.setting;
  out.larmor_frequency = larmor_frequency;
  out.reference_rotation = reference_rotation;
  out.amplitude = amp;
  out.offset = beta[3];
  out.visibility = degenerate_amplitude ? 0.0 : s / amp;
  out.phase = std::atan2(-b, a);

  const Eigen::VectorXd resid = y - x * beta;
  out.chi_square = (w.array() * resid.array().square()).sum();
  out.dof = n - 4;

  const double ca = std::cos(reference_rotation);
  const double sa = std::sin(reference_rotation);
  out.quadratures << a * ca - b * sa, a * sa + b * ca;
  Eigen::Matrix2d rot;
  rot << ca, -sa, sa, ca;
  out.quadrature_covariance =
      rot * cov.block<2, 2>(1, 1) * rot.transpose();

  // Propagate (A, a, b, offset) covariance to (A, V, phase, offset).
  const double se = std::max(s, 1e-300);
  const double ae = degenerate_amplitude ? 1e-300 : amp;
  Eigen::Matrix4d j = Eigen::Matrix4d::Zero();
  j(0, 0) = 1.0;
  j(1, 0) = -s / (ae * ae);
  j(1, 1) = a / (se * ae);
  j(1, 2) = b / (se * ae);
  j(2, 1) = b / (se * se);
  j(2, 2) = -a / (se * se);
  j(3, 3) = 1.0;
  out.covariance = j * cov * j.transpose();
  if (degenerate_amplitude) {
    out.covariance.row(1).setZero();
    out.covariance.col(1).setZero();
    out.covariance(1, 1) = 1e6;
  }

  out.visibility_unphysical = out.visibility > 1.05 || degenerate_amplitude;
  const double radial_var =
      s > 0.0 ? (a * a * cov(1, 1) + 2.0 * a * b * cov(1, 2) +
                 b * b * cov(2, 2)) /
                    (s * s)
              : 0.5 * (cov(1, 1) + cov(2, 2));
  out.phase_unresolved = degenerate_amplitude || out.visibility < 0.05 ||
                         s * s < 4.0 * std::max(radial_var, 0.0) ||
                         !std::isfinite(out.covariance(2, 2));
  return out;
}

}  // namespace iontel
