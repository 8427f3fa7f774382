#pragma once

#include <Eigen/Dense>
#include <utility>

#include "iontel/histogram.hpp"

namespace iontel {

// Exponential wavepacket envelope starting at `start` with decay constant
// `tau`; `span_end` bounds the region used for fringe fits.
struct WavepacketShape {
  double start = 0.0;
  double tau = 1.0;
  double span_end = 0.0;

  double envelope(double t) const;
  // Exact integral of the envelope over [t1, t2] (clipped at `start`).
  double envelope_integral(double t1, double t2) const;
  // Exact integrals of envelope * cos(omega (t - start)) and
  // envelope * sin(omega (t - start)) over [t1, t2].
  std::pair<double, double> modulated_integral(double t1, double t2,
                                               double omega) const;
};

// Decay constant such that the fraction `window_fraction` of an exponential
// envelope falls inside a window of length `window_length` at its head.
double wavepacket_tau(double window_length, double window_fraction);

// Reference rotation of the fringe quadratures for an ion analysis axis:
// the precessing spin crosses +x at the timing origin, +y a quarter period
// later.
double quadrature_rotation(Axis ion_axis);

// Result of the damped-fringe fit
//   value(bin) ~ A * env + a * env*cos(w(t-t0)) + b * env*sin(w(t-t0)) + offset
// with env/cos/sin averaged exactly over each bin. Derived quantities:
//   visibility = sqrt(a^2+b^2)/A, phase such that the modulation equals
//   A * V * cos(w(t-t0) + phase).
// `quadratures` holds (a, b) rotated back by the axis reference rotation, so
// its first component always measures the cos(w(t-t0) + alpha) content.
struct FringeFit {
  BasisSetting setting;
  double larmor_frequency = 0.0;
  double reference_rotation = 0.0;

  double amplitude = 0.0;
  double visibility = 0.0;
  double phase = 0.0;
  double offset = 0.0;
  Eigen::Matrix4d covariance = Eigen::Matrix4d::Zero();  // (A, V, phase, offset)

  Eigen::Vector2d quadratures = Eigen::Vector2d::Zero();
  Eigen::Matrix2d quadrature_covariance = Eigen::Matrix2d::Zero();

  double chi_square = 0.0;
  int dof = 0;
  bool visibility_unphysical = false;
  bool phase_unresolved = false;
};

// Weighted least-squares fit of the damped fringe model to the bins of `h`
// that lie inside [shape.start, shape.span_end]. Two passes: unit weights,
// then model- or variance-based weights (variance-based whenever `h` carries
// subtraction information). Throws fit_error when the region holds fewer
// than six populated bins or under two fringe periods; a non-positive fitted
// amplitude instead degrades the result to zero visibility with the
// unphysical/unresolved flags set.
FringeFit fit_larmor_fringe(const CorrectedHistogram& h,
                            const WavepacketShape& shape,
                            double larmor_frequency,
                            double reference_rotation);

}  // namespace iontel
