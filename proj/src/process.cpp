#include "iontel/process.hpp"

#include <cmath>
#include <complex>

#include "iontel/errors.hpp"
#include "iontel/pauli.hpp"

namespace iontel {

namespace {

using std::complex;

Eigen::Matrix2cd sigma2(int i) { return pauli(i); }

Eigen::Vector3d bloch_of_state(const Eigen::Matrix2cd& rho) {
  Eigen::Vector3d r;
  for (int i = 0; i < 3; ++i) {
    r[i] = (sigma2(i + 1) * rho).trace().real();
  }
  return r;
}

// chi from the channel's action on the Pauli basis, by least squares over
// the 16 process-basis coefficients.
ProcessMatrix chi_from_basis_action(
    const std::array<Eigen::Matrix2cd, 4>& images) {
  Eigen::MatrixXcd a(16, 16);
  Eigen::VectorXcd b(16);
  for (int j = 0; j < 4; ++j) {
    for (int k = 0; k < 4; ++k) {
      b[j * 4 + k] = 0.5 * (sigma2(k) * images[j]).trace();
      for (int m = 0; m < 4; ++m) {
        for (int n = 0; n < 4; ++n) {
          a(j * 4 + k, m * 4 + n) =
              0.5 * (sigma2(k) * sigma2(m) * sigma2(j) * sigma2(n)).trace();
        }
      }
    }
  }
  const Eigen::VectorXcd chi_vec =
      a.colPivHouseholderQr().solve(b);
  ProcessMatrix out;
  for (int m = 0; m < 4; ++m) {
    for (int n = 0; n < 4; ++n) out.chi(m, n) = chi_vec[m * 4 + n];
  }
  out.chi = 0.5 * (out.chi + out.chi.adjoint()).eval();
  return out;
}

ProcessTomographyResult reconstruct(
    const std::array<Eigen::Vector3d, 4>& probes,
    const std::array<StokesVector, 4>& outputs) {
  // Solve the affine map s_out = T r + c from four probe pairs.
  Eigen::Matrix4d frame;
  for (int i = 0; i < 4; ++i) {
    frame(i, 0) = 1.0;
    frame.row(i).tail<3>() = probes[i].transpose();
  }
  const Eigen::FullPivLU<Eigen::Matrix4d> lu(frame);
  if (!lu.isInvertible()) {
    throw input_error("process-tomography",
                      "probe states are affinely dependent");
  }
  Eigen::Matrix<double, 4, 3> rhs;
  for (int i = 0; i < 4; ++i) rhs.row(i) = outputs[i].s.transpose();
  const Eigen::Matrix<double, 4, 3> sol = lu.solve(rhs);

  ProcessTomographyResult out;
  out.translation = sol.row(0).transpose();
  out.linear_part = sol.bottomRows<3>().transpose();

  std::array<Eigen::Matrix2cd, 4> images;
  // Lambda(I) = I + c . sigma; Lambda(sigma_j) has Bloch columns of T.
  images[0] = Eigen::Matrix2cd::Identity();
  for (int i = 0; i < 3; ++i) images[0] += out.translation[i] * sigma2(i + 1);
  for (int j = 0; j < 3; ++j) {
    images[j + 1] = Eigen::Matrix2cd::Zero();
    for (int i = 0; i < 3; ++i) {
      images[j + 1] += out.linear_part(i, j) * sigma2(i + 1);
    }
  }
  out.process = chi_from_basis_action(images);
  out.fidelity_identity = process_fidelity(out.process);
  return out;
}

}  // namespace

double ProcessMatrix::trace_preservation_defect() const {
  Eigen::Matrix2cd acc = Eigen::Matrix2cd::Zero();
  for (int m = 0; m < 4; ++m) {
    for (int n = 0; n < 4; ++n) {
      acc += chi(m, n) * sigma2(n) * sigma2(m);
    }
  }
  return (acc - Eigen::Matrix2cd::Identity()).cwiseAbs().maxCoeff();
}

bool ProcessMatrix::trace_preserving(double tol) const {
  return trace_preservation_defect() <= tol;
}

Eigen::Matrix2cd apply_process(const ProcessMatrix& process,
                               const Eigen::Matrix2cd& rho) {
  Eigen::Matrix2cd out = Eigen::Matrix2cd::Zero();
  for (int m = 0; m < 4; ++m) {
    for (int n = 0; n < 4; ++n) {
      out += process.chi(m, n) * sigma2(m) * rho * sigma2(n);
    }
  }
  return out;
}

ProcessMatrix process_of_unitary(const Eigen::Matrix2cd& u) {
  // U = sum_m c_m sigma_m with c_m = Tr[sigma_m U]/2; chi = c c^dag.
  Eigen::Vector4cd c;
  for (int m = 0; m < 4; ++m) c[m] = 0.5 * (sigma2(m) * u).trace();
  ProcessMatrix out;
  out.chi = c * c.adjoint();
  return out;
}

Eigen::Matrix2cd apply_polarization_channel(const PolarizationChannel& channel,
                                            const Eigen::Matrix2cd& rho) {
  if (channel.depolarization < 0.0 || channel.depolarization > 1.0) {
    throw domain_error("process", "depolarization outside [0,1]",
                       {{"value", std::to_string(channel.depolarization)}});
  }
  if (!(channel.arm_imbalance > 0.0)) {
    throw domain_error("process", "arm imbalance must be positive",
                       {{"value", std::to_string(channel.arm_imbalance)}});
  }
  Eigen::Matrix2cd k = Eigen::Matrix2cd::Identity();
  k(0, 0) = std::sqrt(channel.arm_imbalance);
  Eigen::Matrix2cd out = k * rho * k.adjoint();
  const double tr = out.trace().real();
  if (!(tr > 0.0)) {
    throw domain_error("process", "channel annihilates the state");
  }
  out /= tr;

  const double p = channel.depolarization;
  out = (1.0 - p) * out +
        p * 0.5 * Eigen::Matrix2cd::Identity() * out.trace();

  const complex<double> ph = std::exp(complex<double>(0.0, channel.residual_phase));
  Eigen::Matrix2cd z = Eigen::Matrix2cd::Identity();
  z(1, 1) = ph;
  return z * out * z.adjoint();
}

std::array<Eigen::Vector3d, 4> standard_probe_states() {
  // H, V, D, L in the Bloch convention H=+x, D=+y, R=+z.
  return {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(-1, 0, 0),
          Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, 0, -1)};
}

ProcessTomographyResult process_tomography(
    const std::array<StokesVector, 4>& outputs) {
  return process_tomography(standard_probe_states(), outputs);
}

ProcessTomographyResult process_tomography(
    const std::array<Eigen::Vector3d, 4>& probes,
    const std::array<StokesVector, 4>& outputs) {
  ProcessTomographyResult out = reconstruct(probes, outputs);

  // Propagate Stokes uncertainties to Re chi00 by one-sided differences,
  // one independent component at a time.
  double var = 0.0;
  for (int i = 0; i < 4; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double s = outputs[i].sigma[c];
      if (s <= 0.0) continue;
      std::array<StokesVector, 4> bumped = outputs;
      bumped[i].s[c] += s;
      const ProcessTomographyResult alt = reconstruct(probes, bumped);
      const double d = alt.fidelity_identity - out.fidelity_identity;
      var += d * d;
    }
  }
  out.fidelity_identity_sigma = std::sqrt(var);
  return out;
}

double process_fidelity(const ProcessMatrix& process) {
  return process.chi(0, 0).real();
}

StokesVector measure_stokes(const Eigen::Matrix2cd& rho,
                            double photons_per_basis, CounterRng& rng) {
  if (!(photons_per_basis > 0.0)) {
    throw input_error("process", "photon number must be positive",
                      {{"value", std::to_string(photons_per_basis)}});
  }
  const Eigen::Vector3d r = bloch_of_state(rho);
  StokesVector out;
  for (int c = 0; c < 3; ++c) {
    const double p_plus = 0.5 * (1.0 + r[c]);
    const std::int64_t n = rng.poisson(photons_per_basis);
    if (n == 0) {
      throw input_error("process", "no photons recorded in analysis basis",
                        {{"component", std::to_string(c)}});
    }
    const std::int64_t plus = rng.binomial(n, p_plus);
    const std::int64_t minus = n - plus;
    const double total = static_cast<double>(n);
    out.s[c] = (static_cast<double>(plus) - static_cast<double>(minus)) / total;
    // Binomial spread of the normalized difference.
    out.sigma[c] = std::sqrt(std::max(
        (1.0 - out.s[c] * out.s[c]) / total, 1.0 / (total * total)));
  }
  return out;
}

}  // namespace iontel
