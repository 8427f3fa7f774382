#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>

#include "iontel/rng.hpp"

namespace iontel {

// Polarization state summary of one probe measurement. `s` is the Bloch
// (Stokes) vector normalized to the total flux; `sigma` holds per-component
// one-standard-deviation uncertainties (zero means exact).
struct StokesVector {
  Eigen::Vector3d s = Eigen::Vector3d::Zero();
  Eigen::Vector3d sigma = Eigen::Vector3d::Zero();
};

// Single-qubit channel in the chi (Pauli process) representation:
// rho_out = sum_{mn} chi(m,n) sigma_m rho sigma_n.
struct ProcessMatrix {
  Eigen::Matrix4cd chi = Eigen::Matrix4cd::Zero();

  // Largest deviation of sum_{mn} chi(m,n) sigma_n sigma_m from identity.
  double trace_preservation_defect() const;
  bool trace_preserving(double tol = 1e-6) const;
};

// Apply a chi-represented channel to a single-qubit density matrix.
Eigen::Matrix2cd apply_process(const ProcessMatrix& process,
                               const Eigen::Matrix2cd& rho);

// chi matrix of a unitary channel rho -> U rho U^dag.
ProcessMatrix process_of_unitary(const Eigen::Matrix2cd& u);

// Polarization-transformation stage of the converter model, applied to the
// photon qubit alone: arm transmission imbalance (diag(sqrt(r),1), then
// renormalized), isotropic depolarization, and a residual phase rotation
// about z.
struct PolarizationChannel {
  double depolarization = 0.0;  // in [0,1]
  double residual_phase = 0.0;  // radians
  double arm_imbalance = 1.0;   // transmission ratio of the two arms, > 0
};

Eigen::Matrix2cd apply_polarization_channel(const PolarizationChannel& channel,
                                            const Eigen::Matrix2cd& rho);

// Bloch vectors of the standard probe set {H, V, D, L}.
std::array<Eigen::Vector3d, 4> standard_probe_states();

struct ProcessTomographyResult {
  ProcessMatrix process;
  double fidelity_identity = 0.0;        // Re chi(0,0)
  double fidelity_identity_sigma = 0.0;  // propagated from Stokes sigmas
  // Affine map rho -> T r + c recovered from the probe data.
  Eigen::Matrix3d linear_part = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Reconstruct the channel from output Stokes vectors of the four standard
// probes, in the order returned by standard_probe_states(). The probe set
// spans an affine frame, so the map is recovered by direct inversion; chi
// follows from a least-squares projection onto the Pauli process basis.
ProcessTomographyResult process_tomography(
    const std::array<StokesVector, 4>& outputs);

// As above with explicit probe directions (must be affinely independent).
ProcessTomographyResult process_tomography(
    const std::array<Eigen::Vector3d, 4>& probes,
    const std::array<StokesVector, 4>& outputs);

double process_fidelity(const ProcessMatrix& process);

// Measure the Stokes vector of a qubit state from `photons_per_basis`
// simulated detection events per analysis basis, with Poissonian counting
// noise. Draws from `rng`.
StokesVector measure_stokes(const Eigen::Matrix2cd& rho,
                            double photons_per_basis, CounterRng& rng);

}  // namespace iontel
