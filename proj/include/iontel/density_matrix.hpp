#pragma once

#include <Eigen/Dense>

#include "iontel/pauli.hpp"

namespace iontel {

// Validation tolerances for physical density matrices.
inline constexpr double kHermitianTol = 1e-12;
inline constexpr double kTraceTol = 1e-12;
inline constexpr double kEigenvalueTol = -1e-10;

// Two-qubit basis ordering, photon qubit first:
//   0: |R, -3/2>   1: |R, +1/2>   2: |L, -3/2>   3: |L, +1/2>
// with |R> and |-3/2> mapped to +z on their Bloch spheres.

class DensityMatrix {
 public:
  explicit DensityMatrix(Eigen::MatrixXcd m);

  // Symmetrizes and renormalizes the trace before validating; for matrices
  // assembled from floating-point pipelines that are physical up to roundoff.
  static DensityMatrix from_hermitian_candidate(const Eigen::MatrixXcd& m);

  static DensityMatrix pure(const Eigen::VectorXcd& psi);
  static DensityMatrix maximally_mixed(int dim);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXcd& matrix() const { return m_; }
  complexd operator()(int r, int c) const { return m_(r, c); }

 private:
  Eigen::MatrixXcd m_;
};

// |Psi(w)> = sqrt(w)|R,-3/2> + e^{i phase} sqrt(1-w)|L,+1/2>.
Eigen::Vector4cd ideal_state(double weight_r, double phase);

// ideal_state with equal weights.
Eigen::Vector4cd bell_state(double phase);

template <typename Derived>
double purity_of(const Eigen::MatrixBase<Derived>& rho) {
  return (rho * rho).trace().real();
}

inline double purity(const DensityMatrix& rho) { return purity_of(rho.matrix()); }

// Overlap <psi|rho|psi> of a (normalized) pure target with a state.
template <typename DerivedR, typename DerivedV>
double fidelity_of(const Eigen::MatrixBase<DerivedR>& rho,
                   const Eigen::MatrixBase<DerivedV>& psi) {
  return std::real(psi.dot(rho * psi));
}

double fidelity(const DensityMatrix& rho, const Eigen::VectorXcd& psi);

// Fidelity ceiling at a given purity in the form used for the entangled-state
// bound, 0.5 (1 + sqrt(2P - 1)); valid for P in [0.5, 1].
double max_fidelity_for_purity(double purity);

// Tight ceiling on the overlap of any dim-dimensional state of purity P with
// a fixed pure state: 1/d + sqrt((1 - 1/d)(P - 1/d)).
double purity_overlap_bound(double purity, int dim);

struct BellOverlap {
  double value = 0.0;
  double phase = 0.0;  // maximizing relative phase of the Bell target
};

// max_phi <Phi(phi)|rho|Phi(phi)> with |Phi(phi)> = bell_state(phi); the
// maximum over the relative phase only is closed form:
// 0.5 (rho_00 + rho_33) + |rho_03|.
BellOverlap bell_overlap(const DensityMatrix& rho);
double bell_fidelity(const DensityMatrix& rho);

// Same maximization against ideal_state(weight_r, phi):
// w rho_00 + (1-w) rho_33 + 2 sqrt(w(1-w)) |rho_03|.
BellOverlap ideal_overlap(const Eigen::Matrix4cd& rho, double weight_r);

// Correlation table S_ij = Tr[rho sigma_i (x) sigma_j], photon index first.
using PauliTable = Eigen::Matrix4d;

PauliTable pauli_expand(const DensityMatrix& rho);
PauliTable pauli_expand_of(const Eigen::Matrix4cd& rho);

// Inverse of pauli_expand: 1/4 sum_ij S_ij sigma_i (x) sigma_j.
Eigen::Matrix4cd pauli_compose(const PauliTable& s);

// (1-p) |Psi(w)><Psi(w)| + p I/4.
DensityMatrix werner_state(double weight_r, double depolarization,
                           double phase = 0.0);

// Depolarization p with werner purity 1 - 1.5 p + 0.75 p^2 equal to target.
double depolarization_for_purity(double target_purity);

double trace_distance(const DensityMatrix& a, const DensityMatrix& b);
double trace_distance_of(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b);

}  // namespace iontel
