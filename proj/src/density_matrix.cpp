#include "iontel/density_matrix.hpp"

#include <cmath>

#include "iontel/errors.hpp"

namespace iontel {

namespace {

void validate_physical(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols() || (m.rows() != 2 && m.rows() != 4)) {
    throw domain_error("quantum", "density matrix must be 2x2 or 4x4",
                       "rows=" + std::to_string(m.rows()));
  }
  const double herm = (m - m.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTol) {
    throw domain_error("quantum", "density matrix not Hermitian",
                       "max deviation " + std::to_string(herm));
  }
  const double trace_dev = std::abs(m.trace() - complexd(1.0, 0.0));
  if (trace_dev > kTraceTol) {
    throw domain_error("quantum", "density matrix trace differs from one",
                       "deviation " + std::to_string(trace_dev));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < kEigenvalueTol) {
    throw domain_error("quantum", "density matrix has a negative eigenvalue",
                       "min " + std::to_string(es.eigenvalues().minCoeff()));
  }
}

}  // namespace

DensityMatrix::DensityMatrix(Eigen::MatrixXcd m) : m_(std::move(m)) {
  validate_physical(m_);
}

DensityMatrix DensityMatrix::from_hermitian_candidate(const Eigen::MatrixXcd& m) {
  Eigen::MatrixXcd h = 0.5 * (m + m.adjoint());
  const double tr = h.trace().real();
  if (!(tr > 0.0)) {
    throw domain_error("quantum", "candidate has non-positive trace");
  }
  h /= tr;
  return DensityMatrix(std::move(h));
}

DensityMatrix DensityMatrix::pure(const Eigen::VectorXcd& psi) {
  const double norm = psi.norm();
  if (!(norm > 0.0)) {
    throw domain_error("quantum", "state vector has zero norm");
  }
  Eigen::VectorXcd v = psi / norm;
  return DensityMatrix(v * v.adjoint());
}

DensityMatrix DensityMatrix::maximally_mixed(int dim) {
  return DensityMatrix(Eigen::MatrixXcd::Identity(dim, dim) / double(dim));
}

Eigen::Vector4cd ideal_state(double weight_r, double phase) {
  if (!(weight_r >= 0.0 && weight_r <= 1.0)) {
    throw domain_error("quantum", "weight_r outside [0, 1]",
                       std::to_string(weight_r));
  }
  Eigen::Vector4cd psi = Eigen::Vector4cd::Zero();
  psi[0] = std::sqrt(weight_r);
  psi[3] = std::polar(std::sqrt(1.0 - weight_r), phase);
  return psi;
}

Eigen::Vector4cd bell_state(double phase) { return ideal_state(0.5, phase); }

double fidelity(const DensityMatrix& rho, const Eigen::VectorXcd& psi) {
  if (psi.size() != rho.dim()) {
    throw domain_error("quantum", "state dimension mismatch",
                       std::to_string(psi.size()) + " vs " +
                           std::to_string(rho.dim()));
  }
  if (std::abs(psi.norm() - 1.0) > 1e-9) {
    throw domain_error("quantum", "target state not normalized");
  }
  return fidelity_of(rho.matrix(), psi);
}

double max_fidelity_for_purity(double purity) {
  if (!(purity >= 0.5 - 1e-12 && purity <= 1.0 + 1e-12)) {
    throw domain_error("quantum", "purity outside [0.5, 1]",
                       std::to_string(purity));
  }
  const double arg = std::max(2.0 * purity - 1.0, 0.0);
  return 0.5 * (1.0 + std::sqrt(arg));
}

double purity_overlap_bound(double purity, int dim) {
  if (dim < 2) throw domain_error("quantum", "dimension must be >= 2");
  const double invd = 1.0 / double(dim);
  if (!(purity >= invd - 1e-12 && purity <= 1.0 + 1e-12)) {
    throw domain_error("quantum", "purity outside [1/d, 1]",
                       std::to_string(purity));
  }
  return invd + std::sqrt((1.0 - invd) * std::max(purity - invd, 0.0));
}

BellOverlap bell_overlap(const DensityMatrix& rho) {
  if (rho.dim() != 4) {
    throw domain_error("quantum", "Bell overlap needs a two-qubit state");
  }
  const complexd r03 = rho(0, 3);
  BellOverlap out;
  out.value = 0.5 * (std::real(rho(0, 0)) + std::real(rho(3, 3))) + std::abs(r03);
  out.phase = std::abs(r03) > 0.0 ? -std::arg(r03) : 0.0;
  return out;
}

double bell_fidelity(const DensityMatrix& rho) { return bell_overlap(rho).value; }

BellOverlap ideal_overlap(const Eigen::Matrix4cd& rho, double weight_r) {
  if (!(weight_r >= 0.0 && weight_r <= 1.0)) {
    throw domain_error("quantum", "weight_r outside [0, 1]",
                       std::to_string(weight_r));
  }
  const complexd r03 = rho(0, 3);
  BellOverlap out;
  out.value = weight_r * std::real(rho(0, 0)) +
              (1.0 - weight_r) * std::real(rho(3, 3)) +
              2.0 * std::sqrt(weight_r * (1.0 - weight_r)) * std::abs(r03);
  out.phase = std::abs(r03) > 0.0 ? -std::arg(r03) : 0.0;
  return out;
}

PauliTable pauli_expand_of(const Eigen::Matrix4cd& rho) {
  PauliTable s;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      s(i, j) = (rho * pauli_pair(i, j)).trace().real();
    }
  }
  return s;
}

PauliTable pauli_expand(const DensityMatrix& rho) {
  if (rho.dim() != 4) {
    throw domain_error("quantum", "Pauli table needs a two-qubit state");
  }
  return pauli_expand_of(Eigen::Matrix4cd(rho.matrix()));
}

Eigen::Matrix4cd pauli_compose(const PauliTable& s) {
  Eigen::Matrix4cd rho = Eigen::Matrix4cd::Zero();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      rho += 0.25 * s(i, j) * pauli_pair(i, j);
    }
  }
  return rho;
}

DensityMatrix werner_state(double weight_r, double depolarization, double phase) {
  if (!(depolarization >= 0.0 && depolarization <= 1.0)) {
    throw domain_error("quantum", "depolarization outside [0, 1]",
                       std::to_string(depolarization));
  }
  const Eigen::Vector4cd psi = ideal_state(weight_r, phase);
  Eigen::Matrix4cd m = (1.0 - depolarization) * (psi * psi.adjoint()) +
                       depolarization * 0.25 * Eigen::Matrix4cd::Identity();
  return DensityMatrix::from_hermitian_candidate(m);
}

double depolarization_for_purity(double target_purity) {
  if (!(target_purity >= 0.25 && target_purity <= 1.0)) {
    throw domain_error("quantum", "werner purity outside [0.25, 1]",
                       std::to_string(target_purity));
  }
  // Purity(p) = 1 - 1.5 p + 0.75 p^2; smaller root of the quadratic.
  return 1.0 - std::sqrt((4.0 * target_purity - 1.0) / 3.0);
}

double trace_distance_of(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(a - b,
                                                     Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  return trace_distance_of(a.matrix(), b.matrix());
}

}  // namespace iontel
