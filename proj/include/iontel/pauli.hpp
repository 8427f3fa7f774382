#pragma once

#include <Eigen/Dense>
#include <array>
#include <complex>

#include "iontel/errors.hpp"

namespace iontel {

using complexd = std::complex<double>;

enum class Axis { X = 1, Y = 2, Z = 3 };

inline int axis_index(Axis a) { return static_cast<int>(a); }

inline char axis_name(Axis a) {
  switch (a) {
    case Axis::X: return 'x';
    case Axis::Y: return 'y';
    default: return 'z';
  }
}

inline Axis axis_from_name(char c) {
  switch (c) {
    case 'x': case 'X': return Axis::X;
    case 'y': case 'Y': return Axis::Y;
    case 'z': case 'Z': return Axis::Z;
    default:
      throw input_error("quantum", "unknown axis name", std::string(1, c));
  }
}

// pauli(0) = identity, 1..3 = sigma_x, sigma_y, sigma_z.
inline const Eigen::Matrix2cd& pauli(int index) {
  static const std::array<Eigen::Matrix2cd, 4> kPauli = [] {
    std::array<Eigen::Matrix2cd, 4> p;
    const complexd i(0.0, 1.0);
    p[0] << 1, 0, 0, 1;
    p[1] << 0, 1, 1, 0;
    p[2] << 0, -i, i, 0;
    p[3] << 1, 0, 0, -1;
    return p;
  }();
  if (index < 0 || index > 3) {
    throw domain_error("quantum", "pauli index outside 0..3");
  }
  return kPauli[static_cast<std::size_t>(index)];
}

inline const Eigen::Matrix2cd& pauli(Axis a) { return pauli(axis_index(a)); }

template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> kron(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(
      a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Projector onto the +/- eigenstate of n.sigma for a unit Bloch vector n.
inline Eigen::Matrix2cd bloch_projector(const Eigen::Vector3d& n, int sign) {
  if (sign != 1 && sign != -1) {
    throw domain_error("quantum", "projector sign must be +1 or -1");
  }
  Eigen::Matrix2cd m = Eigen::Matrix2cd::Identity();
  for (int k = 0; k < 3; ++k) m += sign * n[k] * pauli(k + 1);
  return 0.5 * m;
}

inline Eigen::Matrix2cd axis_projector(Axis a, int sign) {
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[axis_index(a) - 1] = 1.0;
  return bloch_projector(n, sign);
}

// One- and two-qubit Pauli basis elements sigma_i (x) sigma_j.
inline Eigen::Matrix4cd pauli_pair(int i, int j) {
  return kron(pauli(i), pauli(j));
}

}  // namespace iontel
