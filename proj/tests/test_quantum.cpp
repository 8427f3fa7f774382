#include <doctest.h>

#include <cmath>

#include "iontel/density_matrix.hpp"
#include "iontel/pauli.hpp"
#include "test_util.hpp"

using namespace iontel;

TEST_SUITE("states") {

TEST_CASE("ideal state amplitudes and ordering") {
  const double w = 2.0 / 3.0;
  const Eigen::Vector4cd psi = ideal_state(w, 0.3);
  CHECK(psi.norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(psi[0].real() == doctest::Approx(std::sqrt(w)).epsilon(1e-12));
  CHECK(psi[0].imag() == doctest::Approx(0.0));
  CHECK(psi[1] == complexd(0.0, 0.0));
  CHECK(psi[2] == complexd(0.0, 0.0));
  CHECK(std::abs(psi[3]) == doctest::Approx(std::sqrt(1.0 - w)).epsilon(1e-12));
  CHECK(std::arg(psi[3]) == doctest::Approx(0.3).epsilon(1e-12));
  // Equal weights reduce to the Bell form.
  const Eigen::Vector4cd b = bell_state(0.0);
  CHECK(b[0].real() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
  CHECK(b[3].real() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-12));
}

TEST_CASE("tensor ordering puts the photon first") {
  // kron(diag(1,0), diag(0,1)) must populate index 1 = first-qubit up,
  // second-qubit down.
  const Eigen::Matrix2cd up = axis_projector(Axis::Z, 1);
  const Eigen::Matrix2cd down = axis_projector(Axis::Z, -1);
  const Eigen::Matrix4cd m = kron(up, down);
  CHECK(m(1, 1).real() == doctest::Approx(1.0));
  CHECK(m.trace().real() == doctest::Approx(1.0));
}

TEST_CASE("bloch projector eigenstructure") {
  CounterRng rng(71, 0);
  for (int t = 0; t < 10; ++t) {
    Eigen::Vector3d n(rng.normal(), rng.normal(), rng.normal());
    n.normalize();
    const Eigen::Matrix2cd p = bloch_projector(n, 1);
    const Eigen::Matrix2cd q = bloch_projector(n, -1);
    CHECK((p * p - p).norm() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK((p + q - Eigen::Matrix2cd::Identity()).norm() ==
          doctest::Approx(0.0).epsilon(1e-12));
    CHECK((p * q).norm() == doctest::Approx(0.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bloch_projector(Eigen::Vector3d::UnitZ(), 2), Error);
}

TEST_CASE("purity and fidelity against direct forms") {
  CounterRng rng(72, 0);
  for (int t = 0; t < 20; ++t) {
    const Eigen::Matrix4cd rho = test::random_state(4, rng);
    const Eigen::Vector4cd psi = test::random_pure(4, rng);
    CHECK(purity_of(rho) ==
          doctest::Approx((rho * rho).trace().real()).epsilon(1e-12));
    CHECK(fidelity_of(rho, psi) ==
          doctest::Approx(std::real((psi.adjoint() * rho * psi)(0, 0)))
              .epsilon(1e-12));
  }
}

TEST_CASE("phase-maximized overlaps match a dense phase scan") {
  CounterRng rng(73, 0);
  for (int t = 0; t < 10; ++t) {
    const DensityMatrix rho{test::random_state(4, rng)};
    const BellOverlap bo = bell_overlap(rho);
    const BellOverlap io = ideal_overlap(rho.matrix(), 2.0 / 3.0);
    double best_b = 0.0, best_i = 0.0;
    for (int k = 0; k < 20000; ++k) {
      const double phi = 2.0 * M_PI * k / 20000.0;
      best_b = std::max(best_b, fidelity(rho, bell_state(phi)));
      best_i =
          std::max(best_i, fidelity(rho, ideal_state(2.0 / 3.0, phi)));
    }
    CHECK(bo.value == doctest::Approx(best_b).epsilon(1e-6));
    CHECK(io.value == doctest::Approx(best_i).epsilon(1e-6));
    CHECK(fidelity(rho, bell_state(bo.phase)) ==
          doctest::Approx(bo.value).epsilon(1e-10));
    CHECK(fidelity(rho, ideal_state(2.0 / 3.0, io.phase)) ==
          doctest::Approx(io.value).epsilon(1e-10));
  }
}

TEST_CASE("purity ceiling is attained by two-mass spectra") {
  // F and 1-F on two levels: P = F^2 + (1-F)^2 inverts to the ceiling.
  for (int k = 0; k <= 100; ++k) {
    const double f = 0.5 + 0.5 * k / 100.0;
    const double p = f * f + (1.0 - f) * (1.0 - f);
    CHECK(max_fidelity_for_purity(p) == doctest::Approx(f).epsilon(1e-10));
  }
  CHECK(max_fidelity_for_purity(1.0) == doctest::Approx(1.0));
  CHECK(max_fidelity_for_purity(0.5) == doctest::Approx(0.5));
  CHECK_THROWS_AS(max_fidelity_for_purity(0.2), Error);
  CHECK_THROWS_AS(max_fidelity_for_purity(1.2), Error);
}

TEST_CASE("dimension-aware overlap ceiling") {
  // rho = a|psi><psi| + (1-a)(I-|psi><psi|)/(d-1) sweeps the extremal family.
  const int d = 4;
  for (int k = 0; k <= 50; ++k) {
    const double a = 1.0 / d + (1.0 - 1.0 / d) * k / 50.0;
    const double rest = (1.0 - a) / (d - 1);
    const double p = a * a + (d - 1) * rest * rest;
    CHECK(purity_overlap_bound(p, d) == doctest::Approx(a).epsilon(1e-10));
  }
  CHECK(purity_overlap_bound(1.0, 2) == doctest::Approx(1.0));
}

TEST_CASE("mixed-state family purity closed form and inverse") {
  for (int k = 0; k <= 20; ++k) {
    const double p = k / 20.0;
    const DensityMatrix rho = werner_state(2.0 / 3.0, p);
    const double target = 1.0 - 1.5 * p + 0.75 * p * p;
    CHECK(purity(rho) == doctest::Approx(target).epsilon(1e-12));
    if (p < 1.0) {
      CHECK(depolarization_for_purity(target) ==
            doctest::Approx(p).epsilon(1e-9));
    }
  }
}

TEST_CASE("pauli expansion round trip") {
  CounterRng rng(74, 0);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Matrix4cd rho = test::random_state(4, rng);
    const PauliTable s = pauli_expand_of(rho);
    CHECK(s(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    const Eigen::Matrix4cd back = pauli_compose(s);
    CHECK((back - rho).norm() == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("trace distance matches the eigenvalue form") {
  CounterRng rng(75, 0);
  for (int t = 0; t < 10; ++t) {
    const Eigen::Matrix4cd a = test::random_state(4, rng);
    const Eigen::Matrix4cd b = test::random_state(4, rng);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(a - b);
    const double direct = 0.5 * es.eigenvalues().cwiseAbs().sum();
    CHECK(trace_distance_of(a, b) == doctest::Approx(direct).epsilon(1e-10));
    CHECK(trace_distance_of(a, a) == doctest::Approx(0.0));
  }
  const Eigen::Vector4cd e0 = Eigen::Vector4cd::Unit(0);
  const Eigen::Vector4cd e1 = Eigen::Vector4cd::Unit(1);
  CHECK(trace_distance_of(e0 * e0.adjoint(), e1 * e1.adjoint()) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("density matrix validation rejects unphysical input") {
  Eigen::Matrix2cd bad;
  bad << 1.0, complexd(0.0, 0.5), complexd(0.0, 0.5), 0.0;
  CHECK_THROWS_AS(DensityMatrix{bad}, Error);  // not Hermitian

  Eigen::Matrix2cd neg;
  neg << 1.2, 0.0, 0.0, -0.2;
  CHECK_THROWS_AS(DensityMatrix{neg}, Error);  // negative eigenvalue

  Eigen::Matrix2cd scaled;
  scaled << 0.9, 0.0, 0.0, 0.9;
  CHECK_THROWS_AS(DensityMatrix{scaled}, Error);  // trace != 1
  CHECK(DensityMatrix::from_hermitian_candidate(scaled).matrix()(0, 0).real() ==
        doctest::Approx(0.5));
}

}  // TEST_SUITE
