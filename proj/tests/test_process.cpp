#include <doctest.h>

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "iontel/density_matrix.hpp"
#include "iontel/process.hpp"
#include "iontel/rng.hpp"
#include "iontel/simulator.hpp"
#include "test_util.hpp"

namespace {

using iontel::complexd;

Eigen::Matrix2cd qubit_from_bloch(const Eigen::Vector3d& r) {
  Eigen::Matrix2cd out;
  out << 0.5 * (1.0 + r[2]), 0.5 * complexd(r[0], -r[1]),
      0.5 * complexd(r[0], r[1]), 0.5 * (1.0 - r[2]);
  return out;
}

Eigen::Vector3d bloch_of(const Eigen::Matrix2cd& rho) {
  return {2.0 * rho(1, 0).real(), 2.0 * rho(1, 0).imag(),
          (rho(0, 0) - rho(1, 1)).real()};
}

Eigen::Matrix2cd random_qubit_state(iontel::CounterRng& rng) {
  return iontel::test::random_state(2, rng);
}

}  // namespace

TEST_SUITE("process") {

TEST_CASE("unitary channels give rank-one chi matrices") {
  const iontel::ProcessMatrix ident =
      iontel::process_of_unitary(Eigen::Matrix2cd::Identity());
  CHECK(ident.chi(0, 0).real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(iontel::process_fidelity(ident) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ident.trace_preservation_defect() < 1e-10);

  Eigen::Matrix2cd sx;
  sx << 0.0, 1.0, 1.0, 0.0;
  const iontel::ProcessMatrix flip = iontel::process_of_unitary(sx);
  CHECK(flip.chi(1, 1).real() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(flip.chi(0, 0)) < 1e-12);

  iontel::CounterRng rng(211, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Matrix2cd u = iontel::test::random_unitary(2, rng);
    const iontel::ProcessMatrix proc = iontel::process_of_unitary(u);
    CHECK(proc.trace_preserving(1e-8));

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(proc.chi);
    CHECK(es.eigenvalues()(3) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(es.eigenvalues()(2)) < 1e-10);

    const Eigen::Matrix2cd rho = random_qubit_state(rng);
    const Eigen::Matrix2cd direct = u * rho * u.adjoint();
    const Eigen::Matrix2cd via_chi = iontel::apply_process(proc, rho);
    CHECK((direct - via_chi).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("depolarizing channel reconstructs in closed form") {
  const double p = 0.2;
  const auto probes = iontel::standard_probe_states();
  std::array<iontel::StokesVector, 4> outputs;
  for (std::size_t i = 0; i < 4; ++i) {
    outputs[i].s = (1.0 - p) * probes[i];  // Bloch contraction by 1 - p
  }
  const iontel::ProcessTomographyResult result =
      iontel::process_tomography(outputs);

  CHECK(result.fidelity_identity ==
        doctest::Approx(1.0 - 0.75 * p).epsilon(1e-9));
  CHECK(result.process.chi(0, 0).real() ==
        doctest::Approx(1.0 - 0.75 * p).epsilon(1e-9));
  for (int k = 1; k < 4; ++k) {
    CHECK(result.process.chi(k, k).real() ==
          doctest::Approx(0.25 * p).epsilon(1e-9));
  }
  CHECK((result.linear_part - (1.0 - p) * Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  CHECK(result.translation.cwiseAbs().maxCoeff() < 1e-9);
  CHECK(result.process.trace_preservation_defect() < 1e-8);

  // The chi representation must act like the channel it was built from.
  iontel::CounterRng rng(223, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::Matrix2cd rho = random_qubit_state(rng);
    const Eigen::Matrix2cd expect =
        (1.0 - p) * rho + p * 0.5 * Eigen::Matrix2cd::Identity();
    const Eigen::Matrix2cd got = iontel::apply_process(result.process, rho);
    CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("identity data reconstructs the identity channel") {
  const auto probes = iontel::standard_probe_states();
  std::array<iontel::StokesVector, 4> outputs;
  for (std::size_t i = 0; i < 4; ++i) outputs[i].s = probes[i];
  const iontel::ProcessTomographyResult result =
      iontel::process_tomography(outputs);
  CHECK(std::abs(result.fidelity_identity - 1.0) < 1e-9);
  CHECK((result.linear_part - Eigen::Matrix3d::Identity())
            .cwiseAbs()
            .maxCoeff() < 1e-9);
  CHECK(result.fidelity_identity_sigma == doctest::Approx(0.0));
}

TEST_CASE("probe set spans an affine frame") {
  const auto probes = iontel::standard_probe_states();
  Eigen::Matrix3d diffs;
  for (int i = 0; i < 3; ++i) {
    diffs.col(i) = probes[static_cast<std::size_t>(i + 1)] - probes[0];
  }
  CHECK(std::abs(diffs.determinant()) > 0.1);
  for (const Eigen::Vector3d& r : probes) {
    CHECK(r.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }

  // Coplanar probes cannot fix the affine map.
  std::array<Eigen::Vector3d, 4> flat = {
      Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, -1),
      Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(-1, 0, 0)};
  std::array<iontel::StokesVector, 4> outputs;
  for (std::size_t i = 0; i < 4; ++i) outputs[i].s = flat[i];
  CHECK_THROWS_AS(iontel::process_tomography(flat, outputs), iontel::Error);
}

TEST_CASE("polarization channel closed forms") {
  iontel::CounterRng rng(229, 0);

  SUBCASE("pure depolarization contracts the Bloch vector") {
    iontel::PolarizationChannel ch;
    ch.depolarization = 0.3;
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::Matrix2cd rho = random_qubit_state(rng);
      const Eigen::Matrix2cd expect =
          0.7 * rho + 0.3 * 0.5 * Eigen::Matrix2cd::Identity();
      CHECK((iontel::apply_polarization_channel(ch, rho) - expect)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    }
  }

  SUBCASE("residual phase rotates about z") {
    iontel::PolarizationChannel ch;
    ch.residual_phase = 0.63;
    Eigen::Matrix2cd z = Eigen::Matrix2cd::Identity();
    z(1, 1) = std::exp(complexd(0.0, ch.residual_phase));
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::Matrix2cd rho = random_qubit_state(rng);
      const Eigen::Matrix2cd expect = z * rho * z.adjoint();
      CHECK((iontel::apply_polarization_channel(ch, rho) - expect)
                .cwiseAbs()
                .maxCoeff() < 1e-12);
    }
  }

  SUBCASE("arm imbalance reweights the maximally mixed state") {
    iontel::PolarizationChannel ch;
    ch.arm_imbalance = 0.4;
    const Eigen::Matrix2cd mixed = 0.5 * Eigen::Matrix2cd::Identity();
    const Eigen::Vector3d r =
        bloch_of(iontel::apply_polarization_channel(ch, mixed));
    CHECK(r[2] == doctest::Approx((0.4 - 1.0) / (0.4 + 1.0)).epsilon(1e-12));
    CHECK(std::abs(r[0]) < 1e-12);
    CHECK(std::abs(r[1]) < 1e-12);
  }

  SUBCASE("single-qubit and two-qubit stages agree on product states") {
    iontel::PolarizationChannel ch;
    ch.depolarization = 0.12;
    ch.residual_phase = 0.4;
    ch.arm_imbalance = 0.7;
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::Matrix2cd photon = random_qubit_state(rng);
      const Eigen::Matrix2cd ion = random_qubit_state(rng);
      const Eigen::Matrix4cd joint =
          iontel::apply_converter_channel(ch, iontel::kron(photon, ion));
      const Eigen::Matrix4cd factored =
          iontel::kron(iontel::apply_polarization_channel(ch, photon), ion);
      CHECK((joint - factored).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("stokes measurement is calibrated") {
  iontel::CounterRng rng(233, 0);
  const Eigen::Vector3d truth =
      Eigen::Vector3d(0.3, -0.5, 0.6).normalized() * 0.8;
  const Eigen::Matrix2cd rho = qubit_from_bloch(truth);
  const double photons = 1e4;

  const int trials = 60;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d sigma_sum = Eigen::Vector3d::Zero();
  int contained = 0;
  for (int t = 0; t < trials; ++t) {
    const iontel::StokesVector m = iontel::measure_stokes(rho, photons, rng);
    mean += m.s;
    sigma_sum += m.sigma;
    bool inside = true;
    for (int k = 0; k < 3; ++k) {
      CHECK(m.sigma[k] > 0.0);
      inside = inside && std::abs(m.s[k] - truth[k]) < 4.0 * m.sigma[k];
    }
    contained += inside ? 1 : 0;
  }
  mean /= trials;
  sigma_sum /= trials;
  // Quoted sigma should match the binomial scale sqrt((1 - s^2)/N).
  for (int k = 0; k < 3; ++k) {
    const double expect = std::sqrt((1.0 - truth[k] * truth[k]) / photons);
    CHECK(sigma_sum[k] == doctest::Approx(expect).epsilon(0.15));
    CHECK(std::abs(mean[k] - truth[k]) <
          4.0 * expect / std::sqrt(static_cast<double>(trials)));
  }
  CHECK(contained >= trials - 3);
}

TEST_CASE("noisy process tomography stays within its error bars") {
  iontel::CounterRng rng(239, 0);
  const double p = 0.08;
  iontel::PolarizationChannel ch;
  ch.depolarization = p;
  const auto probes = iontel::standard_probe_states();
  const double truth_fid = 1.0 - 0.75 * p;

  int far = 0;
  for (int trial = 0; trial < 20; ++trial) {
    std::array<iontel::StokesVector, 4> outputs;
    for (std::size_t i = 0; i < 4; ++i) {
      const Eigen::Matrix2cd out_state = iontel::apply_polarization_channel(
          ch, qubit_from_bloch(probes[i]));
      outputs[i] = iontel::measure_stokes(out_state, 1e5, rng);
    }
    const iontel::ProcessTomographyResult result =
        iontel::process_tomography(outputs);
    CHECK(result.fidelity_identity_sigma > 0.0);
    if (std::abs(result.fidelity_identity - truth_fid) >
        4.0 * result.fidelity_identity_sigma) {
      ++far;
    }
  }
  CHECK(far <= 1);
}

}  // TEST_SUITE
