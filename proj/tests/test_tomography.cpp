#include <doctest.h>

#include <cmath>
#include <vector>

#include "iontel/budget.hpp"
#include "iontel/density_matrix.hpp"
#include "iontel/tomography.hpp"
#include "test_util.hpp"

using namespace iontel;

namespace {

AnalysisModel test_model() {
  AnalysisModel m;
  m.larmor_frequency = 4.27e7;
  m.wavepacket = WavepacketShape{2e-6, wavepacket_tau(300e-9, 0.65), 3e-6};
  m.window_start = 2e-6;
  m.window_end = 2.3e-6;
  m.efficiency_plus = 1.0;
  m.efficiency_minus = 0.9;
  return m;
}

// Exact expected bin means of the precessing-analyzer measurement of `rho`,
// the independent forward model the estimators are tested against.
std::vector<CorrectedHistogram> noiseless_histograms(
    const Eigen::Matrix4cd& rho, const AnalysisModel& model, double scale) {
  const double dt = 10e-9;
  const int bins = 300;  // [0, 3 us]
  std::vector<CorrectedHistogram> out;
  for (const BasisSetting& s : BasisSetting::all()) {
    const Eigen::Matrix2cd pp = axis_projector(s.photon_axis, s.photon_sign);
    const double eff = model.relative_efficiency(s);
    CorrectedHistogram h;
    h.setting = s;
    h.bin_width = dt;
    h.window_start = model.window_start;
    h.window_end = model.window_end;
    h.duration = 1.0;
    h.values = Eigen::VectorXd::Zero(bins);
    h.variances = Eigen::VectorXd::Zero(bins);
    for (int i = 0; i < bins; ++i) {
      const double t1 = i * dt;
      const double t2 = t1 + dt;
      const double ei = model.wavepacket.envelope_integral(t1, t2) / dt;
      double v = 0.0;
      if (s.ion_axis == Axis::Z) {
        const Eigen::Matrix4cd op =
            kron(pp, axis_projector(s.ion_axis, s.ion_sign));
        v = ei * (op.transpose().cwiseProduct(rho)).sum().real();
      } else {
        const auto [ci, si] = model.wavepacket.modulated_integral(
            t1, t2, model.larmor_frequency);
        const double alpha = quadrature_rotation(s.ion_axis);
        const double is = s.ion_sign;
        const double tst =
            (kron(pp, 0.5 * pauli(0)).transpose().cwiseProduct(rho))
                .sum().real();
        const double tx =
            (kron(pp, 0.5 * is * pauli(1)).transpose().cwiseProduct(rho))
                .sum().real();
        const double ty =
            (kron(pp, 0.5 * is * pauli(2)).transpose().cwiseProduct(rho))
                .sum().real();
        const double ca = std::cos(alpha), sa = std::sin(alpha);
        v = ei * tst + (ci / dt) * (ca * tx + sa * ty) +
            (si / dt) * (-sa * tx + ca * ty);
      }
      h.values[i] = scale * eff * v;
    }
    out.push_back(h);
  }
  return out;
}

}  // namespace

TEST_SUITE("tomography") {

TEST_CASE("summaries require a complete consistent dataset") {
  const AnalysisModel model = test_model();
  CounterRng rng(91, 0);
  auto hists = noiseless_histograms(test::random_state(4, rng), model, 5e4);

  auto broken = hists;
  broken.pop_back();
  CHECK_THROWS_AS(summarize_settings(broken, model), Error);

  broken = hists;
  broken[3].setting = broken[2].setting;  // duplicate leaves one missing
  CHECK_THROWS_AS(summarize_settings(broken, model), Error);

  broken = hists;
  broken[7].bin_width *= 2.0;
  CHECK_THROWS_AS(summarize_settings(broken, model), Error);

  const DatasetSummary sum = summarize_settings(hists, model);
  CHECK(sum.settings.size() == 36);
  for (const auto& s : sum.settings) {
    if (s.setting.ion_axis != Axis::Z) CHECK(s.has_quadratures);
  }
}

TEST_CASE("correlation table recovers the state exactly on clean data") {
  const AnalysisModel model = test_model();
  CounterRng rng(92, 0);
  for (int t = 0; t < 5; ++t) {
    const Eigen::Matrix4cd rho = test::random_state(4, rng);
    const auto hists = noiseless_histograms(rho, model, 4e4);
    const DatasetSummary sum = summarize_settings(hists, model);
    const PauliEstimate est = estimate_correlations(sum, model);
    const PauliTable truth = pauli_expand_of(rho);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        CHECK(est.valid[i][j]);
        CHECK(std::abs(est.values(i, j) - truth(i, j)) < 1e-7);
      }
    }
    const Eigen::Matrix4cd lin = linear_reconstruct(est.values);
    CHECK(trace_distance_of(lin, rho) < 1e-7);
  }
}

TEST_CASE("full reconstruction reaches the truth on clean data") {
  const AnalysisModel model = test_model();
  CounterRng rng(93, 0);
  for (int t = 0; t < 3; ++t) {
    const Eigen::Matrix4cd rho = test::random_state(4, rng);
    const auto hists = noiseless_histograms(rho, model, 4e4);
    const Reconstruction r = reconstruct_state(hists, model);
    CHECK(r.mle.converged);
    CHECK(trace_distance_of(r.mle.rho.matrix(), rho) < 1e-5);
  }
}

TEST_CASE("likelihood terms mirror the summary") {
  const AnalysisModel model = test_model();
  CounterRng rng(94, 0);
  const auto hists = noiseless_histograms(test::random_state(4, rng), model,
                                          4e4);
  const DatasetSummary sum = summarize_settings(hists, model);
  const auto counts = pseudo_counts(sum, model);
  CHECK(counts.size() == 36);
  const double ew = model.window_envelope_mass(sum.bin_width);
  for (const auto& c : counts) {
    CHECK(c.window_mass == doctest::Approx(ew));
    if (c.setting.ion_axis == Axis::Z) {
      CHECK(c.cos_mass == 0.0);
      CHECK_FALSE(c.has_quadratures);
    } else {
      CHECK(c.has_quadratures);
      CHECK(std::abs(c.cos_mass) + std::abs(c.sin_mass) > 0.0);
    }
    CHECK(c.relative_efficiency ==
          doctest::Approx(model.relative_efficiency(c.setting)));
  }
}

static std::vector<CountSummary> static_projector_counts(
    const Eigen::Matrix4cd& rho, double scale) {
  // window_mass 1 with the transverse mass on the setting's own axis makes
  // the windowed effect the plain static projector.
  std::vector<CountSummary> counts;
  for (const BasisSetting& s : BasisSetting::all()) {
    const Eigen::Matrix4cd op =
        kron(axis_projector(s.photon_axis, s.photon_sign),
             axis_projector(s.ion_axis, s.ion_sign));
    CountSummary c;
    c.setting = s;
    c.count = scale * (op.transpose().cwiseProduct(rho)).sum().real();
    c.window_mass = 1.0;
    c.cos_mass = s.ion_axis == Axis::X ? 1.0 : 0.0;
    c.sin_mass = s.ion_axis == Axis::Y ? 1.0 : 0.0;
    counts.push_back(c);
  }
  return counts;
}

TEST_CASE("static noiseless tables reconstruct the generating state") {
  CounterRng rng(95, 0);
  for (int t = 0; t < 5; ++t) {
    const Eigen::Matrix4cd rho = test::random_state(4, rng);
    const auto counts = static_projector_counts(rho, 2e4);
    const MleResult r =
        mle_reconstruct(counts, Eigen::Matrix4cd::Identity() / 4.0);
    CHECK(r.converged);
    CHECK(trace_distance_of(r.rho.matrix(), rho) < 1e-5);
  }
}

TEST_CASE("reconstructions from adversarial tables stay physical") {
  CounterRng rng(96, 0);
  for (int t = 0; t < 25; ++t) {
    std::vector<CountSummary> counts;
    for (const BasisSetting& s : BasisSetting::all()) {
      CountSummary c;
      c.setting = s;
      // Mix of empty, tiny, huge, and negative post-subtraction counts.
      const double u = rng.uniform();
      if (u < 0.25) {
        c.count = 0.0;
      } else if (u < 0.5) {
        c.count = -20.0 * rng.uniform();
      } else {
        c.count = std::floor(rng.uniform(0.0, 5e4));
      }
      c.variance = c.count > 0.0 ? c.count + 400.0 : 400.0;
      c.window_mass = 1.0;
      c.cos_mass = s.ion_axis == Axis::X ? 1.0 : 0.0;
      c.sin_mass = s.ion_axis == Axis::Y ? 1.0 : 0.0;
      counts.push_back(c);
    }
    MleResult r;
    try {
      r = mle_reconstruct(counts, Eigen::Matrix4cd::Identity() / 4.0);
    } catch (const MleError& e) {
      r = e.best;  // iteration cap still must hand back a physical state
    }
    const Eigen::MatrixXcd& m = r.rho.matrix();
    CHECK((m - m.adjoint()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(m.trace().real() == doctest::Approx(1.0).epsilon(1e-10));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    CHECK(es.eigenvalues().minCoeff() > -1e-10);
  }
}

TEST_CASE("per-group scale changes do not move the estimate") {
  CounterRng rng(97, 0);
  const Eigen::Matrix4cd rho = test::random_state(4, rng);
  auto counts = static_projector_counts(rho, 2e4);
  const MleResult base =
      mle_reconstruct(counts, Eigen::Matrix4cd::Identity() / 4.0);
  // Scale one whole acquisition group: absorbed by its normalization.
  for (auto& c : counts) {
    if (c.setting.photon_axis == Axis::X && c.setting.ion_axis == Axis::Y) {
      c.count *= 3.0;
    }
  }
  const MleResult scaled =
      mle_reconstruct(counts, Eigen::Matrix4cd::Identity() / 4.0);
  CHECK(trace_distance_of(base.rho.matrix(), scaled.rho.matrix()) < 1e-5);
}

TEST_CASE("reconstruction input validation") {
  CHECK_THROWS_AS(mle_reconstruct({}, Eigen::Matrix4cd::Identity() / 4.0),
                  Error);
  CounterRng rng(98, 0);
  auto counts = static_projector_counts(test::random_state(4, rng), 1e4);
  counts[0].relative_efficiency = 0.0;
  CHECK_THROWS_AS(mle_reconstruct(counts, Eigen::Matrix4cd::Identity() / 4.0),
                  Error);
}

TEST_CASE("error bars respond to count and quadrature perturbations") {
  const AnalysisModel model = test_model();
  CounterRng rng(99, 0);
  // A slightly mixed state at finite scale: nonzero variances everywhere.
  const Eigen::Matrix4cd rho =
      0.92 * test::random_state(4, rng) + 0.08 * Eigen::Matrix4cd::Identity() / 4.0;
  auto hists = noiseless_histograms(rho, model, 2e4);
  for (auto& h : hists) {
    for (int i = 0; i < h.bins(); ++i) {
      h.variances[i] = std::max(h.values[i], 0.0);
    }
  }
  const DatasetSummary sum = summarize_settings(hists, model);
  const Reconstruction r = reconstruct_state(hists, model);
  const double sigma =
      error_bars(sum, model, r.mle, StateFunctional::BellFidelity);
  CHECK(sigma > 0.0);
  CHECK(sigma < 0.05);
}

}  // TEST_SUITE
