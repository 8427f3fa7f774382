#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "iontel/budget.hpp"
#include "iontel/density_matrix.hpp"
#include "iontel/errors.hpp"
#include "iontel/pauli.hpp"
#include "iontel/simulator.hpp"
#include "test_util.hpp"

namespace {

using iontel::ExperimentConfig;

// Single-detector setup without a conversion stage.
ExperimentConfig single_detector_config() {
  ExperimentConfig c;
  c.repetition_rate = 58e3;
  c.cgc_weight_R = 2.0 / 3.0;
  c.mixture_fraction_wanted = 0.5;
  c.branching_854 = 0.899;
  c.collection_halo = 0.0359;
  c.fiber_coupling = 0.39;
  c.window = 300e-9;
  c.wavepacket_window_fraction = 0.65;
  c.larmor_frequency = 42725660.0;
  c.depolarization_p = 0.0222;
  c.readout_infidelity = 0.0;
  c.detector_efficiencies = {0.30};
  c.dark_count_rates = {117.7};
  c.tomography_transmission = 0.78;
  c.acquisition_duration = 400.0;
  c.rng_seed = 7;
  return c;
}

// Two-detector setup with the conversion stage enabled.
ExperimentConfig two_detector_config() {
  ExperimentConfig c = single_detector_config();
  c.repetition_rate = 61.7e3;
  c.collection_halo = 0.036;
  c.detector_efficiencies = {0.70, 0.62};
  c.dark_count_rates = {58.7, 56.4};
  c.tomography_transmission = 0.865;
  c.rng_seed = 3;
  iontel::ConverterConfig conv;
  conv.fiber_transmission = 0.758;
  conv.external_efficiency = 0.265;
  conv.stabilization_duty = 0.875;
  conv.conversion_noise_rate = 11.4;
  conv.process_channel.depolarization = 0.0074;
  conv.process_channel.residual_phase = 0.02;
  conv.process_channel.arm_imbalance = 1.0;
  c.converter = conv;
  return c;
}

std::string thrown_message(const ExperimentConfig& c) {
  try {
    iontel::validate_config(c);
  } catch (const iontel::Error& e) {
    return e.what();
  }
  return {};
}

// Photon-side Bloch component a (1..3) of a two-qubit state.
double photon_bloch(const iontel::DensityMatrix& rho, int a) {
  return iontel::pauli_expand(rho)(a, 0);
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("config validation names the offending field") {
  ExperimentConfig c = single_detector_config();
  c.cgc_weight_R = 1.2;
  CHECK_THROWS_AS(iontel::validate_config(c), iontel::Error);
  CHECK(thrown_message(c).find("cgc_weight_R") != std::string::npos);

  c = single_detector_config();
  c.dark_count_rates = {117.7, 50.0};
  CHECK(thrown_message(c).find("dark_count_rates") != std::string::npos);

  c = single_detector_config();
  c.detector_efficiencies = {0.3, 0.3, 0.3};
  c.dark_count_rates = {1.0, 1.0, 1.0};
  CHECK(thrown_message(c).find("detector_efficiencies") != std::string::npos);

  c = single_detector_config();
  c.window = 2e-6;  // larger than signal_span
  CHECK(thrown_message(c).find("window") != std::string::npos);

  c = single_detector_config();
  c.readout_infidelity = 0.6;
  CHECK(thrown_message(c).find("readout_infidelity") != std::string::npos);

  c = single_detector_config();
  c.wavepacket_window_fraction = 1.0;
  CHECK(thrown_message(c).find("wavepacket_window_fraction") !=
        std::string::npos);

  c = single_detector_config();
  c.detector_efficiency_sigmas = {0.01, 0.01};
  CHECK(thrown_message(c).find("detector_efficiency_sigmas") !=
        std::string::npos);

  CHECK_NOTHROW(iontel::validate_config(single_detector_config()));
  CHECK_NOTHROW(iontel::validate_config(two_detector_config()));
}

TEST_CASE("true state follows the mixture closed forms") {
  ExperimentConfig c = single_detector_config();
  const double p = c.depolarization_p;
  const iontel::TrueState t = iontel::build_true_state(c);

  CHECK(t.weight == doctest::Approx(2.0 / 3.0));
  // (1-p) rho_pure + p I/4: purity and best-phase overlap in closed form.
  CHECK(t.purity ==
        doctest::Approx(1.0 - 1.5 * p + 0.75 * p * p).epsilon(1e-12));
  CHECK(t.fidelity_ideal == doctest::Approx(1.0 - 0.75 * p).epsilon(1e-12));
  CHECK(t.bell.value == doctest::Approx(iontel::bell_overlap(t.rho).value)
                               .epsilon(1e-12));
  // Unequal branch weights cost Bell overlap relative to the matched target.
  CHECK(t.bell.value < t.fidelity_ideal);

  SUBCASE("carving pins the branch weight at one half") {
    c.carving = true;
    const iontel::TrueState tc = iontel::build_true_state(c);
    CHECK(tc.weight == doctest::Approx(0.5));
    // Balanced weights: the matched target is the Bell state itself.
    CHECK(tc.fidelity_ideal ==
          doctest::Approx(tc.bell.value).epsilon(1e-12));
    CHECK(photon_bloch(tc.rho, 3) == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("converter channel is applied to the truth state") {
    const ExperimentConfig c2 = two_detector_config();
    const iontel::TrueState t2 = iontel::build_true_state(c2);
    Eigen::Matrix4cd m =
        (1.0 - c2.depolarization_p) *
            (iontel::ideal_state(c2.cgc_weight_R, 0.0) *
             iontel::ideal_state(c2.cgc_weight_R, 0.0).adjoint()) +
        c2.depolarization_p * 0.25 * Eigen::Matrix4cd::Identity();
    m = iontel::apply_converter_channel(c2.converter->process_channel, m);
    CHECK((t2.rho.matrix() - m).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(t2.purity ==
          doctest::Approx(iontel::purity(t2.rho)).epsilon(1e-12));
  }
}

TEST_CASE("converter channel matches the dephase-plus-depolarize oracle") {
  iontel::PolarizationChannel ch;
  ch.depolarization = 0.11;
  ch.residual_phase = 0.37;
  ch.arm_imbalance = 1.0;

  // Photon-side phase and photon-side depolarization commute, so the
  // balanced channel has a closed form to compare against.
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();
  Eigen::Matrix2cd z = id;
  z(1, 1) = std::exp(std::complex<double>(0.0, ch.residual_phase));
  const Eigen::Matrix4cd u = iontel::kron(z, id);

  iontel::CounterRng rng(314, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXcd rho = iontel::test::random_state(4, rng);
    Eigen::Matrix4cd expect = u * rho * u.adjoint();
    Eigen::Matrix2cd ion = Eigen::Matrix2cd::Zero();
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        ion(i, j) = expect(i, j) + expect(2 + i, 2 + j);
      }
    }
    expect = (1.0 - ch.depolarization) * expect +
             ch.depolarization * iontel::kron(Eigen::Matrix2cd(0.5 * id), ion);

    const Eigen::Matrix4cd got =
        iontel::apply_converter_channel(ch, Eigen::Matrix4cd(rho));
    CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(got.trace().real() - 1.0) < 1e-12);
  }
}

TEST_CASE("arm imbalance reweights the photon branches") {
  iontel::PolarizationChannel ch;
  ch.depolarization = 0.0;
  ch.residual_phase = 0.0;

  const Eigen::Vector4cd bell = iontel::bell_state(0.0);
  const Eigen::Matrix4cd rho_bell = bell * bell.adjoint();

  double prev = 1.0;
  for (double imb : {0.8, 0.5, 0.2}) {
    ch.arm_imbalance = imb;
    const Eigen::Matrix4cd out = iontel::apply_converter_channel(ch, rho_bell);
    CHECK(std::abs(out.trace().real() - 1.0) < 1e-12);
    // Damping one arm shifts weight away from the damped branch.
    const double z = iontel::pauli_expand_of(out)(3, 0);
    const double expect = (imb - 1.0) / (imb + 1.0);
    CHECK(z == doctest::Approx(expect).epsilon(1e-12));
    CHECK(z < prev);
    prev = z;
  }

  // A single-branch state is a fixed point for any imbalance.
  Eigen::Matrix4cd single = Eigen::Matrix4cd::Zero();
  single(1, 1) = 1.0;
  ch.arm_imbalance = 0.3;
  const Eigen::Matrix4cd out = iontel::apply_converter_channel(ch, single);
  CHECK((out - single).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("detection chain factors multiply to the quoted rates") {
  for (const ExperimentConfig& c :
       {single_detector_config(), two_detector_config()}) {
    const iontel::DetectionChain chain =
        iontel::detection_probability_chain(c);
    double product = 1.0;
    for (const iontel::ChainFactor& f : chain.factors) product *= f.value;
    CHECK(product == doctest::Approx(chain.detected_rate).epsilon(1e-12));

    const double ndet = static_cast<double>(c.detector_efficiencies.size());
    double mean_eff = 0.0;
    for (double e : c.detector_efficiencies) mean_eff += e;
    mean_eff /= ndet;
    const double projection = ndet == 1 ? 0.5 : 1.0;
    CHECK(chain.detected_rate ==
          doctest::Approx(chain.candidate_rate *
                          c.wavepacket_window_fraction * projection * mean_eff)
              .epsilon(1e-12));
    CHECK(chain.detected_rate ==
          doctest::Approx(chain.generated_rate * c.tomography_transmission *
                          projection * mean_eff)
              .epsilon(1e-12));
  }

  // Carving adds a survival factor 1 - w/2 and nothing else changes shape.
  ExperimentConfig c = two_detector_config();
  const double base = iontel::detection_probability_chain(c).detected_rate;
  c.carving = true;
  const iontel::DetectionChain carved = iontel::detection_probability_chain(c);
  CHECK(carved.detected_rate ==
        doctest::Approx(base * (1.0 - 0.5 * c.cgc_weight_R)).epsilon(1e-12));
  const bool has_survival =
      std::any_of(carved.factors.begin(), carved.factors.end(),
                  [](const iontel::ChainFactor& f) {
                    return f.name == "carving_survival";
                  });
  CHECK(has_survival);
}

TEST_CASE("effective dark rates add the scaled conversion noise") {
  const ExperimentConfig plain = single_detector_config();
  const std::vector<double> r1 = iontel::effective_dark_rates(plain);
  REQUIRE(r1.size() == 1);
  CHECK(r1[0] == doctest::Approx(117.7));

  const ExperimentConfig conv = two_detector_config();
  const std::vector<double> r2 = iontel::effective_dark_rates(conv);
  REQUIRE(r2.size() == 2);
  CHECK(r2[0] == doctest::Approx(58.7 + 0.5 * 11.4 * 0.70).epsilon(1e-12));
  CHECK(r2[1] == doctest::Approx(56.4 + 0.5 * 11.4 * 0.62).epsilon(1e-12));
}

TEST_CASE("run plan covers all settings with shared run durations") {
  const ExperimentConfig c1 = single_detector_config();
  const auto plan1 = iontel::default_setting_requests(c1);
  REQUIRE(plan1.size() == 36);
  std::set<int> seen;
  for (const iontel::SettingRequest& r : plan1) {
    seen.insert(r.setting.index());
    CHECK(r.duration ==
          doctest::Approx(c1.acquisition_duration / 18.0).epsilon(1e-12));
  }
  CHECK(seen.size() == 36);

  const ExperimentConfig c2 = two_detector_config();
  const auto plan2 = iontel::default_setting_requests(c2);
  REQUIRE(plan2.size() == 36);
  seen.clear();
  for (const iontel::SettingRequest& r : plan2) {
    seen.insert(r.setting.index());
    CHECK(r.duration ==
          doctest::Approx(c2.acquisition_duration / 9.0).epsilon(1e-12));
  }
  CHECK(seen.size() == 36);
}

TEST_CASE("analysis model mirrors the configuration") {
  const ExperimentConfig c = two_detector_config();
  const iontel::AnalysisModel m = iontel::analysis_model(c);
  CHECK(m.larmor_frequency == doctest::Approx(c.larmor_frequency));
  CHECK(m.window_start == doctest::Approx(c.dark_lead));
  CHECK(m.window_end == doctest::Approx(c.dark_lead + c.window));
  CHECK(m.efficiency_plus == doctest::Approx(0.70));
  CHECK(m.efficiency_minus == doctest::Approx(0.62));

  const iontel::WavepacketShape wp = iontel::wavepacket_of(c);
  CHECK(wp.start == doctest::Approx(c.dark_lead));
  CHECK(wp.span_end == doctest::Approx(c.dark_lead + c.signal_span));
  // tau is defined by the window holding the requested fraction of the full
  // exponential tail; mass past the span is simply lost.
  const double in_window =
      wp.envelope_integral(c.dark_lead, c.dark_lead + c.window);
  const double total = wp.envelope_integral(c.dark_lead, c.dark_lead + 1.0);
  CHECK(in_window / total ==
        doctest::Approx(c.wavepacket_window_fraction).epsilon(1e-9));

  const iontel::AnalysisModel m1 =
      iontel::analysis_model(single_detector_config());
  CHECK(m1.efficiency_plus == doctest::Approx(0.30));
  CHECK(m1.efficiency_minus == doctest::Approx(0.30));
}

TEST_CASE("simulation is reproducible and seed sensitive") {
  ExperimentConfig c = two_detector_config();
  c.acquisition_duration = 5.0;

  const iontel::SimulatedDataset a = iontel::simulate(c);
  const iontel::SimulatedDataset b = iontel::simulate(c);
  REQUIRE(a.histograms.size() == b.histograms.size());
  for (std::size_t i = 0; i < a.histograms.size(); ++i) {
    CHECK(a.histograms[i].counts == b.histograms[i].counts);
  }
  CHECK(a.windowed_signal == b.windowed_signal);
  CHECK(a.windowed_background == b.windowed_background);

  c.rng_seed += 1;
  const iontel::SimulatedDataset d = iontel::simulate(c);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.histograms.size(); ++i) {
    any_diff = any_diff || a.histograms[i].counts != d.histograms[i].counts;
  }
  CHECK(any_diff);
}

TEST_CASE("histogram layout matches the configuration") {
  ExperimentConfig c = single_detector_config();
  c.acquisition_duration = 5.0;
  const iontel::SimulatedDataset data = iontel::simulate(c);
  REQUIRE(data.histograms.size() == 36);
  const int expected_bins = static_cast<int>(
      std::lround((c.dark_lead + c.signal_span) / c.bin_width));
  std::set<int> seen;
  for (const iontel::CoincidenceHistogram& h : data.histograms) {
    CHECK(h.bins() == expected_bins);
    CHECK(h.bin_width == doctest::Approx(c.bin_width));
    CHECK(h.window_start == doctest::Approx(c.dark_lead));
    CHECK(h.window_end == doctest::Approx(c.dark_lead + c.window));
    CHECK(h.duration ==
          doctest::Approx(c.acquisition_duration / 18.0).epsilon(1e-12));
    CHECK_NOTHROW(h.validate());
    seen.insert(h.setting.index());
  }
  CHECK(seen.size() == 36);
}

TEST_CASE("request order does not change the per-setting streams") {
  ExperimentConfig c = two_detector_config();
  c.acquisition_duration = 5.0;
  auto plan = iontel::default_setting_requests(c);
  const iontel::SimulatedDataset forward = iontel::simulate(c, plan);
  std::reverse(plan.begin(), plan.end());
  const iontel::SimulatedDataset backward = iontel::simulate(c, plan);

  auto by_setting = [](const iontel::SimulatedDataset& d, int index) {
    for (const iontel::CoincidenceHistogram& h : d.histograms) {
      if (h.setting.index() == index) return h;
    }
    REQUIRE(false);
    return d.histograms.front();
  };
  for (int index = 0; index < 36; ++index) {
    CHECK(by_setting(forward, index).counts ==
          by_setting(backward, index).counts);
  }
}

TEST_CASE("windowed signal tracks the detection budget") {
  SUBCASE("single detector") {
    ExperimentConfig c = single_detector_config();
    c.acquisition_duration = 400.0;
    const iontel::DetectionChain chain =
        iontel::detection_probability_chain(c);
    const iontel::SimulatedDataset data = iontel::simulate(c);
    const double expected = chain.detected_rate * c.acquisition_duration;
    const double sigma = std::sqrt(expected);
    CHECK(std::abs(static_cast<double>(data.windowed_signal) - expected) <
          4.0 * sigma);
  }

  SUBCASE("two detectors weight the photon outcome by its detector") {
    ExperimentConfig c = two_detector_config();
    c.acquisition_duration = 400.0;
    const iontel::TrueState truth = iontel::build_true_state(c);
    const iontel::DetectionChain chain =
        iontel::detection_probability_chain(c);

    // Per photon axis, outcome +/- lands on detector 0/1; the efficiency
    // entering the acceptance is weighted by the outcome probability.
    double mean_weight = 0.0;
    for (int a = 1; a <= 3; ++a) {
      const double s = photon_bloch(truth.rho, a);
      mean_weight += 0.5 * (1.0 + s) * c.detector_efficiencies[0] +
                     0.5 * (1.0 - s) * c.detector_efficiencies[1];
    }
    mean_weight /= 3.0;
    const double expected = chain.candidate_rate *
                            c.wavepacket_window_fraction * mean_weight *
                            c.acquisition_duration;
    const double sigma = std::sqrt(expected);
    const iontel::SimulatedDataset data = iontel::simulate(c);
    CHECK(std::abs(static_cast<double>(data.windowed_signal) - expected) <
          4.0 * sigma);
  }
}

TEST_CASE("windowed background tracks the dark budget") {
  for (ExperimentConfig c :
       {single_detector_config(), two_detector_config()}) {
    c.acquisition_duration = 2000.0;
    const iontel::BackgroundBudget budget =
        iontel::background_budget(c, c.acquisition_duration);
    const iontel::SimulatedDataset data = iontel::simulate(c);
    const double sigma = std::sqrt(budget.expected);
    CHECK(std::abs(static_cast<double>(data.windowed_background) -
                   budget.expected) < 4.0 * sigma);
  }
}

TEST_CASE("carving balances the photon populations in the data") {
  ExperimentConfig c = two_detector_config();
  c.carving = true;
  c.acquisition_duration = 300.0;
  const iontel::SimulatedDataset data = iontel::simulate(c);
  CHECK(data.truth.weight == doctest::Approx(0.5));

  // Z-basis photon marginal: the two outcomes differ only through detector
  // efficiency once the branch weights are equal.
  double plus = 0.0, minus = 0.0;
  for (const iontel::CoincidenceHistogram& h : data.histograms) {
    if (h.setting.photon_axis != iontel::Axis::Z) continue;
    const int lo = static_cast<int>(h.window_start / h.bin_width);
    const int hi = static_cast<int>(h.window_end / h.bin_width);
    double total = 0.0;
    for (int i = lo; i < hi; ++i) {
      total += static_cast<double>(h.counts[static_cast<std::size_t>(i)]);
    }
    (h.setting.photon_sign > 0 ? plus : minus) += total;
  }
  const double scaled_minus =
      minus * c.detector_efficiencies[0] / c.detector_efficiencies[1];
  const double sigma = std::sqrt(
      plus + scaled_minus * c.detector_efficiencies[0] /
                 c.detector_efficiencies[1]);
  CHECK(std::abs(plus - scaled_minus) < 4.0 * sigma);
}

}  // TEST_SUITE
