#include "iontel/simulator.hpp"

#include <cmath>

#include "iontel/errors.hpp"
#include "iontel/rng.hpp"

namespace iontel {

namespace {

void check_probability(const char* field, double v) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw input_error("experiment-sim", "field outside [0, 1]",
                      {{"field", field}, {"value", std::to_string(v)}});
  }
}

void check_positive(const char* field, double v) {
  if (!(v > 0.0)) {
    throw input_error("experiment-sim", "field must be positive",
                      {{"field", field}, {"value", std::to_string(v)}});
  }
}

int detector_count(const ExperimentConfig& config) {
  return static_cast<int>(config.detector_efficiencies.size());
}

// Detector index serving a photon outcome: a single detector covers both
// signs, a pair maps + to detector 0 and - to detector 1.
int detector_for_sign(const ExperimentConfig& config, int photon_sign) {
  if (detector_count(config) == 1) return 0;
  return photon_sign >= 0 ? 0 : 1;
}

// Terms of the outcome probability at the analyzer output:
// p(t) = base + cos_amp cos(w dt) + sin_amp sin(w dt), before detector
// efficiency. Readout errors damp every ion-sign-carrying term.
struct OutcomeProfile {
  double base = 0.0;
  double cos_amp = 0.0;
  double sin_amp = 0.0;

  double at(double phase) const {
    return base + cos_amp * std::cos(phase) + sin_amp * std::sin(phase);
  }
};

OutcomeProfile joint_profile(const PauliTable& s, const BasisSetting& setting,
                             double readout_infidelity) {
  const double sp = setting.photon_sign;
  const double si = setting.ion_sign;
  const double damp = 1.0 - 2.0 * readout_infidelity;
  const int a = axis_index(setting.photon_axis);
  OutcomeProfile out;
  if (setting.ion_axis == Axis::Z) {
    out.base = 0.25 * (1.0 + sp * s(a, 0) +
                       damp * si * (s(0, 3) + sp * s(a, 3)));
    return out;
  }
  const double shift = quadrature_rotation(setting.ion_axis);
  const double c = std::cos(shift);
  const double sn = std::sin(shift);
  out.base = 0.25 * (1.0 + sp * s(a, 0));
  // cos(w dt + shift) folds the axis offset into the quadrature pair.
  const double cx = 0.25 * damp * si * (s(0, 1) + sp * s(a, 1));
  const double cy = 0.25 * damp * si * (s(0, 2) + sp * s(a, 2));
  out.cos_amp = cx * c + cy * sn;
  out.sin_amp = -cx * sn + cy * c;
  return out;
}

OutcomeProfile ion_marginal_profile(const PauliTable& s,
                                    const BasisSetting& setting,
                                    double readout_infidelity) {
  const double si = setting.ion_sign;
  const double damp = 1.0 - 2.0 * readout_infidelity;
  OutcomeProfile out;
  if (setting.ion_axis == Axis::Z) {
    out.base = 0.5 * (1.0 + damp * si * s(0, 3));
    return out;
  }
  const double shift = quadrature_rotation(setting.ion_axis);
  const double c = std::cos(shift);
  const double sn = std::sin(shift);
  const double cx = 0.5 * damp * si * s(0, 1);
  const double cy = 0.5 * damp * si * s(0, 2);
  out.base = 0.5;
  out.cos_amp = cx * c + cy * sn;
  out.sin_amp = -cx * sn + cy * c;
  return out;
}

}  // namespace

void validate_config(const ExperimentConfig& config) {
  check_positive("repetition_rate", config.repetition_rate);
  check_probability("cgc_weight_R", config.cgc_weight_R);
  check_probability("mixture_fraction_wanted", config.mixture_fraction_wanted);
  check_probability("branching_854", config.branching_854);
  check_probability("collection_halo", config.collection_halo);
  check_probability("fiber_coupling", config.fiber_coupling);
  check_positive("window", config.window);
  if (!(config.wavepacket_window_fraction > 0.0 &&
        config.wavepacket_window_fraction < 1.0)) {
    throw input_error("experiment-sim", "field outside (0, 1)",
                      {{"field", "wavepacket_window_fraction"},
                       {"value",
                        std::to_string(config.wavepacket_window_fraction)}});
  }
  if (!(config.larmor_frequency >= 0.0)) {
    throw input_error("experiment-sim", "field must be non-negative",
                      {{"field", "larmor_frequency"}});
  }
  check_probability("depolarization_p", config.depolarization_p);
  if (!(config.readout_infidelity >= 0.0 && config.readout_infidelity <= 0.5)) {
    throw input_error("experiment-sim", "field outside [0, 0.5]",
                      {{"field", "readout_infidelity"},
                       {"value", std::to_string(config.readout_infidelity)}});
  }
  const int ndet = detector_count(config);
  if (ndet != 1 && ndet != 2) {
    throw input_error("experiment-sim",
                      "detector_efficiencies needs one or two entries",
                      {{"field", "detector_efficiencies"},
                       {"count", std::to_string(ndet)}});
  }
  for (double e : config.detector_efficiencies) {
    check_probability("detector_efficiencies", e);
    check_positive("detector_efficiencies", e);
  }
  if (config.dark_count_rates.size() != config.detector_efficiencies.size()) {
    throw input_error("experiment-sim",
                      "dark_count_rates length differs from detectors",
                      {{"field", "dark_count_rates"}});
  }
  for (double r : config.dark_count_rates) {
    if (!(r >= 0.0)) {
      throw input_error("experiment-sim", "field must be non-negative",
                        {{"field", "dark_count_rates"}});
    }
  }
  if (config.converter) {
    check_probability("converter.fiber_transmission",
                      config.converter->fiber_transmission);
    check_probability("converter.external_efficiency",
                      config.converter->external_efficiency);
    check_probability("converter.stabilization_duty",
                      config.converter->stabilization_duty);
    if (!(config.converter->conversion_noise_rate >= 0.0)) {
      throw input_error("experiment-sim", "field must be non-negative",
                        {{"field", "converter.conversion_noise_rate"}});
    }
    check_probability("converter.process_channel.depolarization_p",
                      config.converter->process_channel.depolarization);
    check_positive("converter.process_channel.arm_imbalance",
                   config.converter->process_channel.arm_imbalance);
  }
  check_positive("acquisition_duration", config.acquisition_duration);
  check_probability("tomography_transmission", config.tomography_transmission);
  check_positive("tomography_transmission", config.tomography_transmission);
  check_positive("bin_width", config.bin_width);
  check_positive("dark_lead", config.dark_lead);
  check_positive("signal_span", config.signal_span);
  if (config.window > config.signal_span) {
    throw input_error("experiment-sim", "window exceeds signal_span",
                      {{"field", "window"}});
  }
  if (!config.detector_efficiency_sigmas.empty() &&
      config.detector_efficiency_sigmas.size() !=
          config.detector_efficiencies.size()) {
    throw input_error("experiment-sim",
                      "detector_efficiency_sigmas length differs from detectors",
                      {{"field", "detector_efficiency_sigmas"}});
  }
  if (!config.dark_count_rate_sigmas.empty() &&
      config.dark_count_rate_sigmas.size() != config.dark_count_rates.size()) {
    throw input_error("experiment-sim",
                      "dark_count_rate_sigmas length differs from detectors",
                      {{"field", "dark_count_rate_sigmas"}});
  }
  if (config.measured) {
    check_positive("measured.duration", config.measured->duration);
  }
}

Eigen::Matrix4cd apply_converter_channel(const PolarizationChannel& channel,
                                         const Eigen::Matrix4cd& rho) {
  const Eigen::Matrix2cd id = Eigen::Matrix2cd::Identity();

  Eigen::Matrix2cd k = id;
  k(0, 0) = std::sqrt(channel.arm_imbalance);
  const Eigen::Matrix4cd k2 = kron(k, id);
  Eigen::Matrix4cd out = k2 * rho * k2.adjoint();
  const double tr = out.trace().real();
  if (!(tr > 0.0)) {
    throw domain_error("experiment-sim", "converter channel annihilates state");
  }
  out /= tr;

  const double p = channel.depolarization;
  if (p > 0.0) {
    // Partial trace over the photon, re-tensored with I/2.
    Eigen::Matrix2cd ion = Eigen::Matrix2cd::Zero();
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        ion(i, j) = out(i, j) + out(2 + i, 2 + j);
      }
    }
    out = (1.0 - p) * out + p * kron(Eigen::Matrix2cd(0.5 * id), ion);
  }

  Eigen::Matrix2cd z = id;
  z(1, 1) = std::exp(complexd(0.0, channel.residual_phase));
  const Eigen::Matrix4cd z2 = kron(z, id);
  return z2 * out * z2.adjoint();
}

TrueState build_true_state(const ExperimentConfig& config) {
  validate_config(config);
  const double w = config.carving ? 0.5 : config.cgc_weight_R;
  const Eigen::Vector4cd psi = ideal_state(w, 0.0);
  Eigen::Matrix4cd m = (1.0 - config.depolarization_p) * (psi * psi.adjoint()) +
                       config.depolarization_p * 0.25 *
                           Eigen::Matrix4cd::Identity();
  if (config.converter) {
    m = apply_converter_channel(config.converter->process_channel, m);
  }
  TrueState out;
  out.rho = DensityMatrix::from_hermitian_candidate(m);
  out.weight = w;
  out.purity = purity(out.rho);
  out.fidelity_ideal =
      ideal_overlap(Eigen::Matrix4cd(out.rho.matrix()), w).value;
  out.bell = bell_overlap(out.rho);
  return out;
}

DetectionChain detection_probability_chain(const ExperimentConfig& config) {
  validate_config(config);
  DetectionChain out;
  auto push = [&out](const std::string& name, double value) {
    out.factors.push_back({name, value});
  };
  push("repetition_rate", config.repetition_rate);
  push("collection_halo", config.collection_halo);
  push("fiber_coupling", config.fiber_coupling);
  push("mixture_fraction_wanted", config.mixture_fraction_wanted);
  push("branching_854", config.branching_854);
  if (config.converter) {
    push("converter_fiber_transmission", config.converter->fiber_transmission);
    push("converter_external_efficiency",
         config.converter->external_efficiency);
    push("converter_stabilization_duty", config.converter->stabilization_duty);
  }
  if (config.carving) {
    push("carving_survival", 1.0 - 0.5 * config.cgc_weight_R);
  }

  double upstream = 1.0;
  for (const ChainFactor& f : out.factors) upstream *= f.value;

  out.candidate_rate = upstream * config.tomography_transmission;
  push("window_fraction", config.wavepacket_window_fraction);
  out.generated_rate = upstream * config.wavepacket_window_fraction;

  double detected = out.generated_rate * config.tomography_transmission;
  push("tomography_transmission", config.tomography_transmission);
  if (detector_count(config) == 1) {
    // One analyzer output port: half the projections are absorbed.
    detected *= 0.5;
    push("polarization_projection", 0.5);
  }
  double mean_eff = 0.0;
  for (double e : config.detector_efficiencies) mean_eff += e;
  mean_eff /= static_cast<double>(detector_count(config));
  detected *= mean_eff;
  push("mean_detector_efficiency", mean_eff);
  out.detected_rate = detected;
  return out;
}

std::vector<double> effective_dark_rates(const ExperimentConfig& config) {
  const int ndet = detector_count(config);
  std::vector<double> rates(config.dark_count_rates);
  if (config.converter && config.converter->conversion_noise_rate > 0.0) {
    const double per_det =
        config.converter->conversion_noise_rate / static_cast<double>(ndet);
    for (int d = 0; d < ndet; ++d) {
      rates[d] += per_det * config.detector_efficiencies[d];
    }
  }
  return rates;
}

std::vector<SettingRequest> default_setting_requests(
    const ExperimentConfig& config) {
  validate_config(config);
  const int runs = detector_count(config) == 1 ? 18 : 9;
  const double run_duration =
      config.acquisition_duration / static_cast<double>(runs);
  std::vector<SettingRequest> out;
  out.reserve(36);
  for (const BasisSetting& s : BasisSetting::all()) {
    out.push_back({s, run_duration});
  }
  return out;
}

WavepacketShape wavepacket_of(const ExperimentConfig& config) {
  WavepacketShape shape;
  shape.start = config.dark_lead;
  shape.tau = wavepacket_tau(config.window, config.wavepacket_window_fraction);
  shape.span_end = config.dark_lead + config.signal_span;
  return shape;
}

AnalysisModel analysis_model(const ExperimentConfig& config) {
  validate_config(config);
  AnalysisModel model;
  model.larmor_frequency = config.larmor_frequency;
  model.wavepacket = wavepacket_of(config);
  model.window_start = config.dark_lead;
  model.window_end = config.dark_lead + config.window;
  model.efficiency_plus =
      config.detector_efficiencies[detector_for_sign(config, +1)];
  model.efficiency_minus =
      config.detector_efficiencies[detector_for_sign(config, -1)];
  return model;
}

SimulatedDataset simulate(const ExperimentConfig& config,
                          const std::vector<SettingRequest>& requests) {
  validate_config(config);
  if (requests.empty()) {
    throw input_error("experiment-sim", "no setting requests");
  }

  SimulatedDataset out;
  out.truth = build_true_state(config);
  const PauliTable s = pauli_expand(out.truth.rho);
  const DetectionChain chain = detection_probability_chain(config);
  const std::vector<double> dark_rates = effective_dark_rates(config);
  const WavepacketShape shape = wavepacket_of(config);

  const double span = config.dark_lead + config.signal_span;
  const auto bins =
      static_cast<Eigen::Index>(std::llround(span / config.bin_width));
  if (!(bins > 0) ||
      std::abs(bins * config.bin_width - span) > 1e-9 * span) {
    throw input_error("experiment-sim",
                      "histogram span is not a whole number of bins",
                      {{"field", "bin_width"}});
  }
  const double t0 = config.dark_lead;
  const double window_end = t0 + config.window;
  const double gate =
      config.mixture_fraction_wanted * config.branching_854 *
      config.repetition_rate;

  out.histograms.reserve(requests.size());
  for (const SettingRequest& req : requests) {
    if (!(req.duration > 0.0)) {
      throw input_error("experiment-sim", "request duration must be positive",
                        {{"setting", req.setting.label()}});
    }
    CoincidenceHistogram h;
    h.setting = req.setting;
    h.bin_width = config.bin_width;
    h.counts.assign(static_cast<std::size_t>(bins), 0);
    h.window_start = t0;
    h.window_end = window_end;
    h.duration = req.duration;

    CounterRng rng(config.rng_seed, req.setting.index());
    const double eff =
        config.detector_efficiencies[detector_for_sign(
            config, req.setting.photon_sign)];

    // Signal: candidate photons at the analyzer input, exponential arrival
    // times, accepted with the joint outcome probability times detector
    // efficiency. Arrivals past the span leave the histogram.
    const OutcomeProfile joint =
        joint_profile(s, req.setting, config.readout_infidelity);
    const std::uint64_t candidates =
        rng.poisson(chain.candidate_rate * req.duration);
    for (std::uint64_t i = 0; i < candidates; ++i) {
      const double dt = rng.exponential(shape.tau);
      const double accept_roll = rng.uniform();
      if (dt >= config.signal_span) continue;
      const double p = joint.at(config.larmor_frequency * dt);
      if (accept_roll >= eff * std::max(p, 0.0)) continue;
      const double t = t0 + dt;
      const auto idx = static_cast<Eigen::Index>(t / config.bin_width);
      h.counts[static_cast<std::size_t>(std::min(idx, bins - 1))] += 1;
      if (t >= t0 && t < window_end) out.windowed_signal += 1;
    }

    // Dark and noise-floor coincidences: uniform over the span, paired with
    // a real ion readout, so acceptance follows the ion marginal.
    const double dark_rate =
        dark_rates[static_cast<std::size_t>(
            detector_for_sign(config, req.setting.photon_sign))];
    const OutcomeProfile marginal =
        ion_marginal_profile(s, req.setting, config.readout_infidelity);
    const std::uint64_t dark_candidates =
        rng.poisson(dark_rate * gate * span * req.duration);
    for (std::uint64_t i = 0; i < dark_candidates; ++i) {
      const double t = rng.uniform(0.0, span);
      const double accept_roll = rng.uniform();
      const double p = marginal.at(config.larmor_frequency * (t - t0));
      if (accept_roll >= std::max(p, 0.0)) continue;
      const auto idx = static_cast<Eigen::Index>(t / config.bin_width);
      h.counts[static_cast<std::size_t>(std::min(idx, bins - 1))] += 1;
      if (t >= t0 && t < window_end) out.windowed_background += 1;
    }

    out.histograms.push_back(std::move(h));
  }
  return out;
}

SimulatedDataset simulate(const ExperimentConfig& config) {
  return simulate(config, default_setting_requests(config));
}

}  // namespace iontel
