#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "iontel/density_matrix.hpp"
#include "iontel/fringe.hpp"
#include "iontel/histogram.hpp"
#include "iontel/process.hpp"
#include "iontel/tomography.hpp"

namespace iontel {

// Quantum frequency conversion stage appended to the collection chain.
struct ConverterConfig {
  double fiber_transmission = 0.758;
  double external_efficiency = 0.265;
  double stabilization_duty = 0.875;
  double conversion_noise_rate = 0.0;  // Hz, total over both detectors
  PolarizationChannel process_channel;
};

// Measured run totals carried alongside a configuration, used by the rate
// and background bookkeeping.
struct MeasuredTotals {
  double signal_events = 0.0;
  double background_events = 0.0;
  double duration = 0.0;  // seconds
};

struct ExperimentConfig {
  double repetition_rate = 58e3;          // Hz
  double cgc_weight_R = 2.0 / 3.0;        // |R>-branch weight of the ideal state
  double mixture_fraction_wanted = 0.5;   // preparation branch probability
  double branching_854 = 0.899;           // decay branch probability
  double collection_halo = 0.036;
  double fiber_coupling = 0.39;
  double window = 300e-9;                 // seconds
  double wavepacket_window_fraction = 0.65;
  double larmor_frequency = 0.0;          // rad/s
  double depolarization_p = 0.0;
  double readout_infidelity = 0.0;
  std::vector<double> detector_efficiencies;  // one entry per detector
  std::vector<double> dark_count_rates;       // Hz, same length
  std::optional<ConverterConfig> converter;
  bool carving = false;
  double acquisition_duration = 0.0;  // seconds
  std::uint64_t rng_seed = 0;

  // Analyzer transmission ahead of the detectors.
  double tomography_transmission = 1.0;

  // Histogram layout. The lead interval holds no signal and anchors the
  // background estimate; the wavepacket occupies [dark_lead,
  // dark_lead + signal_span].
  double bin_width = 10e-9;
  double dark_lead = 2e-6;
  double signal_span = 1e-6;

  // Optional uncertainties for budget error propagation.
  double tomography_transmission_sigma = 0.0;
  std::vector<double> detector_efficiency_sigmas;
  std::vector<double> dark_count_rate_sigmas;

  std::optional<MeasuredTotals> measured;
};

// Throws input_error naming the offending field.
void validate_config(const ExperimentConfig& config);

struct TrueState {
  DensityMatrix rho{DensityMatrix::maximally_mixed(4)};
  double weight = 0.0;
  double purity = 0.0;
  double fidelity_ideal = 0.0;  // overlap with the weight-w target, best phase
  BellOverlap bell;
};

// (1-p)|psi(w)><psi(w)| + p I/4 with w = cgc_weight_R (1/2 under carving),
// then the converter polarization channel on the photon when configured.
TrueState build_true_state(const ExperimentConfig& config);

// Two-qubit action of the converter polarization stage (photon side only).
Eigen::Matrix4cd apply_converter_channel(const PolarizationChannel& channel,
                                         const Eigen::Matrix4cd& rho);

struct ChainFactor {
  std::string name;
  double value = 1.0;
};

// Per-repetition detection bookkeeping. generated_rate counts photons that
// reach the analyzer input inside the analysis window; detected_rate adds
// analyzer transmission, polarization projection (single-detector topology
// only), and mean detector efficiency. candidate_rate is the event rate the
// sampler draws from: analyzer input without the window cut, so projection,
// detector efficiency, and window survival stay dynamical.
struct DetectionChain {
  std::vector<ChainFactor> factors;
  double generated_rate = 0.0;
  double detected_rate = 0.0;
  double candidate_rate = 0.0;
};

DetectionChain detection_probability_chain(const ExperimentConfig& config);

// Effective per-detector dark rate: intrinsic dark counts plus the
// converter's noise floor scaled by that detector's efficiency.
std::vector<double> effective_dark_rates(const ExperimentConfig& config);

struct SettingRequest {
  BasisSetting setting;
  double duration = 0.0;  // seconds of acquisition covering this setting
};

// Run plan for the full 36-setting tomography. A single-detector setup
// cycles 18 runs (photon axis and sign, ion axis); a two-detector setup
// records both photon signs at once in 9 runs. Each run's duration is
// shared by the settings recorded in it.
std::vector<SettingRequest> default_setting_requests(
    const ExperimentConfig& config);

struct SimulatedDataset {
  TrueState truth;
  std::vector<CoincidenceHistogram> histograms;
  // Truth-level tallies of window content, for rate cross-checks.
  std::int64_t windowed_signal = 0;
  std::int64_t windowed_background = 0;
};

SimulatedDataset simulate(const ExperimentConfig& config,
                          const std::vector<SettingRequest>& requests);
SimulatedDataset simulate(const ExperimentConfig& config);

// Wavepacket time profile implied by the window and its mass fraction.
WavepacketShape wavepacket_of(const ExperimentConfig& config);

// Analysis-side view of the configuration: Larmor frequency, wavepacket,
// window, and relative detector efficiencies.
AnalysisModel analysis_model(const ExperimentConfig& config);

}  // namespace iontel
