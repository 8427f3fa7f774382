#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "iontel/density_matrix.hpp"
#include "iontel/errors.hpp"
#include "iontel/fringe.hpp"
#include "iontel/histogram.hpp"

namespace iontel {

// Constants the analysis shares with the data: precession frequency,
// wavepacket shape and analysis window, and the relative detection
// efficiencies keyed by photon sign (unity when one detector serves both
// signs).
struct AnalysisModel {
  double larmor_frequency = 0.0;
  WavepacketShape wavepacket;
  double window_start = 0.0;
  double window_end = 0.0;
  double efficiency_plus = 1.0;
  double efficiency_minus = 1.0;

  double relative_efficiency(const BasisSetting& s) const {
    return s.photon_sign >= 0 ? efficiency_plus : efficiency_minus;
  }
  // Envelope mass inside the analysis window on the per-bin value scale.
  double window_envelope_mass(double bin_width) const {
    return wavepacket.envelope_integral(window_start, window_end) / bin_width;
  }
};

// Sufficient statistics of one setting's histogram: the windowed coincidence
// total, and for precessing-axis settings the fringe quadratures (cos/sin
// content of the modulation, rotated to the setting's reference).
struct SettingSummary {
  BasisSetting setting;
  double windowed_value = 0.0;
  double windowed_variance = 0.0;
  bool has_quadratures = false;
  Eigen::Vector2d quadratures = Eigen::Vector2d::Zero();
  Eigen::Matrix2d quadrature_covariance = Eigen::Matrix2d::Zero();
  std::string fringe_note;  // non-empty when the fringe fit failed
};

struct DatasetSummary {
  std::vector<SettingSummary> settings;  // canonical order, all 36
  double bin_width = 0.0;
};

// Reduces 36 corrected histograms to setting summaries. All 36 settings must
// be present exactly once and share the bin width. A failed fringe fit is
// recorded in the summary rather than thrown.
DatasetSummary summarize_settings(const std::vector<CorrectedHistogram>& hists,
                                  const AnalysisModel& model);

// Joint expectation table with per-entry variances. `valid` marks entries
// with at least one contributing measurement group.
struct PauliEstimate {
  PauliTable values = PauliTable::Zero();
  PauliTable variances = PauliTable::Zero();
  bool valid[4][4] = {};
  std::vector<std::string> notes;
};

// Estimates all S_{ij} by pooling measurement groups with inverse-variance
// weights: eigenbasis entries from windowed count sums, precessing-axis
// entries from fringe quadratures normalized by the group's windowed total.
PauliEstimate estimate_correlations(const DatasetSummary& data,
                                    const AnalysisModel& model);

// rho = 1/4 sum_ij S_ij sigma_i x sigma_j; Hermitian unit trace, possibly
// with negative eigenvalues.
inline Eigen::Matrix4cd linear_reconstruct(const PauliTable& s) {
  return pauli_compose(s);
}

// Likelihood data for one setting: the windowed total with its variance,
// plus, for precessing-axis settings, the fringe quadratures in the common
// transverse frame with their fitted covariance. The mass fields calibrate
// the expected total: window_mass scales the time-independent part and
// cos_mass/sin_mass weight the transverse components that survive
// integrating the precessing signal over the window. Counts may be negative
// after background subtraction; they are clamped only inside the likelihood.
struct CountSummary {
  BasisSetting setting;
  double count = 0.0;
  double variance = -1.0;  // non-positive: treat the count as pure Poisson
  double relative_efficiency = 1.0;
  bool has_quadratures = false;
  Eigen::Vector2d quadratures = Eigen::Vector2d::Zero();
  Eigen::Matrix2d quadrature_covariance = Eigen::Matrix2d::Zero();
  double window_mass = 0.0;
  double cos_mass = 0.0;
  double sin_mass = 0.0;
};

// Converts summaries to likelihood terms: every setting contributes its
// windowed total (with the subtraction-aware variance), and precessing-axis
// settings additionally carry their demodulated quadratures. Window and
// modulation masses are evaluated from the model so expected totals match
// the decaying, precessing signal exactly.
std::vector<CountSummary> pseudo_counts(const DatasetSummary& data,
                                        const AnalysisModel& model);

struct MleOptions {
  int max_iterations = 2000;
  double ll_tolerance = 1e-12;
  double gradient_tolerance = 1e-8;
};

struct MleResult {
  DensityMatrix rho = DensityMatrix::maximally_mixed(4);
  int iterations = 0;
  double log_likelihood = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
};

// Thrown when the optimizer hits the iteration cap; carries the best iterate.
class MleError : public Error {
 public:
  MleError(Error base, MleResult best_iterate)
      : Error(std::move(base)), best(std::move(best_iterate)) {}
  MleResult best;
};

// Maximum-likelihood state estimate: rho = L L^dag / Tr, lower-triangular L
// with real diagonal (16 parameters), quasi-Newton ascent with numerical
// gradients. Windowed totals enter as Poisson terms, tempered by their
// measured dispersion when background subtraction inflates the variance;
// fringe quadratures enter as correlated Gaussian terms. Per-group
// acquisition normalizations (settings sharing photon and ion axes) are
// additional log-scale parameters. The initial guess is projected onto
// physical states first.
MleResult mle_reconstruct(const std::vector<CountSummary>& counts,
                          const Eigen::Matrix4cd& initial_guess,
                          const MleOptions& options = {});

struct Reconstruction {
  DatasetSummary summary;
  PauliEstimate expectations;
  Eigen::Matrix4cd linear_candidate = Eigen::Matrix4cd::Zero();
  MleResult mle;
};

// Full pipeline: summaries, expectation table, linear candidate, and the
// maximum-likelihood state started from the linear candidate.
Reconstruction reconstruct_state(const std::vector<CorrectedHistogram>& hists,
                                 const AnalysisModel& model,
                                 const MleOptions& options = {});

enum class StateFunctional { FidelityToTarget, BellFidelity, Purity };

// One-sigma uncertainty of a functional of the maximum-likelihood state:
// each independent statistic (windowed totals, fringe quadratures) is
// perturbed by its Poissonian sigma, the reconstruction is repeated with the
// unperturbed result as warm start, and the functional shifts add in
// quadrature. `target` is required for FidelityToTarget.
double error_bars(const DatasetSummary& data, const AnalysisModel& model,
                  const MleResult& fit, StateFunctional functional,
                  const Eigen::Vector4cd* target = nullptr,
                  const MleOptions& options = {});

double evaluate_functional(const DensityMatrix& rho, StateFunctional f,
                           const Eigen::Vector4cd* target);

}  // namespace iontel
