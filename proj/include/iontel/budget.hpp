#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "iontel/histogram.hpp"
#include "iontel/simulator.hpp"

namespace iontel {

struct EfficiencyFactor {
  std::string name;
  double value = 1.0;
  double sigma = 0.0;  // absolute 1-sigma; zero means exact
};

struct EfficiencyChain {
  std::vector<EfficiencyFactor> factors;
};

// Product of the factors with first-order relative errors in quadrature.
std::pair<double, double> chain_product(const EfficiencyChain& chain);

// eta_max sin^2(sqrt(eta_nor P) L): external conversion efficiency versus
// mixing pump power.
double eta_ext(double pump_power, double eta_max, double eta_nor,
               double length);

struct EfficiencyCurvePoint {
  double pump_power = 0.0;  // W
  double efficiency = 0.0;
  double sigma = 0.0;
};

struct EfficiencyCurveFit {
  double eta_max = 0.0;
  double eta_nor = 0.0;
  Eigen::Matrix2d covariance = Eigen::Matrix2d::Zero();
  double chi_square = 0.0;
  int dof = 0;
  int iterations = 0;
};

EfficiencyCurveFit fit_efficiency_curve(
    const std::vector<EfficiencyCurvePoint>& points, double length);

struct WorkingPoint {
  double pump_power = 0.0;
  double efficiency = 0.0;
};

// Pump power where the two fitted curves cross, by bisection on their
// difference between the first maxima. Throws fit_error when the curves do
// not cross in the searched range.
WorkingPoint working_point(const EfficiencyCurveFit& a,
                           const EfficiencyCurveFit& b, double length);

struct CurvePairFit {
  EfficiencyCurveFit first;
  EfficiencyCurveFit second;
  WorkingPoint crossing;
};

CurvePairFit fit_efficiency_curves(
    const std::vector<EfficiencyCurvePoint>& first,
    const std::vector<EfficiencyCurvePoint>& second, double length);

// Rate bookkeeping in both directions: measured counts divided down to an
// inferred generated rate, and configured efficiencies multiplied up to a
// theoretical one.
struct RateBudget {
  bool measured_available = false;
  double detected_rate_measured = 0.0;
  double generated_rate_inferred = 0.0;
  double generated_rate_inferred_sigma = 0.0;
  double generated_rate_theoretical = 0.0;
  double detected_rate_theoretical = 0.0;
  double conversion_transmission = 0.0;  // converter throughput; 0 if absent
  bool has_converter = false;
  // Set when inferred and theoretical generated rates disagree beyond three
  // combined sigma (only meaningful with measured data and a nonzero sigma).
  bool rates_disagree = false;
  std::vector<ChainFactor> factors;
};

RateBudget rate_budget(const ExperimentConfig& config);

struct BackgroundBudget {
  double expected = 0.0;  // counts inside the analysis window
  double sigma = 0.0;
  std::vector<double> effective_dark_rates;  // Hz per detector
};

BackgroundBudget background_budget(const ExperimentConfig& config,
                                   double duration);

struct SbrResult {
  double value = 0.0;
  bool finite = true;  // false when background is zero
};

SbrResult sbr(double signal_events, double background_events);

// Side-by-side budget of a converted setup against its direct-detection
// reference, with the derived transmission ratio and the dark-rate
// reduction factor.
struct BudgetComparison {
  RateBudget converted;
  RateBudget reference;
  double transmission_ratio = 0.0;
  double transmission_ratio_sigma = 0.0;
  double background_reduction = 0.0;  // mean effective dark rate ratio
};

BudgetComparison compare_budgets(const ExperimentConfig& converted,
                                 const ExperimentConfig& reference);

// Per-setting dark level from the bins ahead of the wavepacket, scaled by
// `fraction` and removed bin-wise; corrected values keep their distributional
// means (no clamping) with variances carrying both counting noise and the
// dark-estimate uncertainty.
std::vector<CorrectedHistogram> subtract_background(
    const std::vector<CoincidenceHistogram>& histograms, double fraction);

CorrectedHistogram subtract_background_one(const CoincidenceHistogram& h,
                                           double fraction);

}  // namespace iontel
