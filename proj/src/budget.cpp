#include "iontel/budget.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "iontel/curve_fit.hpp"
#include "iontel/errors.hpp"

namespace iontel {

namespace {

double mean_detector_efficiency(const ExperimentConfig& config) {
  double acc = 0.0;
  for (double e : config.detector_efficiencies) acc += e;
  return acc / static_cast<double>(config.detector_efficiencies.size());
}

// Relative 1-sigma of the detected/generated throughput: analyzer
// transmission, projection absorption (exact), mean detector efficiency.
double throughput_relative_sigma(const ExperimentConfig& config) {
  double rel2 = 0.0;
  if (config.tomography_transmission_sigma > 0.0) {
    const double r =
        config.tomography_transmission_sigma / config.tomography_transmission;
    rel2 += r * r;
  }
  if (!config.detector_efficiency_sigmas.empty()) {
    const auto n = config.detector_efficiencies.size();
    double var_sum = 0.0;
    for (double s : config.detector_efficiency_sigmas) var_sum += s * s;
    const double mean_sigma = std::sqrt(var_sum) / static_cast<double>(n);
    const double r = mean_sigma / mean_detector_efficiency(config);
    rel2 += r * r;
  }
  return std::sqrt(rel2);
}

}  // namespace

std::pair<double, double> chain_product(const EfficiencyChain& chain) {
  if (chain.factors.empty()) {
    throw input_error("budget", "efficiency chain is empty");
  }
  double value = 1.0;
  double rel2 = 0.0;
  for (const EfficiencyFactor& f : chain.factors) {
    if (!(f.value >= 0.0 && f.value <= 1.0)) {
      throw input_error("budget", "chain factor outside [0, 1]",
                        {{"factor", f.name}, {"value", std::to_string(f.value)}});
    }
    value *= f.value;
    if (f.sigma > 0.0) {
      if (f.value <= 0.0) {
        throw input_error("budget", "sigma on a zero-valued factor",
                          {{"factor", f.name}});
      }
      const double r = f.sigma / f.value;
      rel2 += r * r;
    }
  }
  return {value, value * std::sqrt(rel2)};
}

double eta_ext(double pump_power, double eta_max, double eta_nor,
               double length) {
  if (pump_power < 0.0 || eta_max < 0.0 || eta_nor < 0.0 || length < 0.0) {
    throw input_error("budget", "eta_ext arguments must be non-negative");
  }
  const double s = std::sin(std::sqrt(eta_nor * pump_power) * length);
  return eta_max * s * s;
}

EfficiencyCurveFit fit_efficiency_curve(
    const std::vector<EfficiencyCurvePoint>& points, double length) {
  if (points.size() < 4) {
    throw input_error("budget", "curve fit needs at least 4 points",
                      {{"points", std::to_string(points.size())}});
  }
  if (!(length > 0.0)) {
    throw input_error("budget", "waveguide length must be positive");
  }
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::VectorXd x(n), y(n), sigma(n);
  double p_lo = points.front().pump_power, p_hi = p_lo;
  double best_eff = 0.0, best_power = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const EfficiencyCurvePoint& pt = points[static_cast<std::size_t>(i)];
    if (pt.pump_power < 0.0) {
      throw input_error("budget", "pump power must be non-negative");
    }
    x[i] = pt.pump_power;
    y[i] = pt.efficiency;
    sigma[i] = pt.sigma > 0.0 ? pt.sigma : 1.0;
    p_lo = std::min(p_lo, pt.pump_power);
    p_hi = std::max(p_hi, pt.pump_power);
    if (pt.efficiency > best_eff) {
      best_eff = pt.efficiency;
      best_power = pt.pump_power;
    }
  }
  if (!(p_hi > p_lo)) {
    throw fit_error("budget", "all points share one pump power",
                    {{"pump_power", std::to_string(p_lo)}});
  }
  if (!(best_eff > 0.0) || !(best_power > 0.0)) {
    throw fit_error("budget", "no positive-efficiency point to seed the fit");
  }

  const auto model = [length](const Eigen::VectorXd& p, double power) {
    const double s =
        std::sin(std::sqrt(std::abs(p[1]) * power) * length);
    return std::abs(p[0]) * s * s;
  };
  // Seed: top point near the first maximum, sqrt(eta_nor P) L = pi/2 there.
  Eigen::Vector2d initial(best_eff,
                          (M_PI * M_PI / 4.0) / (best_power * length * length));
  const CurveFitResult raw =
      levenberg_fit(model, x, y, sigma, initial);

  EfficiencyCurveFit out;
  out.eta_max = std::abs(raw.params[0]);
  out.eta_nor = std::abs(raw.params[1]);
  out.covariance = raw.covariance;
  out.chi_square = raw.chi_square;
  out.dof = raw.dof;
  out.iterations = raw.iterations;
  return out;
}

WorkingPoint working_point(const EfficiencyCurveFit& a,
                           const EfficiencyCurveFit& b, double length) {
  if (!(length > 0.0)) {
    throw input_error("budget", "waveguide length must be positive");
  }
  const auto diff = [&](double p) {
    return eta_ext(p, a.eta_max, a.eta_nor, length) -
           eta_ext(p, b.eta_max, b.eta_nor, length);
  };
  const double peak_a = (M_PI * M_PI / 4.0) / (a.eta_nor * length * length);
  const double peak_b = (M_PI * M_PI / 4.0) / (b.eta_nor * length * length);
  double lo = std::min(peak_a, peak_b);
  double hi = std::max(peak_a, peak_b);
  if (!(hi > lo)) {
    throw fit_error("budget", "curves have coincident maxima",
                    {{"pump_power", std::to_string(lo)}});
  }
  // The crossing sits between the maxima; fall back to a scan of the
  // surrounding range when the bracket endpoints do not change sign.
  double flo = diff(lo), fhi = diff(hi);
  if (flo * fhi > 0.0) {
    const double span_lo = 0.25 * lo, span_hi = 2.0 * hi;
    const int steps = 800;
    bool found = false;
    double prev_p = span_lo, prev_f = diff(span_lo);
    for (int i = 1; i <= steps; ++i) {
      const double p =
          span_lo + (span_hi - span_lo) * static_cast<double>(i) / steps;
      const double f = diff(p);
      if (prev_f == 0.0 || prev_f * f < 0.0) {
        lo = prev_p;
        hi = p;
        flo = prev_f;
        found = true;
        break;
      }
      prev_p = p;
      prev_f = f;
    }
    if (!found) {
      throw fit_error("budget", "efficiency curves do not cross",
                      {{"searched_from", std::to_string(span_lo)},
                       {"searched_to", std::to_string(span_hi)}});
    }
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fmid = diff(mid);
    if (fmid == 0.0) {
      lo = hi = mid;
      break;
    }
    if (flo * fmid < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fmid;
    }
  }
  WorkingPoint out;
  out.pump_power = 0.5 * (lo + hi);
  out.efficiency = eta_ext(out.pump_power, a.eta_max, a.eta_nor, length);
  return out;
}

CurvePairFit fit_efficiency_curves(
    const std::vector<EfficiencyCurvePoint>& first,
    const std::vector<EfficiencyCurvePoint>& second, double length) {
  CurvePairFit out;
  out.first = fit_efficiency_curve(first, length);
  out.second = fit_efficiency_curve(second, length);
  out.crossing = working_point(out.first, out.second, length);
  return out;
}

RateBudget rate_budget(const ExperimentConfig& config) {
  validate_config(config);
  const DetectionChain chain = detection_probability_chain(config);

  RateBudget out;
  out.factors = chain.factors;
  out.generated_rate_theoretical = chain.generated_rate;
  out.detected_rate_theoretical = chain.detected_rate;
  out.has_converter = config.converter.has_value();
  if (config.converter) {
    out.conversion_transmission = config.converter->fiber_transmission *
                                  config.converter->external_efficiency *
                                  config.converter->stabilization_duty;
  }

  if (config.measured) {
    const double throughput = chain.detected_rate / chain.generated_rate;
    if (!(throughput > 0.0)) {
      throw input_error("budget", "zero detection throughput",
                        {{"field", "detector_efficiencies"}});
    }
    out.measured_available = true;
    out.detected_rate_measured =
        config.measured->signal_events / config.measured->duration;
    out.generated_rate_inferred = out.detected_rate_measured / throughput;
    out.generated_rate_inferred_sigma =
        out.generated_rate_inferred * throughput_relative_sigma(config);
    if (out.generated_rate_inferred_sigma > 0.0) {
      const double dev = std::abs(out.generated_rate_inferred -
                                  out.generated_rate_theoretical);
      out.rates_disagree = dev > 3.0 * out.generated_rate_inferred_sigma;
    }
  }
  return out;
}

BackgroundBudget background_budget(const ExperimentConfig& config,
                                   double duration) {
  validate_config(config);
  if (!(duration >= 0.0)) {
    throw input_error("budget", "duration must be non-negative");
  }
  BackgroundBudget out;
  out.effective_dark_rates = effective_dark_rates(config);
  const double acceptance = config.window * config.mixture_fraction_wanted *
                            config.branching_854 * config.repetition_rate *
                            duration;
  double var = 0.0;
  for (std::size_t d = 0; d < out.effective_dark_rates.size(); ++d) {
    out.expected += out.effective_dark_rates[d] * acceptance;
    if (d < config.dark_count_rate_sigmas.size()) {
      const double s = config.dark_count_rate_sigmas[d] * acceptance;
      var += s * s;
    }
  }
  out.sigma = std::sqrt(var);
  return out;
}

SbrResult sbr(double signal_events, double background_events) {
  if (signal_events < 0.0 || background_events < 0.0) {
    throw input_error("budget", "event counts must be non-negative");
  }
  SbrResult out;
  if (background_events == 0.0) {
    out.value = std::numeric_limits<double>::infinity();
    out.finite = false;
    return out;
  }
  out.value = signal_events / background_events;
  return out;
}

BudgetComparison compare_budgets(const ExperimentConfig& converted,
                                 const ExperimentConfig& reference) {
  if (!converted.converter) {
    throw input_error("budget", "comparison needs a converter configuration",
                      {{"field", "converter"}});
  }
  BudgetComparison out;
  out.converted = rate_budget(converted);
  out.reference = rate_budget(reference);

  // End-to-end transmission ratio past the shared collection stage:
  // converter throughput, analyzer transmission, and detector efficiency of
  // the converted arm over the reference arm. Projection absorption affects
  // both arms alike and cancels.
  const double conv_accept = converted.tomography_transmission *
                             mean_detector_efficiency(converted);
  const double ref_accept = reference.tomography_transmission *
                            mean_detector_efficiency(reference);
  if (!(ref_accept > 0.0)) {
    throw input_error("budget", "zero reference acceptance");
  }
  out.transmission_ratio =
      out.converted.conversion_transmission * conv_accept / ref_accept;
  const double rel_conv = throughput_relative_sigma(converted);
  const double rel_ref = throughput_relative_sigma(reference);
  out.transmission_ratio_sigma =
      out.transmission_ratio * std::sqrt(rel_conv * rel_conv +
                                         rel_ref * rel_ref);

  const std::vector<double> dark_conv = effective_dark_rates(converted);
  const std::vector<double> dark_ref = effective_dark_rates(reference);
  double mean_conv = 0.0, mean_ref = 0.0;
  for (double r : dark_conv) mean_conv += r;
  for (double r : dark_ref) mean_ref += r;
  mean_conv /= static_cast<double>(dark_conv.size());
  mean_ref /= static_cast<double>(dark_ref.size());
  out.background_reduction = mean_ref > 0.0 ? mean_conv / mean_ref : 0.0;
  return out;
}

CorrectedHistogram subtract_background_one(const CoincidenceHistogram& h,
                                           double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw input_error("budget", "subtraction fraction outside [0, 1]",
                      {{"value", std::to_string(fraction)}});
  }
  h.validate();
  CorrectedHistogram out = CorrectedHistogram::from_raw(h);
  const int lead_bins = out.first_window_bin();
  if (lead_bins <= 0) {
    throw input_error("budget", "no bins ahead of the analysis window",
                      {{"setting", h.setting.label()}});
  }
  double lead_total = 0.0;
  for (int i = 0; i < lead_bins; ++i) {
    lead_total += static_cast<double>(h.counts[static_cast<std::size_t>(i)]);
  }
  out.dark_per_bin = lead_total / lead_bins;
  out.subtracted_fraction = fraction;
  if (fraction > 0.0) {
    // Poisson mean estimated from lead_bins independent bins.
    out.dark_per_bin_variance = out.dark_per_bin / lead_bins;
    const double removed = fraction * out.dark_per_bin;
    const double extra = fraction * fraction * out.dark_per_bin_variance;
    for (int i = 0; i < out.bins(); ++i) {
      out.values[i] -= removed;
      out.variances[i] += extra;
    }
  }
  return out;
}

std::vector<CorrectedHistogram> subtract_background(
    const std::vector<CoincidenceHistogram>& histograms, double fraction) {
  std::vector<CorrectedHistogram> out;
  out.reserve(histograms.size());
  for (const CoincidenceHistogram& h : histograms) {
    out.push_back(subtract_background_one(h, fraction));
  }
  return out;
}

}  // namespace iontel
