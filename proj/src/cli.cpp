#include "iontel/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "iontel/budget.hpp"
#include "iontel/curve_fit.hpp"
#include "iontel/errors.hpp"
#include "iontel/fringe.hpp"
#include "iontel/json_io.hpp"
#include "iontel/process.hpp"
#include "iontel/rng.hpp"
#include "iontel/simulator.hpp"
#include "iontel/tomography.hpp"

namespace iontel {

namespace {

namespace fs = std::filesystem;

fs::path resolve_out_dir(const std::string& cli_out) {
  std::string dir = cli_out;
  if (const char* env = std::getenv("IONTEL_OUT"); env != nullptr && *env) {
    dir = env;
  }
  if (dir.empty()) dir = ".";
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) {
    throw io_error("cli-io", "cannot create output directory",
                   {{"path", dir}, {"reason", ec.message()}});
  }
  return p;
}

double background_fraction(const std::string& mode) {
  if (mode == "none") return 0.0;
  if (mode == "detector") return kDetectorDarkFraction;
  if (mode == "total") return 1.0;
  throw input_error("cli-io", "unknown background mode",
                    {{"mode", mode}, {"expected", "none|detector|total"}});
}

json metric_json(double value, double sigma) {
  json j;
  j["value"] = value;
  j["sigma"] = sigma;
  return j;
}

json chain_to_json(const DetectionChain& chain) {
  json factors = json::array();
  for (const ChainFactor& f : chain.factors) {
    json item;
    item["name"] = f.name;
    item["value"] = f.value;
    factors.push_back(std::move(item));
  }
  json j;
  j["factors"] = std::move(factors);
  j["generated_rate"] = chain.generated_rate;
  j["detected_rate"] = chain.detected_rate;
  j["candidate_rate"] = chain.candidate_rate;
  return j;
}

// Per-state metric block: overlap with the weight-w target (best phase),
// Bell-state overlap (best phase), purity; each with a finite-difference
// Poisson error bar.
json state_metrics(const Reconstruction& rec, const AnalysisModel& model,
                   double weight) {
  const Eigen::Matrix4cd rho = rec.mle.rho.matrix();
  const BellOverlap ideal = ideal_overlap(rho, weight);
  const Eigen::Vector4cd target = ideal_state(weight, ideal.phase);
  const BellOverlap bell = bell_overlap(rec.mle.rho);

  const double sigma_f =
      error_bars(rec.summary, model, rec.mle,
                 StateFunctional::FidelityToTarget, &target);
  const double sigma_bell =
      error_bars(rec.summary, model, rec.mle, StateFunctional::BellFidelity);
  const double sigma_p =
      error_bars(rec.summary, model, rec.mle, StateFunctional::Purity);

  json j;
  j["target_weight"] = weight;
  j["fidelity_ideal"] = metric_json(ideal.value, sigma_f);
  j["fidelity_ideal"]["phase"] = ideal.phase;
  j["bell_fidelity"] = metric_json(bell.value, sigma_bell);
  j["bell_fidelity"]["phase"] = bell.phase;
  j["purity"] = metric_json(purity(rec.mle.rho), sigma_p);
  return j;
}

json reconstruction_to_json(const Reconstruction& rec) {
  json settings = json::array();
  for (const SettingSummary& s : rec.summary.settings) {
    json item;
    item["setting"] = setting_to_json(s.setting);
    item["windowed_value"] = s.windowed_value;
    item["windowed_variance"] = s.windowed_variance;
    if (s.has_quadratures) {
      item["quadratures"] = {s.quadratures[0], s.quadratures[1]};
      item["quadrature_variances"] = {s.quadrature_covariance(0, 0),
                                      s.quadrature_covariance(1, 1)};
    }
    if (!s.fringe_note.empty()) item["fringe_note"] = s.fringe_note;
    settings.push_back(std::move(item));
  }

  json expectations;
  json values = json::array(), variances = json::array(), valid = json::array();
  for (int i = 0; i < 4; ++i) {
    json vrow = json::array(), srow = json::array(), brow = json::array();
    for (int k = 0; k < 4; ++k) {
      vrow.push_back(rec.expectations.values(i, k));
      srow.push_back(rec.expectations.variances(i, k));
      brow.push_back(rec.expectations.valid[i][k]);
    }
    values.push_back(std::move(vrow));
    variances.push_back(std::move(srow));
    valid.push_back(std::move(brow));
  }
  expectations["values"] = std::move(values);
  expectations["variances"] = std::move(variances);
  expectations["valid"] = std::move(valid);
  if (!rec.expectations.notes.empty()) {
    expectations["notes"] = rec.expectations.notes;
  }

  json mle;
  mle["rho"] = density_matrix_to_json(rec.mle.rho.matrix());
  mle["iterations"] = rec.mle.iterations;
  mle["log_likelihood"] = rec.mle.log_likelihood;
  mle["gradient_norm"] = rec.mle.gradient_norm;
  mle["converged"] = rec.mle.converged;

  json j;
  j["settings"] = std::move(settings);
  j["expectations"] = std::move(expectations);
  j["linear_candidate"] = density_matrix_to_json(rec.linear_candidate);
  j["mle"] = std::move(mle);
  return j;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += "\"";
  return out;
}

void write_histogram_csv(const fs::path& path,
                         const std::vector<CoincidenceHistogram>& hists) {
  std::ostringstream csv;
  csv << "setting,bin,time_ns,counts\n";
  for (const CoincidenceHistogram& h : hists) {
    for (int i = 0; i < h.bins(); ++i) {
      csv << csv_escape(h.setting.label()) << "," << i << ","
          << h.bin_center(i) * 1e9 << ","
          << h.counts[static_cast<std::size_t>(i)] << "\n";
    }
  }
  save_text_file(path.string(), csv.str());
}

// Fringe plot data: corrected bin values with the fitted model, restricted
// to the wavepacket region, for every precessing-axis setting.
void write_fringe_csv(const fs::path& path,
                      const std::vector<CorrectedHistogram>& hists,
                      const AnalysisModel& model) {
  std::ostringstream csv;
  csv << "setting,time_ns,value,sigma,fit,visibility,phase\n";
  for (const CorrectedHistogram& h : hists) {
    if (h.setting.ion_axis == Axis::Z) continue;
    FringeFit fit;
    try {
      fit = fit_larmor_fringe(h, model.wavepacket, model.larmor_frequency,
                              quadrature_rotation(h.setting.ion_axis));
    } catch (const Error&) {
      continue;
    }
    // Undo the reference rotation to recover the raw cos/sin coefficients.
    const double ca = std::cos(fit.reference_rotation);
    const double sa = std::sin(fit.reference_rotation);
    const double a = fit.quadratures[0] * ca + fit.quadratures[1] * sa;
    const double b = -fit.quadratures[0] * sa + fit.quadratures[1] * ca;
    const WavepacketShape& shape = model.wavepacket;
    for (int i = 0; i < h.bins(); ++i) {
      const double t1 = i * h.bin_width;
      const double t2 = t1 + h.bin_width;
      if (t2 <= shape.start || t1 >= shape.span_end) continue;
      const double env = shape.envelope_integral(t1, t2) / h.bin_width;
      const auto [mc, ms] =
          shape.modulated_integral(t1, t2, model.larmor_frequency);
      const double fitted = fit.offset + fit.amplitude * env +
                            a * mc / h.bin_width + b * ms / h.bin_width;
      csv << csv_escape(h.setting.label()) << "," << h.bin_center(i) * 1e9
          << "," << h.values[i] << "," << std::sqrt(std::max(h.variances[i], 0.0))
          << "," << fitted << "," << fit.visibility << "," << fit.phase
          << "\n";
    }
  }
  save_text_file(path.string(), csv.str());
}

void write_dm_bars_csv(const fs::path& path, const Eigen::Matrix4cd& rho) {
  std::ostringstream csv;
  csv << "row,col,re,im,abs\n";
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      csv << r << "," << c << "," << rho(r, c).real() << ","
          << rho(r, c).imag() << "," << std::abs(rho(r, c)) << "\n";
    }
  }
  save_text_file(path.string(), csv.str());
}

struct NamedConfig {
  std::string name;
  ExperimentConfig config;
};

// A config file is either a single experiment configuration or a manifest
// {"configs": {name: path-or-object, ...}} with paths relative to the
// manifest location.
std::vector<NamedConfig> load_config_set(const std::string& path) {
  const json j = load_json_file(path);
  if (!j.is_object()) {
    throw io_error("cli-io", "config must be a JSON object", {{"path", path}});
  }
  std::vector<NamedConfig> out;
  if (j.contains("configs")) {
    const json& set = j.at("configs");
    if (!set.is_object() || set.empty()) {
      throw io_error("cli-io", "manifest configs must be a non-empty object",
                     {{"path", path}});
    }
    for (const auto& [name, value] : set.items()) {
      if (value.is_string()) {
        const fs::path ref = fs::path(path).parent_path() /
                             value.get<std::string>();
        out.push_back({name, load_config(ref.string())});
      } else if (value.is_object()) {
        out.push_back({name, config_from_json(value)});
      } else {
        throw io_error("cli-io", "manifest entry must be a path or object",
                       {{"config", name}});
      }
    }
    return out;
  }
  out.push_back({"default", config_from_json(j)});
  return out;
}

std::optional<std::uint64_t> manifest_seed(const std::string& path) {
  const json j = load_json_file(path);
  if (j.is_object() && j.contains("rng_seed") &&
      j.at("rng_seed").is_number_integer()) {
    return j.at("rng_seed").get<std::uint64_t>();
  }
  return std::nullopt;
}

json rate_budget_to_json(const RateBudget& b) {
  json j;
  j["generated_rate_theoretical"] = b.generated_rate_theoretical;
  j["detected_rate_theoretical"] = b.detected_rate_theoretical;
  if (b.measured_available) {
    j["detected_rate_measured"] = b.detected_rate_measured;
    j["generated_rate_inferred"] = b.generated_rate_inferred;
    j["generated_rate_inferred_sigma"] = b.generated_rate_inferred_sigma;
    j["rates_disagree"] = b.rates_disagree;
  }
  if (b.has_converter) {
    j["conversion_transmission"] = b.conversion_transmission;
  }
  json factors = json::array();
  for (const ChainFactor& f : b.factors) {
    json item;
    item["name"] = f.name;
    item["value"] = f.value;
    factors.push_back(std::move(item));
  }
  j["factors"] = std::move(factors);
  return j;
}

int run_simulate(const std::string& config_path,
                 std::optional<std::uint64_t> seed, const std::string& out,
                 double duration_scale) {
  ExperimentConfig config = load_config(config_path);
  if (seed) config.rng_seed = *seed;
  if (!(duration_scale > 0.0)) {
    throw input_error("cli-io", "duration scale must be positive");
  }
  config.acquisition_duration *= duration_scale;

  const fs::path dir = resolve_out_dir(out);
  const SimulatedDataset data = simulate(config);

  save_json_file((dir / "histograms.json").string(),
                 histograms_to_json(data.histograms));

  json truth;
  truth["rho"] = density_matrix_to_json(data.truth.rho.matrix());
  truth["weight"] = data.truth.weight;
  truth["purity"] = data.truth.purity;
  truth["fidelity_ideal"] = data.truth.fidelity_ideal;
  truth["bell_fidelity"] = data.truth.bell.value;
  truth["bell_phase"] = data.truth.bell.phase;
  truth["windowed_signal"] = data.windowed_signal;
  truth["windowed_background"] = data.windowed_background;
  truth["chain"] = chain_to_json(detection_probability_chain(config));
  truth["config"] = config_to_json(config);
  save_json_file((dir / "truth.json").string(), truth);

  write_histogram_csv(dir / "histograms.csv", data.histograms);
  std::cout << "simulate: wrote " << (dir / "histograms.json").string()
            << " (" << data.windowed_signal << " windowed signal / "
            << data.windowed_background << " background events)\n";
  return 0;
}

int run_tomo(const std::string& config_path, const std::string& input_path,
             const std::string& mode, const std::string& out) {
  const ExperimentConfig config = load_config(config_path);
  const AnalysisModel model = analysis_model(config);
  const double fraction = background_fraction(mode);

  const std::vector<CoincidenceHistogram> raw =
      histograms_from_json(load_json_file(input_path));
  const std::vector<CorrectedHistogram> corrected =
      subtract_background(raw, fraction);

  const Reconstruction rec = reconstruct_state(corrected, model);
  const double weight = config.carving ? 0.5 : config.cgc_weight_R;

  const fs::path dir = resolve_out_dir(out);
  json report;
  report["background_mode"] = mode;
  report["subtracted_fraction"] = fraction;
  report["reconstruction"] = reconstruction_to_json(rec);
  report["metrics"] = state_metrics(rec, model, weight);
  save_json_file((dir / "report.json").string(), report);
  save_json_file((dir / "rho.json").string(),
                 density_matrix_to_json(rec.mle.rho.matrix()));
  write_fringe_csv(dir / "fringes.csv", corrected, model);
  write_dm_bars_csv(dir / "dm_bars.csv", rec.mle.rho.matrix());

  const json& metrics = report.at("metrics");
  std::cout << "tomo: F=" << metrics.at("fidelity_ideal").at("value")
            << " F_Bell=" << metrics.at("bell_fidelity").at("value")
            << " P=" << metrics.at("purity").at("value") << ", wrote "
            << (dir / "report.json").string() << "\n";
  return 0;
}

int run_process_tomo(const std::string& config_path,
                     std::optional<std::uint64_t> seed, double photons,
                     const std::string& out) {
  const ExperimentConfig config = load_config(config_path);
  if (!config.converter) {
    throw input_error("cli-io",
                      "process tomography needs a converter configuration",
                      {{"field", "converter"}});
  }
  const PolarizationChannel& channel = config.converter->process_channel;
  const std::uint64_t base_seed = seed ? *seed : config.rng_seed;

  const std::array<Eigen::Vector3d, 4> probes = standard_probe_states();
  std::array<StokesVector, 4> outputs;
  json probe_json = json::array();
  for (std::size_t i = 0; i < probes.size(); ++i) {
    Eigen::Matrix2cd rho = 0.5 * Eigen::Matrix2cd::Identity();
    for (int c = 0; c < 3; ++c) rho += 0.5 * probes[i][c] * pauli(c + 1);
    const Eigen::Matrix2cd rho_out = apply_polarization_channel(channel, rho);
    CounterRng rng(base_seed, 100 + i);
    outputs[i] = measure_stokes(rho_out, photons, rng);
    json p;
    p["input"] = {probes[i][0], probes[i][1], probes[i][2]};
    p["output_s"] = {outputs[i].s[0], outputs[i].s[1], outputs[i].s[2]};
    p["output_sigma"] = {outputs[i].sigma[0], outputs[i].sigma[1],
                         outputs[i].sigma[2]};
    probe_json.push_back(std::move(p));
  }

  const ProcessTomographyResult result = process_tomography(outputs);

  const fs::path dir = resolve_out_dir(out);
  json report;
  json ch;
  ch["depolarization_p"] = channel.depolarization;
  ch["residual_phase"] = channel.residual_phase;
  ch["arm_imbalance"] = channel.arm_imbalance;
  report["channel"] = std::move(ch);
  report["photons_per_basis"] = photons;
  report["probes"] = std::move(probe_json);
  report["chi"] = density_matrix_to_json(result.process.chi);
  report["process_fidelity"] = result.fidelity_identity;
  report["process_fidelity_sigma"] = result.fidelity_identity_sigma;
  report["trace_preservation_defect"] =
      result.process.trace_preservation_defect();
  json linear = json::array();
  for (int r = 0; r < 3; ++r) {
    linear.push_back({result.linear_part(r, 0), result.linear_part(r, 1),
                      result.linear_part(r, 2)});
  }
  report["linear_part"] = std::move(linear);
  report["translation"] = {result.translation[0], result.translation[1],
                           result.translation[2]};
  save_json_file((dir / "process.json").string(), report);
  std::cout << "process-tomo: F_pro=" << result.fidelity_identity << " +- "
            << result.fidelity_identity_sigma << ", wrote "
            << (dir / "process.json").string() << "\n";
  return 0;
}

int run_budget(const std::string& config_path, const std::string& out) {
  const std::vector<NamedConfig> configs = load_config_set(config_path);

  json report;
  json per_config;
  const ExperimentConfig* converted = nullptr;
  const ExperimentConfig* reference = nullptr;
  for (const NamedConfig& nc : configs) {
    const RateBudget rates = rate_budget(nc.config);
    const double duration = nc.config.measured
                                ? nc.config.measured->duration
                                : nc.config.acquisition_duration;
    const BackgroundBudget bg = background_budget(nc.config, duration);

    json block = rate_budget_to_json(rates);
    json bg_json;
    bg_json["expected"] = bg.expected;
    bg_json["sigma"] = bg.sigma;
    bg_json["effective_dark_rates"] = bg.effective_dark_rates;
    bg_json["duration"] = duration;
    block["background"] = std::move(bg_json);
    if (nc.config.measured) {
      const SbrResult measured_sbr = sbr(nc.config.measured->signal_events,
                                         nc.config.measured->background_events);
      json s;
      s["value"] = measured_sbr.finite
                       ? json(measured_sbr.value)
                       : json("infinite");
      s["finite"] = measured_sbr.finite;
      block["sbr_measured"] = std::move(s);
      const SbrResult expected_sbr =
          sbr(nc.config.measured->signal_events, bg.expected);
      json e;
      e["value"] = expected_sbr.finite ? json(expected_sbr.value)
                                       : json("infinite");
      e["finite"] = expected_sbr.finite;
      block["sbr_expected"] = std::move(e);
    }
    per_config[nc.name] = std::move(block);

    if (nc.config.converter && converted == nullptr) {
      converted = &nc.config;
    } else if (!nc.config.converter && reference == nullptr) {
      reference = &nc.config;
    }
  }
  report["configs"] = std::move(per_config);

  if (converted != nullptr && reference != nullptr) {
    const BudgetComparison cmp = compare_budgets(*converted, *reference);
    json c;
    c["transmission_ratio"] = cmp.transmission_ratio;
    c["transmission_ratio_sigma"] = cmp.transmission_ratio_sigma;
    c["background_reduction"] = cmp.background_reduction;
    report["comparison"] = std::move(c);
  }

  const fs::path dir = resolve_out_dir(out);
  save_json_file((dir / "budget.json").string(), report);
  std::cout << "budget: wrote " << (dir / "budget.json").string() << "\n";
  return 0;
}

int run_fit_curve(const std::string& points_path, const std::string& out) {
  const json j = load_json_file(points_path);
  if (!j.is_object() || !j.contains("length_m") || !j.contains("curves") ||
      !j.at("curves").is_array() || j.at("curves").empty()) {
    throw io_error("cli-io", "curve file needs length_m and curves[]",
                   {{"path", points_path}});
  }
  const double length = j.at("length_m").get<double>();

  struct NamedFit {
    std::string name;
    std::vector<EfficiencyCurvePoint> points;
    EfficiencyCurveFit fit;
  };
  std::vector<NamedFit> fits;
  for (const auto& curve : j.at("curves")) {
    NamedFit nf;
    nf.name = curve.contains("name") ? curve.at("name").get<std::string>()
                                     : std::to_string(fits.size());
    nf.points = curve_points_from_json(curve.at("points"));
    nf.fit = fit_efficiency_curve(nf.points, length);
    fits.push_back(std::move(nf));
  }

  json report;
  report["length_m"] = length;
  json curves = json::array();
  double plot_max_power = 0.0;
  for (const NamedFit& nf : fits) {
    json c;
    c["name"] = nf.name;
    c["eta_max"] = nf.fit.eta_max;
    c["eta_nor"] = nf.fit.eta_nor;
    c["covariance"] = {{nf.fit.covariance(0, 0), nf.fit.covariance(0, 1)},
                       {nf.fit.covariance(1, 0), nf.fit.covariance(1, 1)}};
    c["chi_square"] = nf.fit.chi_square;
    c["dof"] = nf.fit.dof;
    curves.push_back(std::move(c));
    for (const EfficiencyCurvePoint& p : nf.points) {
      plot_max_power = std::max(plot_max_power, p.pump_power);
    }
  }
  report["curves"] = std::move(curves);
  if (fits.size() >= 2) {
    const WorkingPoint wp = working_point(fits[0].fit, fits[1].fit, length);
    json w;
    w["pump_w"] = wp.pump_power;
    w["efficiency"] = wp.efficiency;
    report["working_point"] = std::move(w);
  }

  const fs::path dir = resolve_out_dir(out);
  save_json_file((dir / "curve_fit.json").string(), report);

  std::ostringstream csv;
  csv << "kind,name,pump_w,efficiency,sigma\n";
  for (const NamedFit& nf : fits) {
    for (const EfficiencyCurvePoint& p : nf.points) {
      csv << "data," << csv_escape(nf.name) << "," << p.pump_power << ","
          << p.efficiency << "," << p.sigma << "\n";
    }
    for (int i = 0; i <= 200; ++i) {
      const double p = plot_max_power * static_cast<double>(i) / 200.0;
      csv << "fit," << csv_escape(nf.name) << "," << p << ","
          << eta_ext(p, nf.fit.eta_max, nf.fit.eta_nor, length) << ",\n";
    }
  }
  save_text_file((dir / "curves.csv").string(), csv.str());
  std::cout << "fit-curve: wrote " << (dir / "curve_fit.json").string()
            << "\n";
  return 0;
}

int run_reproduce_tables(const std::string& config_path,
                         std::optional<std::uint64_t> seed,
                         const std::string& out, double duration_scale) {
  if (!(duration_scale > 0.0)) {
    throw input_error("cli-io", "duration scale must be positive");
  }
  const std::vector<NamedConfig> configs = load_config_set(config_path);
  std::uint64_t base_seed = 1;
  if (const auto ms = manifest_seed(config_path)) base_seed = *ms;
  if (seed) base_seed = *seed;

  const std::array<std::pair<const char*, const char*>, 3> modes = {
      {{"total", "total"}, {"detector", "detector"}, {"none", "none"}}};

  json cells;
  std::ostringstream csv;
  csv << "config,mode,fidelity,fidelity_sigma,bell_fidelity,"
         "bell_fidelity_sigma,purity,purity_sigma\n";

  for (std::size_t ci = 0; ci < configs.size(); ++ci) {
    ExperimentConfig config = configs[ci].config;
    config.rng_seed = mix_seed(base_seed, ci);
    config.acquisition_duration *= duration_scale;
    const SimulatedDataset data = simulate(config);
    const AnalysisModel model = analysis_model(config);
    const double weight = config.carving ? 0.5 : config.cgc_weight_R;

    json config_cells;
    json truth;
    truth["fidelity_ideal"] = data.truth.fidelity_ideal;
    truth["bell_fidelity"] = data.truth.bell.value;
    truth["purity"] = data.truth.purity;
    config_cells["truth"] = std::move(truth);

    for (const auto& [mode_name, mode_key] : modes) {
      const double fraction = background_fraction(mode_name);
      const std::vector<CorrectedHistogram> corrected =
          subtract_background(data.histograms, fraction);
      const Reconstruction rec = reconstruct_state(corrected, model);
      const json metrics = state_metrics(rec, model, weight);
      csv << csv_escape(configs[ci].name) << "," << mode_name << ","
          << metrics.at("fidelity_ideal").at("value").get<double>() << ","
          << metrics.at("fidelity_ideal").at("sigma").get<double>() << ","
          << metrics.at("bell_fidelity").at("value").get<double>() << ","
          << metrics.at("bell_fidelity").at("sigma").get<double>() << ","
          << metrics.at("purity").at("value").get<double>() << ","
          << metrics.at("purity").at("sigma").get<double>() << "\n";
      config_cells[mode_key] = metrics;
      std::cout << "reproduce-tables: " << configs[ci].name << "/" << mode_name
                << " F_Bell="
                << metrics.at("bell_fidelity").at("value").get<double>()
                << "\n";
    }
    cells[configs[ci].name] = std::move(config_cells);
  }

  json report;
  report["rng_seed"] = base_seed;
  report["duration_scale"] = duration_scale;
  report["cells"] = std::move(cells);

  const fs::path dir = resolve_out_dir(out);
  save_json_file((dir / "tables.json").string(), report);
  save_text_file((dir / "tables.csv").string(), csv.str());
  std::cout << "reproduce-tables: wrote " << (dir / "tables.json").string()
            << "\n";
  return 0;
}

int run_validate(const std::string& config_path, const std::string& out) {
  const ExperimentConfig config = load_config(config_path);
  const json echo = config_to_json(config);
  if (!out.empty() || std::getenv("IONTEL_OUT") != nullptr) {
    const fs::path dir = resolve_out_dir(out);
    save_json_file((dir / "config_normalized.json").string(), echo);
  }
  std::cout << echo.dump(2) << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{
      "Desk-scale simulator and analysis toolkit for an ion-photon "
      "entanglement interface with telecom frequency conversion"};
  app.require_subcommand(1);

  std::string config_path, input_path, out_dir, mode = "total",
              points_path;
  double duration_scale = 1.0;
  double photons = 1e5;
  std::optional<std::uint64_t> seed;
  std::uint64_t seed_value = 0;
  bool seed_given = false;

  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed_value, "Override the configured RNG seed")
        ->each([&](const std::string&) { seed_given = true; });
  };

  CLI::App* simulate_cmd =
      app.add_subcommand("simulate", "Generate a coincidence dataset");
  simulate_cmd->add_option("--config", config_path, "Experiment config JSON")
      ->required();
  add_seed(simulate_cmd);
  simulate_cmd->add_option("--out", out_dir, "Output directory");
  simulate_cmd->add_option("--duration-scale", duration_scale,
                           "Scale factor on acquisition duration");

  CLI::App* tomo_cmd =
      app.add_subcommand("tomo", "Reconstruct a state from histograms");
  tomo_cmd->add_option("--config", config_path, "Experiment config JSON")
      ->required();
  tomo_cmd->add_option("--input", input_path, "Histogram JSON file")
      ->required();
  tomo_cmd->add_option("--background", mode,
                       "Background subtraction: none|detector|total");
  tomo_cmd->add_option("--out", out_dir, "Output directory");

  CLI::App* process_cmd = app.add_subcommand(
      "process-tomo", "Probe-state process tomography of the converter");
  process_cmd->add_option("--config", config_path, "Experiment config JSON")
      ->required();
  add_seed(process_cmd);
  process_cmd->add_option("--photons", photons,
                          "Simulated photons per analysis basis");
  process_cmd->add_option("--out", out_dir, "Output directory");

  CLI::App* budget_cmd = app.add_subcommand(
      "budget", "Rate, efficiency, and background bookkeeping");
  budget_cmd
      ->add_option("--config", config_path,
                   "Config JSON or {\"configs\": {...}} manifest")
      ->required();
  budget_cmd->add_option("--out", out_dir, "Output directory");

  CLI::App* curve_cmd = app.add_subcommand(
      "fit-curve", "Fit conversion-efficiency curves versus pump power");
  curve_cmd->add_option("--points", points_path, "Curve points JSON")
      ->required();
  curve_cmd->add_option("--out", out_dir, "Output directory");

  CLI::App* tables_cmd = app.add_subcommand(
      "reproduce-tables",
      "Simulate and reanalyze the three configurations under all "
      "background modes");
  tables_cmd
      ->add_option("--config", config_path, "Manifest with the three configs")
      ->required();
  add_seed(tables_cmd);
  tables_cmd->add_option("--out", out_dir, "Output directory");
  tables_cmd->add_option("--duration-scale", duration_scale,
                         "Scale factor on acquisition durations");

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "Validate and echo a config file");
  validate_cmd->add_option("--config", config_path, "Experiment config JSON")
      ->required();
  validate_cmd->add_option("--out", out_dir, "Output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (seed_given) seed = seed_value;

  try {
    if (simulate_cmd->parsed()) {
      return run_simulate(config_path, seed, out_dir, duration_scale);
    }
    if (tomo_cmd->parsed()) {
      return run_tomo(config_path, input_path, mode, out_dir);
    }
    if (process_cmd->parsed()) {
      return run_process_tomo(config_path, seed, photons, out_dir);
    }
    if (budget_cmd->parsed()) {
      return run_budget(config_path, out_dir);
    }
    if (curve_cmd->parsed()) {
      return run_fit_curve(points_path, out_dir);
    }
    if (tables_cmd->parsed()) {
      return run_reproduce_tables(config_path, seed, out_dir, duration_scale);
    }
    if (validate_cmd->parsed()) {
      return run_validate(config_path, out_dir);
    }
    throw input_error("cli-io", "no subcommand selected");
  } catch (const Error& e) {
    json err;
    err["code"] = e.code();
    err["module"] = e.module();
    err["message"] = e.message();
    err["context"] = e.context();
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    json err;
    err["code"] = "internal";
    err["module"] = "cli-io";
    err["message"] = e.what();
    err["context"] = "";
    std::cerr << err.dump() << "\n";
    return 2;
  }
}

}  // namespace iontel
