#include "iontel/json_io.hpp"

#include <fstream>

#include "iontel/errors.hpp"

namespace iontel {

namespace {

constexpr double kNs = 1e-9;

double require_number(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_number()) {
    throw io_error("cli-io", "missing or non-numeric field",
                   {{"field", field}});
  }
  return j.at(field).get<double>();
}

double number_or(const json& j, const char* field, double fallback) {
  if (!j.contains(field)) return fallback;
  if (!j.at(field).is_number()) {
    throw io_error("cli-io", "non-numeric field", {{"field", field}});
  }
  return j.at(field).get<double>();
}

std::vector<double> number_list(const json& j, const char* field) {
  if (!j.contains(field) || !j.at(field).is_array()) {
    throw io_error("cli-io", "missing or non-array field", {{"field", field}});
  }
  std::vector<double> out;
  for (const auto& v : j.at(field)) {
    if (!v.is_number()) {
      throw io_error("cli-io", "non-numeric array entry", {{"field", field}});
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw io_error("cli-io", "cannot open file for reading", {{"path", path}});
  }
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) {
    throw io_error("cli-io", "malformed JSON", {{"path", path}});
  }
  return j;
}

void save_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cli-io", "cannot open file for writing", {{"path", path}});
  }
  out << j.dump(2) << "\n";
  if (!out) {
    throw io_error("cli-io", "write failed", {{"path", path}});
  }
}

void save_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw io_error("cli-io", "cannot open file for writing", {{"path", path}});
  }
  out << text;
  if (!out) {
    throw io_error("cli-io", "write failed", {{"path", path}});
  }
}

json setting_to_json(const BasisSetting& s) {
  json j;
  j["photon_axis"] = std::string(1, axis_name(s.photon_axis));
  j["photon_sign"] = s.photon_sign;
  j["ion_axis"] = std::string(1, axis_name(s.ion_axis));
  j["ion_sign"] = s.ion_sign;
  return j;
}

BasisSetting setting_from_json(const json& j) {
  if (!j.is_object()) {
    throw io_error("cli-io", "setting must be an object");
  }
  BasisSetting s;
  try {
    s.photon_axis = axis_from_name(
        j.at("photon_axis").get<std::string>().at(0));
    s.ion_axis = axis_from_name(j.at("ion_axis").get<std::string>().at(0));
  } catch (const json::exception&) {
    throw io_error("cli-io", "setting axes must be strings",
                   {{"field", "photon_axis/ion_axis"}});
  }
  const int sp = static_cast<int>(require_number(j, "photon_sign"));
  const int si = static_cast<int>(require_number(j, "ion_sign"));
  if ((sp != 1 && sp != -1) || (si != 1 && si != -1)) {
    throw io_error("cli-io", "setting signs must be +1 or -1");
  }
  s.photon_sign = sp;
  s.ion_sign = si;
  return s;
}

json histogram_to_json(const CoincidenceHistogram& h) {
  json j;
  j["setting"] = setting_to_json(h.setting);
  j["bin_width_ns"] = h.bin_width / kNs;
  j["counts"] = h.counts;
  j["window_ns"] = {h.window_start / kNs, h.window_end / kNs};
  j["duration_s"] = h.duration;
  return j;
}

CoincidenceHistogram histogram_from_json(const json& j) {
  CoincidenceHistogram h;
  if (!j.contains("setting")) {
    throw io_error("cli-io", "histogram missing setting");
  }
  h.setting = setting_from_json(j.at("setting"));
  h.bin_width = require_number(j, "bin_width_ns") * kNs;
  if (!j.contains("counts") || !j.at("counts").is_array()) {
    throw io_error("cli-io", "histogram missing counts array");
  }
  for (const auto& c : j.at("counts")) {
    if (!c.is_number_integer() || c.get<std::int64_t>() < 0) {
      throw io_error("cli-io", "counts must be non-negative integers");
    }
    h.counts.push_back(c.get<std::int64_t>());
  }
  if (!j.contains("window_ns") || !j.at("window_ns").is_array() ||
      j.at("window_ns").size() != 2) {
    throw io_error("cli-io", "histogram window_ns must hold two numbers");
  }
  h.window_start = j.at("window_ns").at(0).get<double>() * kNs;
  h.window_end = j.at("window_ns").at(1).get<double>() * kNs;
  h.duration = require_number(j, "duration_s");
  h.validate();
  return h;
}

json histograms_to_json(const std::vector<CoincidenceHistogram>& hists) {
  json arr = json::array();
  for (const CoincidenceHistogram& h : hists) arr.push_back(histogram_to_json(h));
  json j;
  j["histograms"] = std::move(arr);
  return j;
}

std::vector<CoincidenceHistogram> histograms_from_json(const json& j) {
  const json* arr = nullptr;
  if (j.is_array()) {
    arr = &j;
  } else if (j.is_object() && j.contains("histograms") &&
             j.at("histograms").is_array()) {
    arr = &j.at("histograms");
  } else {
    throw io_error("cli-io", "expected a histogram array");
  }
  std::vector<CoincidenceHistogram> out;
  out.reserve(arr->size());
  for (const auto& item : *arr) out.push_back(histogram_from_json(item));
  return out;
}

json density_matrix_to_json(const Eigen::MatrixXcd& rho) {
  json re = json::array(), im = json::array();
  for (Eigen::Index r = 0; r < rho.rows(); ++r) {
    json re_row = json::array(), im_row = json::array();
    for (Eigen::Index c = 0; c < rho.cols(); ++c) {
      re_row.push_back(rho(r, c).real());
      im_row.push_back(rho(r, c).imag());
    }
    re.push_back(std::move(re_row));
    im.push_back(std::move(im_row));
  }
  json j;
  j["dim"] = rho.rows();
  j["re"] = std::move(re);
  j["im"] = std::move(im);
  return j;
}

Eigen::MatrixXcd density_matrix_from_json(const json& j) {
  const auto dim = static_cast<Eigen::Index>(require_number(j, "dim"));
  if (dim < 1 || !j.contains("re") || !j.contains("im")) {
    throw io_error("cli-io", "density matrix needs dim, re, im");
  }
  Eigen::MatrixXcd rho(dim, dim);
  const json& re = j.at("re");
  const json& im = j.at("im");
  if (!re.is_array() || !im.is_array() ||
      re.size() != static_cast<std::size_t>(dim) ||
      im.size() != static_cast<std::size_t>(dim)) {
    throw io_error("cli-io", "density matrix rows disagree with dim");
  }
  for (Eigen::Index r = 0; r < dim; ++r) {
    const json& re_row = re.at(static_cast<std::size_t>(r));
    const json& im_row = im.at(static_cast<std::size_t>(r));
    if (re_row.size() != static_cast<std::size_t>(dim) ||
        im_row.size() != static_cast<std::size_t>(dim)) {
      throw io_error("cli-io", "density matrix columns disagree with dim");
    }
    for (Eigen::Index c = 0; c < dim; ++c) {
      rho(r, c) = complexd(re_row.at(static_cast<std::size_t>(c)).get<double>(),
                           im_row.at(static_cast<std::size_t>(c)).get<double>());
    }
  }
  return rho;
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) {
    throw io_error("cli-io", "config must be a JSON object");
  }
  ExperimentConfig c;
  c.repetition_rate = require_number(j, "repetition_rate");
  c.cgc_weight_R = number_or(j, "cgc_weight_R", c.cgc_weight_R);
  c.mixture_fraction_wanted =
      number_or(j, "mixture_fraction_wanted", c.mixture_fraction_wanted);
  c.branching_854 = number_or(j, "branching_854", c.branching_854);
  c.collection_halo = require_number(j, "collection_halo");
  c.fiber_coupling = require_number(j, "fiber_coupling");
  c.window = number_or(j, "window", 300e-9);
  c.wavepacket_window_fraction =
      number_or(j, "wavepacket_window_fraction", 0.65);
  c.larmor_frequency = require_number(j, "larmor_frequency");
  c.depolarization_p = number_or(j, "depolarization_p", 0.0);
  c.readout_infidelity = number_or(j, "readout_infidelity", 0.0);
  c.detector_efficiencies = number_list(j, "detector_efficiencies");
  c.dark_count_rates = number_list(j, "dark_count_rates");
  if (j.contains("converter") && !j.at("converter").is_null()) {
    const json& cv = j.at("converter");
    ConverterConfig conv;
    conv.fiber_transmission = require_number(cv, "fiber_transmission");
    conv.external_efficiency = require_number(cv, "external_efficiency");
    conv.stabilization_duty = require_number(cv, "stabilization_duty");
    conv.conversion_noise_rate = number_or(cv, "conversion_noise_rate", 0.0);
    if (cv.contains("process_channel") &&
        !cv.at("process_channel").is_null()) {
      const json& pc = cv.at("process_channel");
      conv.process_channel.depolarization =
          number_or(pc, "depolarization_p", 0.0);
      conv.process_channel.residual_phase =
          number_or(pc, "residual_phase", 0.0);
      conv.process_channel.arm_imbalance =
          number_or(pc, "arm_imbalance", 1.0);
    }
    c.converter = conv;
  }
  if (j.contains("carving")) {
    if (!j.at("carving").is_boolean()) {
      throw io_error("cli-io", "carving must be a boolean",
                     {{"field", "carving"}});
    }
    c.carving = j.at("carving").get<bool>();
  }
  c.acquisition_duration = require_number(j, "acquisition_duration");
  if (j.contains("rng_seed")) {
    if (!j.at("rng_seed").is_number_integer()) {
      throw io_error("cli-io", "rng_seed must be an integer",
                     {{"field", "rng_seed"}});
    }
    c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  }
  c.tomography_transmission =
      number_or(j, "tomography_transmission", c.tomography_transmission);
  c.bin_width = number_or(j, "bin_width", c.bin_width);
  c.dark_lead = number_or(j, "dark_lead", c.dark_lead);
  c.signal_span = number_or(j, "signal_span", c.signal_span);
  c.tomography_transmission_sigma =
      number_or(j, "tomography_transmission_sigma", 0.0);
  if (j.contains("detector_efficiency_sigmas")) {
    c.detector_efficiency_sigmas =
        number_list(j, "detector_efficiency_sigmas");
  }
  if (j.contains("dark_count_rate_sigmas")) {
    c.dark_count_rate_sigmas = number_list(j, "dark_count_rate_sigmas");
  }
  if (j.contains("measured") && !j.at("measured").is_null()) {
    const json& m = j.at("measured");
    MeasuredTotals t;
    t.signal_events = require_number(m, "signal_events");
    t.background_events = number_or(m, "background_events", 0.0);
    t.duration = require_number(m, "duration");
    c.measured = t;
  }
  validate_config(c);
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["repetition_rate"] = c.repetition_rate;
  j["cgc_weight_R"] = c.cgc_weight_R;
  j["mixture_fraction_wanted"] = c.mixture_fraction_wanted;
  j["branching_854"] = c.branching_854;
  j["collection_halo"] = c.collection_halo;
  j["fiber_coupling"] = c.fiber_coupling;
  j["window"] = c.window;
  j["wavepacket_window_fraction"] = c.wavepacket_window_fraction;
  j["larmor_frequency"] = c.larmor_frequency;
  j["depolarization_p"] = c.depolarization_p;
  j["readout_infidelity"] = c.readout_infidelity;
  j["detector_efficiencies"] = c.detector_efficiencies;
  j["dark_count_rates"] = c.dark_count_rates;
  if (c.converter) {
    json cv;
    cv["fiber_transmission"] = c.converter->fiber_transmission;
    cv["external_efficiency"] = c.converter->external_efficiency;
    cv["stabilization_duty"] = c.converter->stabilization_duty;
    cv["conversion_noise_rate"] = c.converter->conversion_noise_rate;
    json pc;
    pc["depolarization_p"] = c.converter->process_channel.depolarization;
    pc["residual_phase"] = c.converter->process_channel.residual_phase;
    pc["arm_imbalance"] = c.converter->process_channel.arm_imbalance;
    cv["process_channel"] = std::move(pc);
    j["converter"] = std::move(cv);
  }
  j["carving"] = c.carving;
  j["acquisition_duration"] = c.acquisition_duration;
  j["rng_seed"] = c.rng_seed;
  j["tomography_transmission"] = c.tomography_transmission;
  j["bin_width"] = c.bin_width;
  j["dark_lead"] = c.dark_lead;
  j["signal_span"] = c.signal_span;
  j["tomography_transmission_sigma"] = c.tomography_transmission_sigma;
  j["detector_efficiency_sigmas"] = c.detector_efficiency_sigmas;
  j["dark_count_rate_sigmas"] = c.dark_count_rate_sigmas;
  if (c.measured) {
    json m;
    m["signal_events"] = c.measured->signal_events;
    m["background_events"] = c.measured->background_events;
    m["duration"] = c.measured->duration;
    j["measured"] = std::move(m);
  }
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(load_json_file(path));
}

std::vector<EfficiencyCurvePoint> curve_points_from_json(const json& j) {
  if (!j.is_array()) {
    throw io_error("cli-io", "curve points must be an array");
  }
  std::vector<EfficiencyCurvePoint> out;
  for (const auto& p : j) {
    EfficiencyCurvePoint pt;
    pt.pump_power = require_number(p, "pump_w");
    pt.efficiency = require_number(p, "efficiency");
    pt.sigma = number_or(p, "sigma", 0.0);
    out.push_back(pt);
  }
  return out;
}

}  // namespace iontel
