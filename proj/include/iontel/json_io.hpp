#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "iontel/budget.hpp"
#include "iontel/histogram.hpp"
#include "iontel/simulator.hpp"

namespace iontel {

using json = nlohmann::ordered_json;

json load_json_file(const std::string& path);
void save_json_file(const std::string& path, const json& j);
void save_text_file(const std::string& path, const std::string& text);

json setting_to_json(const BasisSetting& s);
BasisSetting setting_from_json(const json& j);

// Histogram files carry times in nanoseconds; the in-memory structs use
// seconds.
json histogram_to_json(const CoincidenceHistogram& h);
CoincidenceHistogram histogram_from_json(const json& j);

json histograms_to_json(const std::vector<CoincidenceHistogram>& hists);
std::vector<CoincidenceHistogram> histograms_from_json(const json& j);

json density_matrix_to_json(const Eigen::MatrixXcd& rho);
Eigen::MatrixXcd density_matrix_from_json(const json& j);

// Normalizing loader: fills defaults, validates every field, and names the
// offending field on failure.
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

std::vector<EfficiencyCurvePoint> curve_points_from_json(const json& j);

}  // namespace iontel
