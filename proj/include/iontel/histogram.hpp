#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "iontel/pauli.hpp"

namespace iontel {

// One of the 36 joint analysis settings: a photon projection axis/sign and an
// ion projection axis/sign. For superposition ion axes (x, y) the measured
// direction precesses at the Larmor frequency; the axis here names the
// direction at the timing origin.
struct BasisSetting {
  Axis photon_axis = Axis::Z;
  int photon_sign = 1;
  Axis ion_axis = Axis::Z;
  int ion_sign = 1;

  // Canonical enumeration: photon axis/sign major, ion axis/sign minor.
  int index() const {
    const int p = (axis_index(photon_axis) - 1) * 2 + (photon_sign < 0 ? 1 : 0);
    const int i = (axis_index(ion_axis) - 1) * 2 + (ion_sign < 0 ? 1 : 0);
    return p * 6 + i;
  }

  static BasisSetting from_index(int idx);
  static const std::array<BasisSetting, 36>& all();

  std::string label() const;

  friend bool operator==(const BasisSetting& a, const BasisSetting& b) {
    return a.index() == b.index();
  }
};

// Coincidence counts versus photon detection time for one setting. The time
// axis starts at the analysis gate; the wavepacket sits at window_start with
// pure-dark bins before it. duration is the wall-clock time of the acquisition
// run that produced the histogram (runs yield one histogram per ion outcome,
// so histograms from the same run share the duration value).
struct CoincidenceHistogram {
  BasisSetting setting;
  double bin_width = 0.0;
  std::vector<std::int64_t> counts;
  double window_start = 0.0;
  double window_end = 0.0;
  double duration = 0.0;

  int bins() const { return static_cast<int>(counts.size()); }
  double span() const { return bin_width * counts.size(); }
  double bin_center(int i) const { return (i + 0.5) * bin_width; }

  void validate() const;
};

// Real-valued bin means with variances, the common currency after background
// subtraction (raw histograms embed with variance = counts).
struct CorrectedHistogram {
  BasisSetting setting;
  double bin_width = 0.0;
  Eigen::VectorXd values;
  Eigen::VectorXd variances;
  double window_start = 0.0;
  double window_end = 0.0;
  double duration = 0.0;
  double dark_per_bin = 0.0;
  double dark_per_bin_variance = 0.0;
  double subtracted_fraction = 0.0;

  static CorrectedHistogram from_raw(const CoincidenceHistogram& h);

  int bins() const { return static_cast<int>(values.size()); }
  double span() const { return bin_width * values.size(); }
  double bin_center(int i) const { return (i + 0.5) * bin_width; }
  int first_window_bin() const;
  int end_window_bin() const;  // one past the last window bin

  double windowed_value() const;
  double windowed_variance() const;
};

}  // namespace iontel
