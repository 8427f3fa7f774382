#include "iontel/histogram.hpp"

#include <cmath>

#include "iontel/errors.hpp"

namespace iontel {

BasisSetting BasisSetting::from_index(int idx) {
  if (idx < 0 || idx >= 36) {
    throw input_error("histogram", "setting index out of range",
                      "index=" + std::to_string(idx));
  }
  const int p = idx / 6;
  const int i = idx % 6;
  BasisSetting s;
  s.photon_axis = static_cast<Axis>(p / 2 + 1);
  s.photon_sign = (p % 2 == 0) ? 1 : -1;
  s.ion_axis = static_cast<Axis>(i / 2 + 1);
  s.ion_sign = (i % 2 == 0) ? 1 : -1;
  return s;
}

const std::array<BasisSetting, 36>& BasisSetting::all() {
  static const std::array<BasisSetting, 36> table = [] {
    std::array<BasisSetting, 36> t;
    for (int k = 0; k < 36; ++k) t[k] = from_index(k);
    return t;
  }();
  return table;
}

std::string BasisSetting::label() const {
  std::string s;
  s += axis_name(photon_axis);
  s += (photon_sign >= 0) ? '+' : '-';
  s += '/';
  s += axis_name(ion_axis);
  s += (ion_sign >= 0) ? '+' : '-';
  return s;
}

void CoincidenceHistogram::validate() const {
  if (bin_width <= 0.0 || !std::isfinite(bin_width)) {
    throw input_error("histogram", "bin width must be positive");
  }
  if (counts.empty()) {
    throw input_error("histogram", "histogram has no bins");
  }
  for (std::int64_t c : counts) {
    if (c < 0) throw input_error("histogram", "negative count");
  }
  if (!(window_start >= 0.0) || !(window_end > window_start)) {
    throw input_error("histogram", "analysis window is not ordered",
                      "start=" + std::to_string(window_start) +
                          " end=" + std::to_string(window_end));
  }
  if (window_end > span() + 1e-12 * bin_width) {
    throw input_error("histogram", "analysis window exceeds histogram span");
  }
  if (duration < 0.0) {
    throw input_error("histogram", "negative acquisition duration");
  }
}

CorrectedHistogram CorrectedHistogram::from_raw(const CoincidenceHistogram& h) {
  h.validate();
  CorrectedHistogram c;
  c.setting = h.setting;
  c.bin_width = h.bin_width;
  c.window_start = h.window_start;
  c.window_end = h.window_end;
  c.duration = h.duration;
  const int n = h.bins();
  c.values.resize(n);
  c.variances.resize(n);
  for (int i = 0; i < n; ++i) {
    c.values[i] = static_cast<double>(h.counts[i]);
    c.variances[i] = static_cast<double>(h.counts[i]);
  }
  return c;
}

int CorrectedHistogram::first_window_bin() const {
  return static_cast<int>(std::floor(window_start / bin_width + 0.5));
}

int CorrectedHistogram::end_window_bin() const {
  const int e = static_cast<int>(std::floor(window_end / bin_width + 0.5));
  return std::min(e, bins());
}

double CorrectedHistogram::windowed_value() const {
  const int a = first_window_bin();
  const int b = end_window_bin();
  if (a < 0 || b <= a) {
    throw input_error("histogram", "analysis window covers no bins");
  }
  return values.segment(a, b - a).sum();
}

double CorrectedHistogram::windowed_variance() const {
  const int a = first_window_bin();
  const int b = end_window_bin();
  if (a < 0 || b <= a) {
    throw input_error("histogram", "analysis window covers no bins");
  }
  double v = variances.segment(a, b - a).sum();
  // Subtracted bins share the dark estimate, so its error is coherent across
  // the window rather than independent per bin.
  const int nw = b - a;
  v += (static_cast<double>(nw) * nw - nw) * subtracted_fraction *
       subtracted_fraction * dark_per_bin_variance;
  return v;
}

}  // namespace iontel
