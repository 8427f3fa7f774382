#include "iontel/tomography.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace iontel {

namespace {

// Measurement group: settings sharing photon and ion analysis axes share
// acquisition conditions, 0..8.
int group_of(const BasisSetting& s) {
  return (axis_index(s.photon_axis) - 1) * 3 + (axis_index(s.ion_axis) - 1);
}

double expectation_value(const Eigen::Matrix4cd& effect,
                         const Eigen::Matrix4cd& rho) {
  return effect.transpose().cwiseProduct(rho).sum().real();
}

}  // namespace

DatasetSummary summarize_settings(const std::vector<CorrectedHistogram>& hists,
                                  const AnalysisModel& model) {
  if (hists.size() != 36) {
    throw input_error("tomography", "expected histograms for all 36 settings",
                      "got=" + std::to_string(hists.size()));
  }
  DatasetSummary out;
  out.settings.resize(36);
  out.bin_width = hists.front().bin_width;
  std::array<bool, 36> seen{};
  for (const auto& h : hists) {
    const int idx = h.setting.index();
    if (seen[idx]) {
      throw input_error("tomography", "duplicate setting", h.setting.label());
    }
    seen[idx] = true;
    if (std::abs(h.bin_width - out.bin_width) > 1e-15) {
      throw input_error("tomography", "histograms disagree on bin width");
    }
    SettingSummary s;
    s.setting = h.setting;
    s.windowed_value = h.windowed_value();
    s.windowed_variance = h.windowed_variance();
    if (h.setting.ion_axis != Axis::Z) {
      try {
        const FringeFit f =
            fit_larmor_fringe(h, model.wavepacket, model.larmor_frequency,
                              quadrature_rotation(h.setting.ion_axis));
        s.has_quadratures = true;
        s.quadratures = f.quadratures;
        s.quadrature_covariance = f.quadrature_covariance;
      } catch (const Error& e) {
        s.fringe_note = e.what();
      }
    }
    out.settings[idx] = s;
  }
  return out;
}

PauliEstimate estimate_correlations(const DatasetSummary& data,
                                    const AnalysisModel& model) {
  if (data.settings.size() != 36) {
    throw input_error("tomography", "summary does not cover all 36 settings");
  }
  const double ew = model.window_envelope_mass(data.bin_width);
  if (!(ew > 0.0)) {
    throw input_error("tomography", "analysis window carries no envelope mass");
  }

  auto get = [&](Axis pa, int ps, Axis ia, int is) -> const SettingSummary& {
    const BasisSetting b{pa, ps, ia, is};
    return data.settings[b.index()];
  };

  PauliEstimate out;
  out.values(0, 0) = 1.0;
  out.valid[0][0] = true;

  using Contribution = std::pair<double, double>;  // value, variance
  std::vector<Contribution> pool_0z;
  std::vector<Contribution> pool_ax[4], pool_ay[4];  // photon axis index 1..3
  std::vector<Contribution> pool_0x, pool_0y;

  auto pool = [&](const std::vector<Contribution>& c, int i, int j) {
    if (c.empty()) {
      out.valid[i][j] = false;
      out.notes.push_back("entry (" + std::to_string(i) + "," +
                          std::to_string(j) + ") has no valid measurement");
      return;
    }
    double wsum = 0.0, vsum = 0.0;
    for (const auto& [v, var] : c) {
      const double w = 1.0 / std::max(var, 1e-30);
      wsum += w;
      vsum += w * v;
    }
    out.values(i, j) = std::clamp(vsum / wsum, -1.0, 1.0);
    out.variances(i, j) = 1.0 / wsum;
    out.valid[i][j] = true;
  };

  // Eigenbasis groups: windowed count sums over the four sign combinations.
  for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
    const int ai = axis_index(a);
    double total = 0.0;
    struct Term {
      double c_corr, c_photon, c_ion, value, var;
    };
    std::vector<Term> terms;
    for (int ps : {1, -1}) {
      for (int is : {1, -1}) {
        const auto& s = get(a, ps, Axis::Z, is);
        const double eta = model.relative_efficiency(s.setting);
        const double v = s.windowed_value / eta;
        const double var = s.windowed_variance / (eta * eta);
        terms.push_back({static_cast<double>(ps * is),
                         static_cast<double>(ps), static_cast<double>(is), v,
                         var});
        total += v;
      }
    }
    if (!(total > 0.0)) {
      out.valid[ai][3] = false;
      out.valid[ai][0] = false;
      out.notes.push_back("group " + std::string(1, axis_name(a)) +
                          "/z has no counts");
      continue;
    }
    auto entry = [&](auto coeff) -> Contribution {
      double num = 0.0;
      for (const auto& t : terms) num += coeff(t) * t.value;
      const double s = num / total;
      double var = 0.0;
      for (const auto& t : terms) {
        const double d = coeff(t) - s;
        var += d * d * t.var;
      }
      return {s, var / (total * total)};
    };
    pool({entry([](const Term& t) { return t.c_corr; })}, ai, 3);
    pool({entry([](const Term& t) { return t.c_photon; })}, ai, 0);
    pool_0z.push_back(entry([](const Term& t) { return t.c_ion; }));
  }

  // Precessing-axis groups: quadratures normalized by the group's windowed
  // total. Each group measures both transverse ion components.
  for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
    const int ai = axis_index(a);
    for (Axis m : {Axis::X, Axis::Y}) {
      bool complete = true;
      double total = 0.0, total_var = 0.0;
      double u_ax = 0.0, u_ay = 0.0, u_0x = 0.0, u_0y = 0.0;
      double var_p = 0.0, var_q = 0.0;
      for (int ps : {1, -1}) {
        for (int is : {1, -1}) {
          const auto& s = get(a, ps, m, is);
          if (!s.has_quadratures) {
            complete = false;
            if (!s.fringe_note.empty()) {
              out.notes.push_back(s.setting.label() + ": " + s.fringe_note);
            }
            continue;
          }
          const double eta = model.relative_efficiency(s.setting);
          total += s.windowed_value / eta;
          total_var += s.windowed_variance / (eta * eta);
          const double p = s.quadratures[0] / eta;
          const double q = s.quadratures[1] / eta;
          u_ax += ps * is * p;
          u_0x += is * p;
          u_ay += ps * is * q;
          u_0y += is * q;
          var_p += s.quadrature_covariance(0, 0) / (eta * eta);
          var_q += s.quadrature_covariance(1, 1) / (eta * eta);
        }
      }
      if (!complete || !(total > 0.0)) {
        if (complete) {
          out.notes.push_back("group " + std::string(1, axis_name(a)) + "/" +
                              std::string(1, axis_name(m)) + " has no counts");
        }
        continue;
      }
      auto fringe_entry = [&](double u, double var_u) -> Contribution {
        const double s = ew * u / total;
        const double var = (ew / total) * (ew / total) * var_u +
                           (s / total) * (s / total) * total_var;
        return {s, var};
      };
      pool_ax[ai].push_back(fringe_entry(u_ax, var_p));
      pool_ay[ai].push_back(fringe_entry(u_ay, var_q));
      pool_0x.push_back(fringe_entry(u_0x, var_p));
      pool_0y.push_back(fringe_entry(u_0y, var_q));
    }
  }

  pool(pool_0z, 0, 3);
  pool(pool_0x, 0, 1);
  pool(pool_0y, 0, 2);
  for (int ai = 1; ai <= 3; ++ai) {
    pool(pool_ax[ai], ai, 1);
    pool(pool_ay[ai], ai, 2);
  }
  return out;
}

std::vector<CountSummary> pseudo_counts(const DatasetSummary& data,
                                        const AnalysisModel& model) {
  const double ew = model.window_envelope_mass(data.bin_width);
  // Residues of the transverse modulation inside the window, referenced to
  // the wavepacket start like the fringe regressors.
  const auto [mc, ms] = model.wavepacket.modulated_integral(
      model.window_start, model.window_end, model.larmor_frequency);
  std::vector<CountSummary> out;
  out.reserve(data.settings.size());
  for (const auto& s : data.settings) {
    CountSummary c;
    c.setting = s.setting;
    c.relative_efficiency = model.relative_efficiency(s.setting);
    c.count = s.windowed_value;
    c.variance = s.windowed_variance;
    c.window_mass = ew;
    if (s.setting.ion_axis != Axis::Z) {
      // Rotate the modulation residue into the common transverse frame so
      // cos_mass/sin_mass multiply the x and y spin components directly.
      const double alpha = quadrature_rotation(s.setting.ion_axis);
      const double ca = std::cos(alpha), sa = std::sin(alpha);
      c.cos_mass = (mc * ca - ms * sa) / data.bin_width;
      c.sin_mass = (mc * sa + ms * ca) / data.bin_width;
      if (s.has_quadratures) {
        c.has_quadratures = true;
        c.quadratures = s.quadratures;
        c.quadrature_covariance = s.quadrature_covariance;
      }
    }
    out.push_back(c);
  }
  return out;
}

namespace {

// Log-likelihood split into two kinds of terms. Windowed totals are Poisson
// in mean scale * <effect>; when background subtraction inflates the
// variance past Poisson, the term is tempered by count/variance so its
// curvature matches the measured dispersion. Fringe quadratures are jointly
// Gaussian with their fitted covariance around scale * <effect>. Group
// scales (one per photon-axis/ion-axis pair) are free parameters passed in
// as logs.
struct Likelihood {
  std::vector<Eigen::Matrix4cd> count_effects;  // relative efficiency included
  std::vector<double> counts;                   // clamped at zero
  std::vector<double> count_weights;
  std::vector<int> count_group;

  std::vector<Eigen::Matrix4cd> quad_effect_x, quad_effect_y;
  std::vector<Eigen::Vector2d> quad_values;
  std::vector<Eigen::Matrix2d> quad_precision;
  std::vector<int> quad_group;

  int group_count = 0;

  double operator()(const Eigen::Matrix4cd& rho,
                    const double* log_scales) const {
    double ll = 0.0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const double s = std::exp(log_scales[count_group[k]]);
      const double p = std::max(expectation_value(count_effects[k], rho), 0.0);
      const double mu = std::max(s * p, 1e-12);
      ll += count_weights[k] * (counts[k] * std::log(mu) - mu);
    }
    for (std::size_t k = 0; k < quad_values.size(); ++k) {
      const double s = std::exp(log_scales[quad_group[k]]);
      Eigen::Vector2d r = quad_values[k];
      r[0] -= s * expectation_value(quad_effect_x[k], rho);
      r[1] -= s * expectation_value(quad_effect_y[k], rho);
      ll -= 0.5 * r.dot(quad_precision[k] * r);
    }
    return ll;
  }
};

Likelihood build_likelihood(const std::vector<CountSummary>& counts) {
  Likelihood l;
  std::array<int, 9> remap;
  remap.fill(-1);
  for (const auto& c : counts) {
    if (!std::isfinite(c.count)) {
      throw input_error("tomography", "likelihood count is not finite",
                        c.setting.label());
    }
    if (!(c.relative_efficiency > 0.0)) {
      throw input_error("tomography", "relative efficiency must be positive",
                        c.setting.label());
    }
    const int raw_group = group_of(c.setting);
    if (remap[raw_group] < 0) remap[raw_group] = l.group_count++;
    const int g = remap[raw_group];

    const Eigen::Matrix2cd pp =
        axis_projector(c.setting.photon_axis, c.setting.photon_sign);
    const double is = c.setting.ion_sign;
    Eigen::Matrix4cd w_effect;
    if (c.setting.ion_axis == Axis::Z) {
      // The spin component along the precession axis is stationary, so the
      // windowed total sees the full projector.
      w_effect = c.window_mass *
                 kron(pp, axis_projector(c.setting.ion_axis,
                                         c.setting.ion_sign));
    } else {
      // Transverse components precess: the static half projector carries the
      // window mass, the x/y components only their modulation residues.
      w_effect = c.window_mass * kron(pp, 0.5 * pauli(0)) +
                 c.cos_mass * kron(pp, 0.5 * is * pauli(1)) +
                 c.sin_mass * kron(pp, 0.5 * is * pauli(2));
    }
    l.count_effects.push_back(c.relative_efficiency * w_effect);
    const double clamped = std::max(c.count, 0.0);
    l.counts.push_back(clamped);
    double weight = 1.0;
    if (c.variance > 0.0) {
      weight = std::clamp(std::max(clamped, 1.0) / c.variance, 1e-3, 1.0);
    }
    l.count_weights.push_back(weight);
    l.count_group.push_back(g);

    if (c.has_quadratures) {
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(
          c.quadrature_covariance);
      const double floor =
          std::max(1e-12, 1e-9 * std::abs(es.eigenvalues()[1]));
      if (!(es.eigenvalues()[1] > 0.0)) continue;  // degenerate fit: skip
      const Eigen::Vector2d ev = es.eigenvalues().cwiseMax(floor);
      const Eigen::Matrix2d prec = es.eigenvectors() *
                                   ev.cwiseInverse().asDiagonal() *
                                   es.eigenvectors().transpose();
      l.quad_effect_x.push_back(c.relative_efficiency *
                                kron(pp, 0.5 * is * pauli(1)));
      l.quad_effect_y.push_back(c.relative_efficiency *
                                kron(pp, 0.5 * is * pauli(2)));
      l.quad_values.push_back(c.quadratures);
      l.quad_precision.push_back(prec);
      l.quad_group.push_back(g);
    }
  }
  return l;
}

Eigen::Matrix4cd lower_of(const Eigen::VectorXd& th) {
  Eigen::Matrix4cd l = Eigen::Matrix4cd::Zero();
  int k = 0;
  for (int i = 0; i < 4; ++i) l(i, i) = th[k++];
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < i; ++j) {
      l(i, j) = complexd(th[k], th[k + 1]);
      k += 2;
    }
  }
  return l;
}

Eigen::Matrix4cd rho_of(const Eigen::VectorXd& th) {
  const Eigen::Matrix4cd l = lower_of(th);
  Eigen::Matrix4cd m = l * l.adjoint();
  const double tr = m.trace().real();
  if (!(tr > 1e-300)) return Eigen::Matrix4cd::Identity() / 4.0;
  m /= tr;
  return 0.5 * (m + m.adjoint().eval());
}

// Projects a Hermitian trace-1 candidate onto strictly positive states and
// returns the parameter vector of its Cholesky factor.
Eigen::VectorXd params_from_candidate(const Eigen::Matrix4cd& candidate) {
  Eigen::Matrix4cd h = 0.5 * (candidate + candidate.adjoint());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4cd> es(h);
  Eigen::Vector4d ev = es.eigenvalues().cwiseMax(1e-6);
  ev /= ev.sum();
  const Eigen::Matrix4cd rho = es.eigenvectors() * ev.asDiagonal() *
                               es.eigenvectors().adjoint();
  Eigen::LLT<Eigen::Matrix4cd> llt(rho);
  Eigen::Matrix4cd l;
  if (llt.info() == Eigen::Success) {
    l = llt.matrixL();
  } else {
    l = Eigen::Matrix4cd::Zero();
    for (int i = 0; i < 4; ++i) l(i, i) = std::sqrt(std::max(ev[i], 1e-12));
  }
  Eigen::VectorXd th(16);
  int k = 0;
  for (int i = 0; i < 4; ++i) th[k++] = l(i, i).real();
  for (int i = 1; i < 4; ++i) {
    for (int j = 0; j < i; ++j) {
      th[k++] = l(i, j).real();
      th[k++] = l(i, j).imag();
    }
  }
  return th;
}

}  // namespace

MleResult mle_reconstruct(const std::vector<CountSummary>& counts,
                          const Eigen::Matrix4cd& initial_guess,
                          const MleOptions& options) {
  if (counts.empty()) {
    throw input_error("tomography", "no counts to reconstruct from");
  }
  const Likelihood like = build_likelihood(counts);
  const int np = 16 + like.group_count;
  auto objective = [&](const Eigen::VectorXd& th) {
    return -like(rho_of(th), th.data() + 16);
  };

  Eigen::VectorXd th(np);
  th.head(16) = params_from_candidate(initial_guess);
  {
    // Start each group scale at the count-matching value for the initial
    // state so the first iterations move the state, not the normalization.
    const Eigen::Matrix4cd rho0 = rho_of(th);
    Eigen::VectorXd num = Eigen::VectorXd::Zero(like.group_count);
    Eigen::VectorXd den = Eigen::VectorXd::Zero(like.group_count);
    for (std::size_t k = 0; k < like.counts.size(); ++k) {
      num[like.count_group[k]] += like.counts[k];
      den[like.count_group[k]] +=
          std::max(expectation_value(like.count_effects[k], rho0), 0.0);
    }
    for (int g = 0; g < like.group_count; ++g) {
      th[16 + g] = (num[g] > 0.0 && den[g] > 1e-300)
                       ? std::log(num[g] / den[g])
                       : 0.0;
    }
  }
  double f = objective(th);

  auto gradient = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd g(np);
    Eigen::VectorXd tp = t;
    for (int i = 0; i < np; ++i) {
      const double h = 1e-6 * std::max(1.0, std::abs(t[i]));
      tp[i] = t[i] + h;
      const double fp = objective(tp);
      tp[i] = t[i] - h;
      const double fm = objective(tp);
      tp[i] = t[i];
      g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
  };

  Eigen::VectorXd g = gradient(th);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(np, np);

  MleResult best;
  best.log_likelihood = -f;
  best.gradient_norm = g.norm();
  best.rho = DensityMatrix(rho_of(th));

  int iter = 0;
  bool converged = g.norm() <= options.gradient_tolerance;
  bool last_step_small = false;
  for (; iter < options.max_iterations && !converged; ++iter) {
    Eigen::VectorXd d = -hinv * g;
    bool steepest = false;
    if (d.dot(g) >= 0.0) {
      hinv.setIdentity();
      d = -g;
      steepest = true;
    }
    double f_new = f;
    Eigen::VectorXd th_new = th;
    const auto line_search = [&](const Eigen::VectorXd& dir) {
      const double slope = dir.dot(g);
      double step = 1.0;
      while (step > 1e-14) {
        th_new = th + step * dir;
        f_new = objective(th_new);
        if (f_new <= f + 1e-4 * step * slope) return true;
        step *= 0.5;
      }
      return false;
    };
    bool improved = line_search(d);
    if (!improved && !steepest) {
      // A stale curvature model can stall the search; fall back to the raw
      // gradient before concluding anything about stationarity.
      hinv.setIdentity();
      d = -g;
      improved = line_search(d);
    }
    if (!improved) {
      // No ascent direction resolves an improvement: stationary to working
      // precision.
      converged = true;
      break;
    }
    const Eigen::VectorXd g_new = gradient(th_new);
    const Eigen::VectorXd s = th_new - th;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd hy = hinv * y;
      const double yhy = y.dot(hy);
      hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    } else {
      hinv.setIdentity();
    }
    const double delta = f - f_new;
    th = th_new;
    f = f_new;
    g = g_new;
    if (-f > best.log_likelihood) {
      best.log_likelihood = -f;
      best.gradient_norm = g.norm();
      best.rho = DensityMatrix(rho_of(th));
    }
    if (g.norm() <= options.gradient_tolerance) {
      converged = true;
    } else if (delta <= options.ll_tolerance * (1.0 + std::abs(f))) {
      // Demand two consecutive negligible improvements, with the curvature
      // model rebuilt in between, before accepting stationarity: a single
      // short step can also mean a stale quasi-Newton direction.
      if (last_step_small) {
        converged = true;
      } else {
        last_step_small = true;
        hinv.setIdentity();
      }
    } else {
      last_step_small = false;
    }
  }

  MleResult out;
  out.rho = DensityMatrix(rho_of(th));
  out.iterations = iter;
  out.log_likelihood = -f;
  out.gradient_norm = g.norm();
  out.converged = converged;
  if (!converged) {
    out.rho = best.rho;
    out.log_likelihood = best.log_likelihood;
    out.gradient_norm = best.gradient_norm;
    throw MleError(
        convergence_error(
            "tomography",
            "likelihood maximization hit the iteration cap",
            "iterations=" + std::to_string(iter) +
                " gradient_norm=" + std::to_string(out.gradient_norm)),
        out);
  }
  return out;
}

Reconstruction reconstruct_state(const std::vector<CorrectedHistogram>& hists,
                                 const AnalysisModel& model,
                                 const MleOptions& options) {
  Reconstruction r;
  r.summary = summarize_settings(hists, model);
  r.expectations = estimate_correlations(r.summary, model);
  r.linear_candidate = linear_reconstruct(r.expectations.values);
  r.mle = mle_reconstruct(pseudo_counts(r.summary, model), r.linear_candidate,
                          options);
  return r;
}

double evaluate_functional(const DensityMatrix& rho, StateFunctional f,
                           const Eigen::Vector4cd* target) {
  switch (f) {
    case StateFunctional::FidelityToTarget:
      if (target == nullptr) {
        throw input_error("tomography",
                          "fidelity functional needs a target state");
      }
      return fidelity(rho, *target);
    case StateFunctional::BellFidelity:
      return bell_fidelity(rho);
    case StateFunctional::Purity:
      return purity(rho);
  }
  throw input_error("tomography", "unknown functional");
}

double error_bars(const DatasetSummary& data, const AnalysisModel& model,
                  const MleResult& fit, StateFunctional functional,
                  const Eigen::Vector4cd* target, const MleOptions& options) {
  const double f0 = evaluate_functional(fit.rho, functional, target);
  const Eigen::Matrix4cd warm = fit.rho.matrix();
  const std::vector<CountSummary> base = pseudo_counts(data, model);

  auto shifted_functional = [&](const DatasetSummary& pert) {
    const std::vector<CountSummary> counts = pseudo_counts(pert, model);
    bool same = counts.size() == base.size();
    for (std::size_t k = 0; same && k < counts.size(); ++k) {
      same = counts[k].count == base[k].count &&
             counts[k].has_quadratures == base[k].has_quadratures &&
             (!counts[k].has_quadratures ||
              (counts[k].quadratures[0] == base[k].quadratures[0] &&
               counts[k].quadratures[1] == base[k].quadratures[1]));
    }
    if (same) return 0.0;
    const MleResult r = mle_reconstruct(counts, warm, options);
    return evaluate_functional(r.rho, functional, target) - f0;
  };

  double sumsq = 0.0;
  for (std::size_t i = 0; i < data.settings.size(); ++i) {
    const double sigma = std::sqrt(
        std::max(data.settings[i].windowed_variance, 0.0));
    if (sigma > 0.0) {
      DatasetSummary pert = data;
      pert.settings[i].windowed_value += sigma;
      const double d = shifted_functional(pert);
      sumsq += d * d;
    }
    if (!data.settings[i].has_quadratures) continue;
    for (int q = 0; q < 2; ++q) {
      const double qs = std::sqrt(
          std::max(data.settings[i].quadrature_covariance(q, q), 0.0));
      if (!(qs > 0.0)) continue;
      DatasetSummary pert = data;
      pert.settings[i].quadratures[q] += qs;
      const double d = shifted_functional(pert);
      sumsq += d * d;
    }
  }
  return std::sqrt(sumsq);
}

}  // namespace iontel
