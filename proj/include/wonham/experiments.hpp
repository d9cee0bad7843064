#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wonham/analysis.hpp"
#include "wonham/dual.hpp"
#include "wonham/filter.hpp"
#include "wonham/paths.hpp"
#include "wonham/stats.hpp"

namespace wonham {

struct ExperimentConfig {
  HmmModel model;
  ProbabilityVector mu;
  ProbabilityVector nu;
  std::vector<Vector> f_list;  // empty: standard basis
  double T = 10.0;
  double dt = 1e-3;
  std::size_t n_trials = 10000;
  std::uint64_t master_seed = 0;
  std::vector<double> checkpoints;  // empty: {0.25, 0.5, 1, 2, 4, 8, T} up to T
  int threads = 0;

  // verdict thresholds
  std::optional<double> stability_final_max;  // stability: final value must not exceed this
  double detection_min_fraction = 0.99;
  double detection_max_mse = 0.01;
  double splitting_tol = 1e-10;

  explicit ExperimentConfig(HmmModel m)
      : model(std::move(m)), mu(ProbabilityVector::uniform(model.d())), nu(ProbabilityVector::uniform(model.d())) {}

  MonteCarloOptions monte_carlo() const { return {n_trials, master_seed, threads}; }
};

/// Time series of Monte Carlo estimates with per-point standard errors.
struct Curve {
  std::string label;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> std_errors;

  double final_value() const { return values.empty() ? 0.0 : values.back(); }
};

using StabilityCurve = Curve;
using ValueCurve = Curve;

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ExperimentReport {
  std::vector<Curve> curves;
  std::vector<Check> checks;
  std::vector<std::string> notes;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

namespace detail {

struct Checkpoint {
  double t;
  std::size_t step;
};

inline std::vector<Checkpoint> resolve_checkpoints(const ExperimentConfig& cfg, bool include_zero = false) {
  const std::size_t n = grid_steps(cfg.T, cfg.dt);
  std::vector<double> ts = cfg.checkpoints;
  if (ts.empty()) {
    for (double t : {0.25, 0.5, 1.0, 2.0, 4.0, 8.0})
      if (t < cfg.T) ts.push_back(t);
    ts.push_back(cfg.T);
  }
  if (include_zero) ts.push_back(0.0);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  std::vector<Checkpoint> out;
  for (double t : ts) {
    if (!(t >= 0.0) || t > cfg.T * (1.0 + 1e-12))
      throw Error(ErrorCode::InvalidArgument, "checkpoint " + std::to_string(t) + " outside [0, T]");
    const double k = std::round(t / cfg.dt);
    if (std::abs(k * cfg.dt - t) > 1e-9 * std::max(1.0, t))
      throw Error(ErrorCode::GridMismatch, "checkpoint " + std::to_string(t) + " is not on the time grid");
    out.push_back({t, std::min(static_cast<std::size_t>(k), n)});
  }
  return out;
}

inline std::vector<Vector> resolve_functions(const ExperimentConfig& cfg) {
  if (!cfg.f_list.empty()) {
    for (const auto& f : cfg.f_list) require_size(f, cfg.model.d(), "f");
    return cfg.f_list;
  }
  std::vector<Vector> out;
  for (Eigen::Index i = 0; i < cfg.model.d(); ++i) out.push_back(Vector::Unit(cfg.model.d(), i));
  return out;
}

/// Reduces per-trial rows (one value per column) to per-column estimates.
inline std::vector<Estimate> column_estimates(const std::vector<std::vector<double>>& rows, std::size_t cols) {
  std::vector<Estimate> out(cols);
  std::vector<double> col(rows.size());
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][j];
    out[j] = estimate(col);
  }
  return out;
}

inline Curve make_curve(std::string label, const std::vector<Checkpoint>& cps, const std::vector<Estimate>& est,
                        std::size_t offset, std::size_t stride) {
  Curve c;
  c.label = std::move(label);
  for (std::size_t j = 0; j < cps.size(); ++j) {
    c.times.push_back(cps[j].t);
    c.values.push_back(est[j * stride + offset].mean);
    c.std_errors.push_back(est[j * stride + offset].std_error);
  }
  return c;
}

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace detail

struct StabilityResult : ExperimentReport {
  std::vector<Vector> f_list;
  std::size_t worst = 0;  // index of the curve with the largest final value
};

/// E^mu |pi_t^mu(f) - pi_t^nu(f)|^2 at the checkpoints, both filters driven by
/// the same observations sampled under P^mu.
inline StabilityResult run_stability(const ExperimentConfig& cfg) {
  if (!cfg.mu.absolutely_continuous_wrt(cfg.nu))
    throw Error(ErrorCode::AbsoluteContinuityViolation, "mu is not absolutely continuous with respect to nu");
  const auto cps = detail::resolve_checkpoints(cfg);
  const auto fs = detail::resolve_functions(cfg);
  const Matrix P = transition_matrix(cfg.model, cfg.dt);
  const std::size_t nf = fs.size();

  const auto rows = run_trials(cfg.n_trials, resolve_threads(cfg.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(cfg.model, cfg.mu, cfg.T, cfg.dt, RngStream(cfg.master_seed, i));
    WonhamFilter fm(cfg.model, cfg.mu, cfg.dt, P);
    WonhamFilter fn(cfg.model, cfg.nu, cfg.dt, P);
    std::vector<double> row(cps.size() * nf);
    std::size_t step = 0;
    for (std::size_t j = 0; j < cps.size(); ++j) {
      for (; step < cps[j].step; ++step) {
        fm.step(tr.obs.increments[step]);
        fn.step(tr.obs.increments[step]);
      }
      for (std::size_t q = 0; q < nf; ++q) {
        const double diff = fm.expect(fs[q]) - fn.expect(fs[q]);
        row[j * nf + q] = diff * diff;
      }
    }
    return row;
  });

  const auto est = detail::column_estimates(rows, cps.size() * nf);
  StabilityResult res;
  res.f_list = fs;
  bool bounded = true;
  for (std::size_t q = 0; q < nf; ++q) {
    res.curves.push_back(detail::make_curve("f" + std::to_string(q + 1), cps, est, q, nf));
    const double cap = osc(fs[q]) * osc(fs[q]);
    const Curve& c = res.curves.back();
    for (std::size_t j = 0; j < c.values.size(); ++j)
      bounded = bounded && c.values[j] >= 0.0 && c.values[j] <= cap + 3.0 * c.std_errors[j] + 1e-12;
    if (c.final_value() > res.curves[res.worst].final_value()) res.worst = q;
  }
  res.checks.push_back({"bounded_by_osc_squared", bounded, "0 <= value <= osc(f)^2 + 3 se at every checkpoint"});
  if (cfg.stability_final_max) {
    const double v = res.curves[res.worst].final_value();
    res.checks.push_back({"final_value_below_threshold", v <= *cfg.stability_final_max,
                          "worst final value " + detail::format_number(v) + " vs " +
                              detail::format_number(*cfg.stability_final_max)});
  }
  return res;
}

struct DetectionResult : ExperimentReport {
  std::vector<double> class_mse;           // at T, per class
  std::vector<double> class_mse_std_error;
  double correct_fraction = 0.0;
  double correct_std_error = 0.0;
  /// Histogram over 10 equal bins of [0, 1] of pi_T(1_{class of X_0}).
  std::vector<std::size_t> terminal_histogram;
};

/// Ergodic-class detection by the filter started from nu, trials under P^mu.
inline DetectionResult run_detection(const ExperimentConfig& cfg) {
  const auto dec = ergodic_decomposition(cfg.model);
  DetectionResult res;
  const std::size_t m = dec.m();
  if (m < 2) {
    res.correct_fraction = 1.0;
    res.class_mse.assign(m, 0.0);
    res.class_mse_std_error.assign(m, 0.0);
    res.notes.push_back(std::string(to_string(ErrorCode::SingleClassModel)) +
                        ": the model has a single ergodic class, so detection is trivially correct");
    res.checks.push_back({"single_class_model", true, "detection is vacuous"});
    return res;
  }
  for (Eigen::Index x = 0; x < cfg.nu.size(); ++x)
    if (!(cfg.nu[x] > 0.0)) throw Error(ErrorCode::InvalidArgument, "detection requires a strictly positive nu");
  const auto cps = detail::resolve_checkpoints(cfg);
  const Matrix P = transition_matrix(cfg.model, cfg.dt);
  constexpr std::size_t bins = 10;

  // row layout: [cps x m squared errors][correct][terminal own-class mass]
  const auto rows = run_trials(cfg.n_trials, resolve_threads(cfg.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(cfg.model, cfg.mu, cfg.T, cfg.dt, RngStream(cfg.master_seed, i));
    const std::size_t cls = dec.class_of[tr.path.initial_state];
    WonhamFilter filt(cfg.model, cfg.nu, cfg.dt, P);
    std::vector<double> row(cps.size() * m + 2);
    std::size_t step = 0;
    for (std::size_t j = 0; j < cps.size(); ++j) {
      for (; step < cps[j].step; ++step) filt.step(tr.obs.increments[step]);
      for (std::size_t k = 0; k < m; ++k) {
        const double e = filt.expect(dec.indicators[k]) - (k == cls ? 1.0 : 0.0);
        row[j * m + k] = e * e;
      }
    }
    for (; step < tr.obs.n_steps(); ++step) filt.step(tr.obs.increments[step]);
    std::size_t best = 0;
    double best_mass = -1.0;
    for (std::size_t k = 0; k < m; ++k) {
      const double mass = filt.expect(dec.indicators[k]);
      if (mass > best_mass) {
        best_mass = mass;
        best = k;
      }
    }
    row[cps.size() * m] = best == cls ? 1.0 : 0.0;
    row[cps.size() * m + 1] = filt.expect(dec.indicators[cls]);
    return row;
  });

  const auto est = detail::column_estimates(rows, cps.size() * m + 2);
  for (std::size_t k = 0; k < m; ++k) {
    res.curves.push_back(detail::make_curve("class" + std::to_string(k + 1) + "_mse", cps, est, k, m));
    res.class_mse.push_back(res.curves.back().final_value());
    res.class_mse_std_error.push_back(res.curves.back().std_errors.back());
  }
  res.correct_fraction = est[cps.size() * m].mean;
  res.correct_std_error = est[cps.size() * m].std_error;
  res.terminal_histogram.assign(bins, 0);
  for (const auto& row : rows) {
    const double v = row[cps.size() * m + 1];
    res.terminal_histogram[std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, v) * bins))]++;
  }
  res.checks.push_back({"correct_class_fraction", res.correct_fraction >= cfg.detection_min_fraction,
                        detail::format_number(res.correct_fraction) + " vs " +
                            detail::format_number(cfg.detection_min_fraction)});
  const double worst = *std::max_element(res.class_mse.begin(), res.class_mse.end());
  res.checks.push_back({"class_indicator_mse", worst <= cfg.detection_max_mse,
                        detail::format_number(worst) + " vs " + detail::format_number(cfg.detection_max_mse)});
  res.notes.push_back("the terminal histogram is an in-probability surrogate for almost-sure detection");
  return res;
}

/// Per-class priors: nu restricted to each class and renormalized, or the
/// class invariant measure when nu gives the class no mass.
inline std::vector<ProbabilityVector> class_priors(const HmmModel& model, const ErgodicDecomposition& dec,
                                                   const ProbabilityVector& nu) {
  std::vector<ProbabilityVector> out;
  for (std::size_t k = 0; k < dec.m(); ++k) {
    const double mass = nu.expect(dec.indicators[k]);
    if (mass > 0.0)
      out.emplace_back(Vector(nu.values().cwiseProduct(dec.indicators[k]) / mass));
    else
      out.push_back(invariant_measure(model, dec, k));
  }
  return out;
}

struct SplittingResult : ExperimentReport {
  double max_deviation = 0.0;
};

/// max over trials, steps and f of |pi^nu(f) - sum_k pi^nu(1_k) pi^{nu_k}(f)|.
inline SplittingResult run_splitting_check(const ExperimentConfig& cfg) {
  const auto dec = ergodic_decomposition(cfg.model);
  const auto priors = class_priors(cfg.model, dec, cfg.nu);
  auto fs = detail::resolve_functions(cfg);
  fs.push_back(Vector::Ones(cfg.model.d()));
  const auto cps = detail::resolve_checkpoints(cfg);
  const Matrix P = transition_matrix(cfg.model, cfg.dt);
  const std::size_t m = dec.m();

  // row: running max deviation at each checkpoint
  const auto rows = run_trials(cfg.n_trials, resolve_threads(cfg.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(cfg.model, cfg.mu, cfg.T, cfg.dt, RngStream(cfg.master_seed, i));
    WonhamFilter whole(cfg.model, cfg.nu, cfg.dt, P);
    std::vector<WonhamFilter> parts;
    for (const auto& p : priors) parts.emplace_back(cfg.model, p, cfg.dt, P);
    auto deviation = [&] {
      double worst = 0.0;
      for (const auto& f : fs) {
        double mix = 0.0;
        for (std::size_t k = 0; k < m; ++k) mix += whole.expect(dec.indicators[k]) * parts[k].expect(f);
        worst = std::max(worst, std::abs(whole.expect(f) - mix));
      }
      return worst;
    };
    std::vector<double> row(cps.size());
    double running = deviation();
    std::size_t step = 0;
    for (std::size_t j = 0; j < cps.size(); ++j) {
      for (; step < cps[j].step; ++step) {
        whole.step(tr.obs.increments[step]);
        for (auto& p : parts) p.step(tr.obs.increments[step]);
        running = std::max(running, deviation());
      }
      row[j] = running;
    }
    return row;
  });

  SplittingResult res;
  Curve c;
  c.label = "max_deviation";
  for (std::size_t j = 0; j < cps.size(); ++j) {
    double mx = 0.0;
    for (const auto& row : rows) mx = std::max(mx, row[j]);
    c.times.push_back(cps[j].t);
    c.values.push_back(mx);
    c.std_errors.push_back(0.0);
  }
  res.max_deviation = c.values.empty() ? 0.0 : c.values.back();
  res.curves.push_back(std::move(c));
  res.checks.push_back({"splitting_identity", res.max_deviation <= cfg.splitting_tol,
                        detail::format_number(res.max_deviation) + " vs " + detail::format_number(cfg.splitting_tol)});
  return res;
}

struct MartingaleResult : ExperimentReport {
  std::vector<double> class_mass;  // nu(1_k)
};

/// Under P^nu the class masses pi_t^nu(1_k) are martingales: their means stay
/// at nu(1_k).
inline MartingaleResult run_martingale_check(const ExperimentConfig& cfg) {
  const auto dec = ergodic_decomposition(cfg.model);
  const auto cps = detail::resolve_checkpoints(cfg, true);
  const Matrix P = transition_matrix(cfg.model, cfg.dt);
  const std::size_t m = dec.m();

  const auto rows = run_trials(cfg.n_trials, resolve_threads(cfg.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(cfg.model, cfg.nu, cfg.T, cfg.dt, RngStream(cfg.master_seed, i));
    WonhamFilter filt(cfg.model, cfg.nu, cfg.dt, P);
    std::vector<double> row(cps.size() * m);
    std::size_t step = 0;
    for (std::size_t j = 0; j < cps.size(); ++j) {
      for (; step < cps[j].step; ++step) filt.step(tr.obs.increments[step]);
      for (std::size_t k = 0; k < m; ++k) row[j * m + k] = filt.expect(dec.indicators[k]);
    }
    return row;
  });

  const auto est = detail::column_estimates(rows, cps.size() * m);
  MartingaleResult res;
  bool ok = true;
  double worst = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    res.class_mass.push_back(cfg.nu.expect(dec.indicators[k]));
    res.curves.push_back(detail::make_curve("class" + std::to_string(k + 1) + "_mass", cps, est, k, m));
    const Curve& c = res.curves.back();
    for (std::size_t j = 0; j < c.values.size(); ++j) {
      const double z = std::abs(c.values[j] - res.class_mass[k]);
      ok = ok && z <= 3.0 * c.std_errors[j] + 1e-12;
      if (c.std_errors[j] > 0.0) worst = std::max(worst, z / c.std_errors[j]);
    }
  }
  res.checks.push_back({"class_mass_martingale", ok, "largest deviation " + detail::format_number(worst) + " se"});
  return res;
}

struct MonotonicityResult : ExperimentReport {
  std::vector<double> closed_form_initial;  // mu(f^2) - mu(f)^2 per f
};

/// J_T = E|f(X_T) - pi_T(f)|^2 under an invariant prior, recorded at t = 0 and
/// at the checkpoints; it must not increase beyond the statistical slack.
inline MonotonicityResult run_monotonicity(const ExperimentConfig& cfg) {
  const Vector drift = cfg.model.A().transpose() * cfg.mu.values();
  if (drift.cwiseAbs().maxCoeff() > 1e-10)
    throw Error(ErrorCode::NotInvariantPrior,
                "prior is not invariant: ||A^T mu||_inf = " + detail::format_number(drift.cwiseAbs().maxCoeff()));
  const auto cps = detail::resolve_checkpoints(cfg, true);
  const auto fs = detail::resolve_functions(cfg);
  const Matrix P = transition_matrix(cfg.model, cfg.dt);
  const std::size_t nf = fs.size();

  const auto rows = run_trials(cfg.n_trials, resolve_threads(cfg.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(cfg.model, cfg.mu, cfg.T, cfg.dt, RngStream(cfg.master_seed, i));
    WonhamFilter filt(cfg.model, cfg.mu, cfg.dt, P);
    const auto states = tr.path.grid_states(cfg.dt, tr.obs.n_steps());
    std::vector<double> row(cps.size() * nf);
    std::size_t step = 0;
    for (std::size_t j = 0; j < cps.size(); ++j) {
      for (; step < cps[j].step; ++step) filt.step(tr.obs.increments[step]);
      for (std::size_t q = 0; q < nf; ++q) {
        const double e = fs[q][states[cps[j].step]] - filt.expect(fs[q]);
        row[j * nf + q] = e * e;
      }
    }
    return row;
  });

  const auto est = detail::column_estimates(rows, cps.size() * nf);
  MonotonicityResult res;
  bool monotone = true, initial = true;
  for (std::size_t q = 0; q < nf; ++q) {
    res.curves.push_back(detail::make_curve("f" + std::to_string(q + 1), cps, est, q, nf));
    const Curve& c = res.curves.back();
    for (std::size_t j = 0; j + 1 < c.values.size(); ++j)
      monotone = monotone && c.values[j + 1] <= c.values[j] + 3.0 * (c.std_errors[j] + c.std_errors[j + 1]) + 1e-12;
    const double closed = quadratic_form(cfg.mu.values(), fs[q]);
    res.closed_form_initial.push_back(closed);
    initial = initial && std::abs(c.values.front() - closed) <= 3.0 * c.std_errors.front() + 1e-12;
  }
  res.checks.push_back({"non_increasing", monotone, "J_{T_{j+1}} <= J_{T_j} + 3 (se_j + se_{j+1})"});
  res.checks.push_back({"initial_value_closed_form", initial, "J_0 within 3 se of mu(f^2) - mu(f)^2"});
  return res;
}

struct NecessityResult : ExperimentReport {
  Vector witness;
  double epsilon = 0.0;
  Vector mu;
  Vector nu;
  double target = 0.0;       // epsilon^2 |f|^4
  double final_value = 0.0;
  std::vector<double> prior_mismatch;  // |mu(Y_0) - nu(Y_0)| at each checkpoint horizon
  double expected_mismatch = 0.0;      // epsilon |f|^2
};

/// Builds the witness-based prior pair for a non-stabilizable model and shows
/// that the filter forgets neither prior.
inline NecessityResult run_necessity_demo(const ExperimentConfig& base) {
  const auto rep = stabilizability(base.model);
  if (rep.verdict) throw Error(ErrorCode::ModelIsStabilizable, "model is stabilizable; there is no witness");
  const Vector f = *rep.witness;
  const Eigen::Index d = base.model.d();
  const Vector nu = Vector::Constant(d, 1.0 / static_cast<double>(d));
  const double eps = std::min(0.5 * nu.minCoeff() / f.cwiseAbs().maxCoeff(), 0.2);

  ExperimentConfig cfg = base;
  cfg.nu = ProbabilityVector(nu);
  cfg.mu = ProbabilityVector(Vector(nu + eps * f));
  cfg.f_list = {f};
  cfg.stability_final_max.reset();
  StabilityResult stab = run_stability(cfg);

  NecessityResult res;
  res.witness = f;
  res.epsilon = eps;
  res.mu = cfg.mu.values();
  res.nu = nu;
  const double f2 = f.squaredNorm();
  res.target = eps * eps * f2 * f2;
  res.final_value = stab.curves.front().final_value();
  res.expected_mismatch = eps * f2;
  res.curves = std::move(stab.curves);
  res.curves.front().label = "witness";
  res.checks = std::move(stab.checks);
  res.checks.push_back({"bounded_away_from_zero", res.final_value >= 0.5 * res.target,
                        detail::format_number(res.final_value) + " vs " + detail::format_number(0.5 * res.target)});

  bool mismatch_ok = true;
  for (double t : res.curves.front().times) {
    const Vector Y0 = (base.model.A() * t).exp() * f;
    const double gap = std::abs(cfg.mu.expect(Y0) - cfg.nu.expect(Y0));
    res.prior_mismatch.push_back(gap);
    mismatch_ok = mismatch_ok && std::abs(gap - res.expected_mismatch) <= 1e-9;
  }
  res.checks.push_back({"prior_mismatch_constant", mismatch_ok, "|mu(Y_0) - nu(Y_0)| = epsilon |f|^2"});
  return res;
}

}  // namespace wonham
