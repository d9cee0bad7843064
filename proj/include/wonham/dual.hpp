#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "wonham/analysis.hpp"
#include "wonham/filter.hpp"
#include "wonham/paths.hpp"
#include "wonham/stats.hpp"

namespace wonham {

/// max_{i,j} |f(i) - f(j)|
inline double osc(const Vector& f) {
  if (f.size() == 0) return 0.0;
  return f.maxCoeff() - f.minCoeff();
}

/// Deterministic control, one value per grid step.
struct ControlSignal {
  double dt = 0.0;
  std::vector<double> values;

  std::size_t n_steps() const noexcept { return values.size(); }
  bool is_zero() const {
    return std::all_of(values.begin(), values.end(), [](double u) { return u == 0.0; });
  }
};

/// Grid-independent description of a deterministic control, so the same
/// control can be laid on a grid and on its refinement.
struct ControlSpec {
  enum class Kind { Zero, Constant, Sinusoid };
  Kind kind = Kind::Zero;
  double value = 0.0;  // level for Constant

  static ControlSpec zero() { return {}; }
  static ControlSpec constant(double c) { return {Kind::Constant, c}; }
  static ControlSpec sinusoid() { return {Kind::Sinusoid, 0.0}; }

  /// Accepts "zero", "const:C" and "sin".
  static ControlSpec parse(const std::string& text) {
    if (text == "zero") return zero();
    if (text == "sin") return sinusoid();
    if (text.rfind("const:", 0) == 0) {
      const std::string num = text.substr(6);
      std::size_t used = 0;
      double c = 0.0;
      try {
        c = std::stod(num, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != num.size() || !std::isfinite(c))
        throw Error(ErrorCode::InvalidArgument, "bad constant control '" + text + "'");
      return constant(c);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown control '" + text + "' (expected zero, const:C or sin)");
  }

  std::string label() const {
    switch (kind) {
      case Kind::Zero: return "zero";
      case Kind::Constant: {
        std::ostringstream os;
        os << "const:" << value;
        return os.str();
      }
      case Kind::Sinusoid: return "sin";
    }
    return "zero";
  }

  double at(double t) const {
    switch (kind) {
      case Kind::Zero: return 0.0;
      case Kind::Constant: return value;
      case Kind::Sinusoid: return std::sin(t);
    }
    return 0.0;
  }

  /// U_k = u(t_k) at the left grid points.
  ControlSignal on_grid(double dt, std::size_t n_steps) const {
    ControlSignal u{dt, std::vector<double>(n_steps)};
    for (std::size_t k = 0; k < n_steps; ++k) u.values[k] = at(static_cast<double>(k) * dt);
    return u;
  }
};

/// Backward solution Y_0..Y_n of -dY/dt = A Y + h U with Y_n = f. V is
/// identically zero for deterministic data. gamma(k, x) caches Gamma(Y_k)(x).
struct DualTrajectory {
  double dt = 0.0;
  std::vector<Vector> Y;
  Matrix gamma;  // n_steps x d
  bool V_is_zero = true;

  std::size_t n_steps() const noexcept { return Y.empty() ? 0 : Y.size() - 1; }
  const Vector& initial() const { return Y.front(); }
  const Vector& terminal() const { return Y.back(); }
};

/// E = exp(A dt) and G = int_0^dt exp(A s) ds, read off the exponential of
/// the augmented matrix [[A, I], [0, 0]] dt.
struct DualStepMatrices {
  Matrix E;
  Matrix G;
};

inline DualStepMatrices dual_step_matrices(const HmmModel& model, double dt) {
  const Eigen::Index d = model.d();
  Matrix M = Matrix::Zero(2 * d, 2 * d);
  M.topLeftCorner(d, d) = model.A() * dt;
  M.topRightCorner(d, d) = Matrix::Identity(d, d) * dt;
  const Matrix X = M.exp();
  return {X.topLeftCorner(d, d), X.topRightCorner(d, d)};
}

/// Y_k = E Y_{k+1} + G h U_k, exact for piecewise-constant U.
inline DualTrajectory solve_backward_ode(const HmmModel& model, const Vector& f, const ControlSignal& U, double T) {
  detail::require_size(f, model.d(), "f");
  if (!f.allFinite()) throw Error(ErrorCode::NonFinite, "f has a non-finite entry");
  const std::size_t n = detail::grid_steps(T, U.dt);
  if (U.values.size() != n)
    throw Error(ErrorCode::GridMismatch, "control has " + std::to_string(U.values.size()) + " values for " +
                                             std::to_string(n) + " grid steps");
  for (double u : U.values)
    if (!std::isfinite(u)) throw Error(ErrorCode::NonFinite, "control has a non-finite value");

  DualTrajectory dual;
  dual.dt = U.dt;
  dual.Y.assign(n + 1, Vector());
  dual.Y[n] = f;
  if (n > 0) {
    const auto [E, G] = dual_step_matrices(model, U.dt);
    const Vector Gh = G * model.h();
    for (std::size_t k = n; k-- > 0;) dual.Y[k] = E * dual.Y[k + 1] + Gh * U.values[k];
  }
  dual.gamma.resize(static_cast<Eigen::Index>(n), model.d());
  for (std::size_t k = 0; k < n; ++k)
    dual.gamma.row(static_cast<Eigen::Index>(k)) = carre_du_champ(model.A(), dual.Y[k]).transpose();
  return dual;
}

namespace detail {

inline void require_same_grid(const DualTrajectory& dual, const ControlSignal& U, std::size_t n_steps, double dt) {
  const double tol = 1e-12 * std::max(1.0, dt);
  if (dual.n_steps() != n_steps || U.n_steps() != n_steps || std::abs(dual.dt - dt) > tol ||
      std::abs(U.dt - dt) > tol)
    throw Error(ErrorCode::GridMismatch, "dual trajectory, control and grid disagree");
}

}  // namespace detail

/// S_T = pi0(Y_0) - sum_k U_k dZ_k (left-point sum).
inline double estimator_value(const ProbabilityVector& pi0, const DualTrajectory& dual, const ControlSignal& U,
                              const ObservationGrid& obs) {
  detail::require_same_grid(dual, U, obs.n_steps(), obs.dt);
  double s = pi0.expect(dual.initial());
  for (std::size_t k = 0; k < obs.n_steps(); ++k) s -= U.values[k] * obs.increments[k];
  return s;
}

/// One trial's share of the control cost, split into its three parts.
struct PathCost {
  double terminal = 0.0;         // |Y_0(X_0) - mu(Y_0)|^2
  double running_gamma = 0.0;    // sum_k Gamma(Y_k)(X_{t_k}) dt
  double running_control = 0.0;  // sum_k R U_k^2 dt

  double total() const noexcept { return terminal + running_gamma + running_control; }
};

inline PathCost pathwise_cost_parts(const SamplePath& path, const DualTrajectory& dual, const ControlSignal& U,
                                    const HmmModel& model, const ProbabilityVector& mu) {
  const std::size_t n = dual.n_steps();
  detail::require_same_grid(dual, U, n, dual.dt);
  if (std::abs(static_cast<double>(n) * dual.dt - path.horizon) > 1e-12 * std::max(1.0, path.horizon))
    throw Error(ErrorCode::GridMismatch, "path horizon does not match the dual grid");
  PathCost c;
  const Vector& Y0 = dual.initial();
  const double centred = Y0[path.initial_state] - mu.expect(Y0);
  c.terminal = centred * centred;
  const auto states = path.grid_states(dual.dt, n);
  double g = 0.0, u2 = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    g += dual.gamma(static_cast<Eigen::Index>(k), states[k]);
    u2 += U.values[k] * U.values[k];
  }
  c.running_gamma = g * dual.dt;
  c.running_control = model.R() * u2 * dual.dt;
  return c;
}

/// |Y_0(X_0) - mu(Y_0)|^2 + sum_k [Gamma(Y_k)(X_{t_k}) + R U_k^2] dt
inline double pathwise_cost(const SamplePath& path, const DualTrajectory& dual, const ControlSignal& U,
                            const HmmModel& model, const ProbabilityVector& mu) {
  return pathwise_cost_parts(path, dual, U, model, mu).total();
}

struct CostBreakdown {
  double terminal = 0.0;
  double running_gamma = 0.0;
  double running_control = 0.0;
  double total = 0.0;
  double std_error = 0.0;
};

struct MonteCarloOptions {
  std::size_t n_trials = 10000;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: WONHAM_THREADS or hardware concurrency
};

struct DualityReport {
  std::string control;
  double T = 0.0;
  double dt = 0.0;
  double R = 0.0;
  std::size_t n_trials = 0;
  Estimate lhs;             // E|f(X_T) - S_T|^2
  Estimate rhs;             // mean cost + prior mismatch
  double prior_mismatch = 0.0;  // |pi0(Y_0) - mu(Y_0)|^2
  CostBreakdown cost;
  double difference = 0.0;       // lhs - rhs at dt
  double difference_half = 0.0;  // lhs - rhs at dt/2 on the same trials
  double dt_allowance = 0.0;     // c_dt * dt = 2 |difference - difference_half|
  double tolerance = 0.0;
  bool halving = true;
  bool passed = false;
};

/// Monte Carlo comparison of E^mu |f(X_T) - S_T|^2 with the control cost
/// plus the prior-mismatch term. With halving, trials are simulated on the
/// dt/2 grid and the dt observations are pairwise sums of the same
/// increments; the O(dt) allowance is twice the change between the grids.
inline DualityReport duality_check(const HmmModel& model, const ProbabilityVector& mu, const ProbabilityVector& pi0,
                                   const ControlSpec& control, const Vector& f, double T, double dt,
                                   const MonteCarloOptions& opts, bool halving = true) {
  detail::require_size(mu.values(), model.d(), "mu");
  detail::require_size(pi0.values(), model.d(), "pi0");
  const std::size_t n = detail::grid_steps(T, dt);
  const std::size_t factor = halving ? 2 : 1;
  const double dt_sim = dt / static_cast<double>(factor);

  const ControlSignal U = control.on_grid(dt, n);
  const DualTrajectory dual = solve_backward_ode(model, f, U, T);
  ControlSignal U_half;
  DualTrajectory dual_half;
  if (halving) {
    U_half = control.on_grid(dt_sim, n * factor);
    dual_half = solve_backward_ode(model, f, U_half, T);
  }

  struct Sample {
    double lhs = 0.0, rhs = 0.0, lhs_half = 0.0, rhs_half = 0.0;
    PathCost parts;
  };
  const auto samples = run_trials(opts.n_trials, resolve_threads(opts.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(model, mu, T, dt_sim, RngStream(opts.seed, i));
    const double fT = f[tr.path.final_state()];
    Sample s;
    const ObservationGrid obs = halving ? tr.obs.coarsen(factor) : tr.obs;
    const double e = fT - estimator_value(pi0, dual, U, obs);
    s.lhs = e * e;
    s.parts = pathwise_cost_parts(tr.path, dual, U, model, mu);
    s.rhs = s.parts.total();
    if (halving) {
      const double eh = fT - estimator_value(pi0, dual_half, U_half, tr.obs);
      s.lhs_half = eh * eh;
      s.rhs_half = pathwise_cost(tr.path, dual_half, U_half, model, mu);
    }
    return s;
  });

  DualityReport rep;
  rep.control = control.label();
  rep.T = T;
  rep.dt = dt;
  rep.R = model.R();
  rep.n_trials = opts.n_trials;
  rep.halving = halving;
  const double gap = pi0.expect(dual.initial()) - mu.expect(dual.initial());
  rep.prior_mismatch = gap * gap;

  std::vector<double> lhs(samples.size()), rhs(samples.size());
  double term = 0.0, gam = 0.0, ctl = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    lhs[i] = samples[i].lhs;
    rhs[i] = samples[i].rhs;
    term += samples[i].parts.terminal;
    gam += samples[i].parts.running_gamma;
    ctl += samples[i].parts.running_control;
  }
  const double nt = static_cast<double>(std::max<std::size_t>(samples.size(), 1));
  rep.lhs = estimate(lhs);
  const Estimate cost = estimate(rhs);
  rep.cost = {term / nt, gam / nt, ctl / nt, cost.mean, cost.std_error};
  rep.rhs = {cost.mean + rep.prior_mismatch, cost.std_error, cost.n};
  rep.difference = rep.lhs.mean - rep.rhs.mean;

  if (halving) {
    std::vector<double> lh(samples.size()), rh(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      lh[i] = samples[i].lhs_half;
      rh[i] = samples[i].rhs_half;
    }
    const double gap_h = pi0.expect(dual_half.initial()) - mu.expect(dual_half.initial());
    rep.difference_half = estimate(lh).mean - (estimate(rh).mean + gap_h * gap_h);
    rep.dt_allowance = 2.0 * std::abs(rep.difference - rep.difference_half);
  }
  rep.tolerance = 3.0 * (rep.lhs.std_error + rep.rhs.std_error) + rep.dt_allowance;
  rep.passed = std::abs(rep.difference) <= rep.tolerance;
  return rep;
}

struct ValueIdentityReport {
  Estimate quadratic;  // mean of f^T Sigma_T f
  Estimate squared_error;  // mean of |f(X_T) - pi_T(f)|^2
  double bound = 0.0;      // osc(f)^2 / 4
  double difference = 0.0;
  double tolerance = 0.0;
  bool agree = false;
  bool bounded = false;
  bool passed = false;
};

/// Two estimates of the optimal value under P^nu: the filter variance
/// E f^T Sigma_T f and the filter mean-square error E|f(X_T) - pi_T(f)|^2.
inline ValueIdentityReport value_identity_check(const HmmModel& model, const ProbabilityVector& nu, const Vector& f,
                                                double T, double dt, const MonteCarloOptions& opts) {
  detail::require_size(f, model.d(), "f");
  const Matrix P = transition_matrix(model, dt);
  struct Sample {
    double a = 0.0, b = 0.0;
  };
  const auto samples = run_trials(opts.n_trials, resolve_threads(opts.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(model, nu, T, dt, RngStream(opts.seed, i));
    WonhamFilter filt(model, nu, dt, P);
    for (double dz : tr.obs.increments) filt.step(dz);
    const double e = f[tr.path.final_state()] - filt.expect(f);
    return Sample{quadratic_form(filt.posterior(), f), e * e};
  });
  std::vector<double> a(samples.size()), b(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    a[i] = samples[i].a;
    b[i] = samples[i].b;
  }
  ValueIdentityReport rep;
  rep.quadratic = estimate(a);
  rep.squared_error = estimate(b);
  rep.bound = 0.25 * osc(f) * osc(f);
  rep.difference = rep.quadratic.mean - rep.squared_error.mean;
  rep.tolerance = 3.0 * (rep.quadratic.std_error + rep.squared_error.std_error) + 1e-12;
  rep.agree = std::abs(rep.difference) <= rep.tolerance;
  rep.bounded = rep.quadratic.mean <= rep.bound + 3.0 * rep.quadratic.std_error + 1e-12 &&
                rep.squared_error.mean <= rep.bound + 3.0 * rep.squared_error.std_error + 1e-12;
  rep.passed = rep.agree && rep.bounded;
  return rep;
}

struct FeedbackReport {
  Estimate cost;     // Var(f(X_T) + sum_k U_k dZ_k) under the feedback control
  Estimate optimum;  // mean of f^T Sigma_T f
  double max_abs_control = 0.0;
  bool passed = false;  // cost >= optimum - 3 sigma
};

namespace detail {

/// Unbiased sample variance together with a delta-method standard error.
inline Estimate variance_estimate(const std::vector<double>& xs) {
  const Estimate m = estimate(xs);
  Estimate v;
  v.n = xs.size();
  if (v.n < 2) return v;
  double s2 = 0.0, s4 = 0.0;
  for (double x : xs) {
    const double c = (x - m.mean) * (x - m.mean);
    s2 += c;
    s4 += c * c;
  }
  const double n = static_cast<double>(v.n);
  v.mean = s2 / (n - 1.0);
  const double m2 = s2 / n, m4 = s4 / n;
  v.std_error = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
  return v;
}

}  // namespace detail

/// Diagnostic: evaluates U_k = -(pi_k(h Y_k) - pi_k(h) pi_k(Y_k)) with Y the
/// zero-control dual trajectory and checks that its cost is not below the
/// optimal value. Every admissible control satisfies the lower bound.
inline FeedbackReport feedback_residual_check(const HmmModel& model, const ProbabilityVector& nu, const Vector& f,
                                              double T, double dt, const MonteCarloOptions& opts) {
  const std::size_t n = detail::grid_steps(T, dt);
  const DualTrajectory dual = solve_backward_ode(model, f, ControlSpec::zero().on_grid(dt, n), T);
  const Matrix P = transition_matrix(model, dt);
  const Vector& h = model.h();
  struct Sample {
    double g = 0.0, opt = 0.0, umax = 0.0;
  };
  const auto samples = run_trials(opts.n_trials, resolve_threads(opts.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(model, nu, T, dt, RngStream(opts.seed, i));
    WonhamFilter filt(model, nu, dt, P);
    Sample s;
    double integral = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const Vector& pi = filt.posterior();
      const Vector& Y = dual.Y[k];
      const double u = -(pi.dot(h.cwiseProduct(Y)) - pi.dot(h) * pi.dot(Y));
      s.umax = std::max(s.umax, std::abs(u));
      integral += u * tr.obs.increments[k];
      filt.step(tr.obs.increments[k]);
    }
    s.g = f[tr.path.final_state()] + integral;
    s.opt = quadratic_form(filt.posterior(), f);
    return s;
  });
  std::vector<double> g(samples.size()), opt(samples.size());
  FeedbackReport rep;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    g[i] = samples[i].g;
    opt[i] = samples[i].opt;
    rep.max_abs_control = std::max(rep.max_abs_control, samples[i].umax);
  }
  rep.cost = detail::variance_estimate(g);
  rep.optimum = estimate(opt);
  rep.passed = rep.cost.mean >= rep.optimum.mean - 3.0 * (rep.cost.std_error + rep.optimum.std_error) - 1e-12;
  return rep;
}

struct AdmissibilityReport {
  Estimate error;  // E^mu |f(X_T) - pi_T^nu(f)|^2
  double density_bound = 0.0;  // max_x mu(x) / nu(x)
  double bound = 0.0;          // density_bound * osc(f)^2 / 4
  bool passed = false;
};

/// The nu-optimal estimator used under P^mu, mu << nu, keeps its error below
/// max(mu/nu) * osc(f)^2 / 4.
inline AdmissibilityReport admissibility_bound_check(const HmmModel& model, const ProbabilityVector& mu,
                                                     const ProbabilityVector& nu, const Vector& f, double T,
                                                     double dt, const MonteCarloOptions& opts) {
  if (!mu.absolutely_continuous_wrt(nu))
    throw Error(ErrorCode::AbsoluteContinuityViolation, "mu is not absolutely continuous with respect to nu");
  AdmissibilityReport rep;
  for (Eigen::Index x = 0; x < mu.size(); ++x)
    if (mu[x] > 0.0) rep.density_bound = std::max(rep.density_bound, mu[x] / nu[x]);
  rep.bound = rep.density_bound * 0.25 * osc(f) * osc(f);
  const Matrix P = transition_matrix(model, dt);
  const auto errs = run_trials(opts.n_trials, resolve_threads(opts.threads), [&](std::size_t i) {
    const Trial tr = simulate_trial(model, mu, T, dt, RngStream(opts.seed, i));
    WonhamFilter filt(model, nu, dt, P);
    for (double dz : tr.obs.increments) filt.step(dz);
    const double e = f[tr.path.final_state()] - filt.expect(f);
    return e * e;
  });
  rep.error = estimate(errs);
  rep.passed = rep.error.mean <= rep.bound + 3.0 * rep.error.std_error + 1e-12;
  return rep;
}

}  // namespace wonham
