#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "wonham/model.hpp"
#include "wonham/rng.hpp"

namespace wonham {

/// Exact trajectory of the chain on [0, horizon]: right-continuous, piecewise
/// constant, with the jump at jump_times[i] landing in jump_targets[i].
struct SamplePath {
  Eigen::Index initial_state = 0;
  std::vector<double> jump_times;
  std::vector<Eigen::Index> jump_targets;
  double horizon = 0.0;

  Eigen::Index final_state() const { return jump_targets.empty() ? initial_state : jump_targets.back(); }

  Eigen::Index state_at(double t) const {
    Eigen::Index x = initial_state;
    for (std::size_t i = 0; i < jump_times.size() && jump_times[i] <= t; ++i) x = jump_targets[i];
    return x;
  }

  /// X at the left grid points t_k = k*dt, k = 0..n_steps-1, plus X_T last.
  std::vector<Eigen::Index> grid_states(double dt, std::size_t n_steps) const {
    std::vector<Eigen::Index> out(n_steps + 1);
    Eigen::Index x = initial_state;
    std::size_t j = 0;
    for (std::size_t k = 0; k <= n_steps; ++k) {
      const double t = static_cast<double>(k) * dt;
      while (j < jump_times.size() && jump_times[j] <= t) x = jump_targets[j++];
      out[k] = x;
    }
    return out;
  }
};

/// Observation increments dZ_k over [k dt, (k+1) dt].
struct ObservationGrid {
  double dt = 0.0;
  std::vector<double> increments;

  std::size_t n_steps() const noexcept { return increments.size(); }
  double horizon() const noexcept { return dt * static_cast<double>(increments.size()); }

  /// Z at the grid points, Z_0 = 0.
  std::vector<double> cumulative() const {
    std::vector<double> z(increments.size() + 1, 0.0);
    for (std::size_t k = 0; k < increments.size(); ++k) z[k + 1] = z[k] + increments[k];
    return z;
  }

  /// Grid with step factor*dt whose increments are sums of consecutive
  /// blocks; the Brownian part is shared exactly between the two grids.
  ObservationGrid coarsen(std::size_t factor) const {
    if (factor == 0 || increments.size() % factor != 0)
      throw Error(ErrorCode::GridMismatch, "coarsening factor does not divide the number of steps");
    ObservationGrid out;
    out.dt = dt * static_cast<double>(factor);
    out.increments.resize(increments.size() / factor, 0.0);
    for (std::size_t k = 0; k < out.increments.size(); ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < factor; ++i) s += increments[k * factor + i];
      out.increments[k] = s;
    }
    return out;
  }
};

inline double uniform01(CounterEngine& eng) { return std::uniform_real_distribution<double>(0.0, 1.0)(eng); }

/// Categorical draw from the prior by inversion.
inline Eigen::Index sample_initial(const ProbabilityVector& prior, CounterEngine& eng) {
  const double u = uniform01(eng);
  double c = 0.0;
  Eigen::Index last = 0;
  for (Eigen::Index x = 0; x < prior.size(); ++x) {
    if (prior[x] <= 0.0) continue;
    c += prior[x];
    last = x;
    if (u < c) return x;
  }
  return last;
}

/// Jump-chain simulation: Exp(-A(x,x)) holding times, target j with
/// probability A(x,j) / -A(x,x). States with zero exit rate are absorbing.
inline SamplePath sample_ctmc(const HmmModel& model, Eigen::Index x0, double T, CounterEngine& eng) {
  if (x0 < 0 || x0 >= model.d()) throw Error(ErrorCode::InvalidArgument, "initial state out of range");
  SamplePath path;
  path.initial_state = x0;
  path.horizon = T;
  const Matrix& A = model.A();
  Eigen::Index x = x0;
  double t = 0.0;
  for (;;) {
    const double rate = -A(x, x);
    if (!(rate > 0.0)) break;
    t += std::exponential_distribution<double>(rate)(eng);
    if (t > T) break;
    const double u = uniform01(eng) * rate;
    double c = 0.0;
    Eigen::Index target = -1;
    for (Eigen::Index j = 0; j < model.d(); ++j) {
      if (j == x || A(x, j) <= 0.0) continue;
      c += A(x, j);
      target = j;
      if (u < c) break;
    }
    path.jump_times.push_back(t);
    path.jump_targets.push_back(target);
    x = target;
  }
  return path;
}

/// Exact per-step integrals of h(X_s) ds over [k dt, (k+1) dt].
inline std::vector<double> integrate_h(const SamplePath& path, const Vector& h, double dt,
                                       std::size_t n_steps) {
  std::vector<double> out(n_steps, 0.0);
  Eigen::Index x = path.initial_state;
  std::size_t j = 0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double a = static_cast<double>(k) * dt;
    const double b = static_cast<double>(k + 1) * dt;
    while (j < path.jump_times.size() && path.jump_times[j] <= a) x = path.jump_targets[j++];
    double s = 0.0;
    double left = a;
    while (j < path.jump_times.size() && path.jump_times[j] < b) {
      s += h[x] * (path.jump_times[j] - left);
      left = path.jump_times[j];
      x = path.jump_targets[j++];
    }
    s += h[x] * (b - left);
    out[k] = s;
  }
  return out;
}

inline std::vector<double> integrate_h(const SamplePath& path, const Vector& h, double dt) {
  return integrate_h(path, h, dt, detail::grid_steps(path.horizon, dt));
}

/// dZ_k = int_k h(X_s) ds + sqrt(R dt) xi_k, xi_k i.i.d. N(0,1).
inline ObservationGrid sample_observations(const SamplePath& path, const HmmModel& model, double dt,
                                           CounterEngine& noise) {
  const std::size_t n = detail::grid_steps(path.horizon, dt);
  ObservationGrid obs;
  obs.dt = dt;
  obs.increments = integrate_h(path, model.h(), dt, n);
  const double scale = std::sqrt(model.R() * dt);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& dz : obs.increments) dz += scale * normal(noise);
  return obs;
}

/// One trial: X_0 ~ prior, the chain path on [0,T], and observations on the dt grid.
struct Trial {
  SamplePath path;
  ObservationGrid obs;
};

inline Trial simulate_trial(const HmmModel& model, const ProbabilityVector& prior, double T, double dt,
                            const RngStream& rng) {
  auto signal = rng.engine(RngStream::Substream::Signal);
  auto noise = rng.engine(RngStream::Substream::Noise);
  Trial tr;
  const Eigen::Index x0 = sample_initial(prior, signal);
  tr.path = sample_ctmc(model, x0, T, signal);
  tr.obs = sample_observations(tr.path, model, dt, noise);
  return tr;
}

/// Checks the structural path invariants (increasing times, admissible jumps,
/// class confinement). Returns false on the first violation.
inline bool path_is_consistent(const SamplePath& path, const HmmModel& model,
                               const ErgodicDecomposition& dec) {
  Eigen::Index x = path.initial_state;
  double prev = 0.0;
  for (std::size_t i = 0; i < path.jump_times.size(); ++i) {
    const double t = path.jump_times[i];
    const Eigen::Index j = path.jump_targets[i];
    if (!(t > prev) || t > path.horizon) return false;
    if (j == x || !(model.A()(x, j) > 0.0)) return false;
    if (dec.class_of[j] != dec.class_of[path.initial_state]) return false;
    prev = t;
    x = j;
  }
  return true;
}

}  // namespace wonham
