#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "wonham/model.hpp"
#include "wonham/paths.hpp"

namespace wonham {

/// exp(A dt) by scaling and squaring; tiny negative entries are clamped to 0.
inline Matrix transition_matrix(const HmmModel& model, double dt,
                                const NumericsConfig& cfg = default_numerics()) {
  if (!(dt >= 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be non-negative");
  Matrix P = (model.A() * dt).exp();
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    for (Eigen::Index j = 0; j < P.cols(); ++j) {
      if (P(i, j) < 0.0) {
        if (P(i, j) < -cfg.transition_clamp)
          throw Error(ErrorCode::NumericalRankFailure, "matrix exponential has a negative entry");
        P(i, j) = 0.0;
      }
    }
  }
  return P;
}

enum class FilterScheme {
  SplitStep,      // exact prediction + exact Gaussian Bayes correction
  EulerMaruyama,  // explicit Euler on the filter SDE, projected back to the simplex
};

namespace detail {

inline void renormalize(Vector& p) {
  const double s = p.sum();
  if (!(s > 0.0) || !std::isfinite(s))
    throw Error(ErrorCode::DegenerateLikelihood, "posterior normalizer is not positive and finite");
  p /= s;
}

}  // namespace detail

namespace detail {

/// Writes normalize(w * (P^T pi)) into out; logw is scratch space. Weights are
/// shifted by their maximum over the predicted support; if the normalizer
/// still underflows the shift is recomputed with the predicted masses folded
/// into the exponent.
inline void bayes_update(const Vector& pi, double dZ, const Vector& h, double invR, double dt, const Matrix& P,
                         Vector& out, Vector& logw) {
  const Eigen::Index d = pi.size();
  // (P^T pi)(x) is column x of P against pi; a plain loop beats the generic
  // product kernel at the small d used here.
  for (Eigen::Index x = 0; x < d; ++x) {
    const double* col = P.data() + x * d;
    double acc = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) acc += col[j] * pi[j];
    out[x] = acc;
  }
  double shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < d; ++x) {
    logw[x] = (h[x] * dZ - 0.5 * h[x] * h[x] * dt) * invR;
    if (out[x] > 0.0) shift = std::max(shift, logw[x]);
  }
  if (!std::isfinite(shift)) throw Error(ErrorCode::DegenerateLikelihood, "non-finite log-likelihood");
  double s = 0.0;
  for (Eigen::Index x = 0; x < d; ++x) {
    const double m = out[x] > 0.0 ? out[x] * std::exp(logw[x] - shift) : 0.0;
    s += m;
    logw[x] = m;  // logw now holds unnormalized masses
  }
  if (s >= std::numeric_limits<double>::min() && std::isfinite(s)) {
    const double inv = 1.0 / s;
    for (Eigen::Index x = 0; x < d; ++x) out[x] = logw[x] * inv;
    return;
  }
  for (Eigen::Index x = 0; x < d; ++x) logw[x] = (h[x] * dZ - 0.5 * h[x] * h[x] * dt) * invR;
  shift = -std::numeric_limits<double>::infinity();
  for (Eigen::Index x = 0; x < d; ++x)
    if (out[x] > 0.0) shift = std::max(shift, logw[x] + std::log(out[x]));
  for (Eigen::Index x = 0; x < d; ++x)
    out[x] = out[x] > 0.0 ? std::exp(logw[x] + std::log(out[x]) - shift) : 0.0;
  renormalize(out);
}

}  // namespace detail

/// pi+ = normalize(w * (P^T pi)), w(x) = exp(h(x) dZ / R - h(x)^2 dt / (2R)).
inline Vector bayes_step(const Vector& pi, double dZ, const HmmModel& model, double dt, const Matrix& P) {
  Vector out(pi.size()), logw(pi.size());
  detail::bayes_update(pi, dZ, model.h(), 1.0 / model.R(), dt, P, out, logw);
  return out;
}

inline ProbabilityVector bayes_step(const ProbabilityVector& pi, double dZ, const HmmModel& model, double dt,
                                    const Matrix& P) {
  return ProbabilityVector(bayes_step(pi.values(), dZ, model, dt, P));
}

/// One explicit Euler step of d pi = A^T pi dt + (h*pi - pi(h) pi) R^{-1} (dZ - pi(h) dt),
/// followed by clipping to the simplex.
inline Vector euler_maruyama_step(const Vector& pi, double dZ, const HmmModel& model, double dt) {
  const double pih = pi.dot(model.h());
  Vector next = pi + model.A().transpose() * pi * dt +
                (model.h().cwiseProduct(pi) - pih * pi) * ((dZ - pih * dt) / model.R());
  next = next.cwiseMax(0.0);
  detail::renormalize(next);
  return next;
}

/// Stateful stepping form of the filter, for streaming use without storing
/// the whole trajectory.
class WonhamFilter {
 public:
  WonhamFilter(const HmmModel& model, const ProbabilityVector& prior, double dt,
               FilterScheme scheme = FilterScheme::SplitStep)
      : model_(&model), dt_(dt), scheme_(scheme), pi_(prior.values()), next_(model.d()), scratch_(model.d()) {
    detail::require_size(pi_, model.d(), "prior");
    if (scheme_ == FilterScheme::SplitStep) P_ = transition_matrix(model, dt);
  }

  WonhamFilter(const HmmModel& model, const ProbabilityVector& prior, double dt, Matrix P)
      : model_(&model),
        dt_(dt),
        scheme_(FilterScheme::SplitStep),
        P_(std::move(P)),
        pi_(prior.values()),
        next_(model.d()),
        scratch_(model.d()) {
    detail::require_size(pi_, model.d(), "prior");
  }

  /// Advances by one increment and returns the innovation dZ - pi(h) dt,
  /// evaluated with the pre-update posterior.
  double step(double dZ) {
    const double innovation = dZ - pi_.dot(model_->h()) * dt_;
    if (scheme_ == FilterScheme::SplitStep) {
      detail::bayes_update(pi_, dZ, model_->h(), 1.0 / model_->R(), dt_, P_, next_, scratch_);
      pi_.swap(next_);
    } else {
      pi_ = euler_maruyama_step(pi_, dZ, *model_, dt_);
    }
    return innovation;
  }

  const Vector& posterior() const noexcept { return pi_; }
  double expect(const Vector& f) const { return pi_.dot(f); }

 private:
  const HmmModel* model_;
  double dt_;
  FilterScheme scheme_;
  Matrix P_;
  Vector pi_;
  Vector next_;
  Vector scratch_;
};

struct FilterTrajectory {
  double dt = 0.0;
  std::vector<Vector> posteriors;  // n_steps + 1
  std::vector<double> innovations;  // n_steps
  std::string prior_label;
};

inline FilterTrajectory run_wonham(const HmmModel& model, const ProbabilityVector& prior,
                                   const ObservationGrid& obs, std::string label = "nu",
                                   FilterScheme scheme = FilterScheme::SplitStep) {
  FilterTrajectory traj;
  traj.dt = obs.dt;
  traj.prior_label = std::move(label);
  traj.posteriors.reserve(obs.n_steps() + 1);
  traj.innovations.reserve(obs.n_steps());
  traj.posteriors.push_back(prior.values());
  if (obs.n_steps() == 0) return traj;
  WonhamFilter filt(model, prior, obs.dt, scheme);
  for (double dZ : obs.increments) {
    traj.innovations.push_back(filt.step(dZ));
    traj.posteriors.push_back(filt.posterior());
  }
  return traj;
}

/// Sigma = diag(pi) - pi pi^T
inline Matrix covariance(const Vector& pi) {
  Matrix S = -pi * pi.transpose();
  S.diagonal() += pi;
  return S;
}

inline std::vector<Matrix> covariance_sequence(const FilterTrajectory& traj) {
  std::vector<Matrix> out;
  out.reserve(traj.posteriors.size());
  for (const auto& p : traj.posteriors) out.push_back(covariance(p));
  return out;
}

/// f^T Sigma f = pi(f^2) - pi(f)^2, evaluated in centred form.
inline double quadratic_form(const Vector& pi, const Vector& f) {
  detail::require_size(f, pi.size(), "f");
  const double mean = pi.dot(f);
  return pi.dot((f.array() - mean).square().matrix());
}

inline double quadratic_form(const ProbabilityVector& pi, const Vector& f) {
  return quadratic_form(pi.values(), f);
}

}  // namespace wonham
