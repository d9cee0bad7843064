#pragma once

#include <cmath>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace wonham {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Numerical tolerances shared by every module. The defaults are the values
/// the test-suite pins; callers may pass a modified copy.
struct NumericsConfig {
  double probability_sum_tol = 1e-12;   // ProbabilityVector normalization
  double row_sum_tol = 1e-9;            // accepted row-sum slack on input
  double invariant_rank_tol = 1e-10;    // relative to ||A||, invariant measures
  double subspace_tol = 1e-8;           // closure iteration / rank decisions
  double membership_tol = 1e-8;         // projection residual threshold
  double hurwitz_margin = 1e-8;         // relative to ||A||_inf
  double transition_clamp = 1e-12;      // tolerated negativity in exp(A dt)
  double grid_tol = 1e-12;              // n_steps * dt == T, relative to max(1,T)
};

inline const NumericsConfig& default_numerics() {
  static const NumericsConfig cfg{};
  return cfg;
}

enum class ErrorCode {
  InvalidArgument,
  NonFinite,
  DimensionMismatch,
  NegativeOffDiagonal,
  RowSumNonZero,
  NonPositiveR,
  TransientStatesPresent,
  NumericalRankFailure,
  WeightCountMismatch,
  InternalEquivalenceViolation,
  GridMismatch,
  DegenerateLikelihood,
  AbsoluteContinuityViolation,
  SingleClassModel,
  NotInvariantPrior,
  ModelIsStabilizable,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NegativeOffDiagonal: return "NegativeOffDiagonal";
    case ErrorCode::RowSumNonZero: return "RowSumNonZero";
    case ErrorCode::NonPositiveR: return "NonPositiveR";
    case ErrorCode::TransientStatesPresent: return "TransientStatesPresent";
    case ErrorCode::NumericalRankFailure: return "NumericalRankFailure";
    case ErrorCode::WeightCountMismatch: return "WeightCountMismatch";
    case ErrorCode::InternalEquivalenceViolation: return "InternalEquivalenceViolation";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DegenerateLikelihood: return "DegenerateLikelihood";
    case ErrorCode::AbsoluteContinuityViolation: return "AbsoluteContinuityViolation";
    case ErrorCode::SingleClassModel: return "SingleClassModel";
    case ErrorCode::NotInvariantPrior: return "NotInvariantPrior";
    case ErrorCode::ModelIsStabilizable: return "ModelIsStabilizable";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline std::string format_vector(const Vector& v) {
  std::ostringstream os;
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_size(const Vector& v, Eigen::Index d, const char* what) {
  if (v.size() != d) {
    std::ostringstream os;
    os << what << " has length " << v.size() << ", expected " << d;
    throw Error(ErrorCode::DimensionMismatch, os.str());
  }
}

inline Vector to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

/// Number of grid steps covering [0, T] with step dt, or GridMismatch.
inline std::size_t grid_steps(double T, double dt, const NumericsConfig& cfg = default_numerics()) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (!(T >= 0.0) || !std::isfinite(T)) throw Error(ErrorCode::InvalidArgument, "T must be non-negative");
  const double n = std::round(T / dt);
  if (std::abs(n * dt - T) > cfg.grid_tol * std::max(1.0, T)) {
    std::ostringstream os;
    os << "dt=" << dt << " does not divide T=" << T;
    throw Error(ErrorCode::GridMismatch, os.str());
  }
  return static_cast<std::size_t>(n);
}

}  // namespace detail
}  // namespace wonham
