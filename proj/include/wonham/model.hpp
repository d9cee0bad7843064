#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wonham/numerics.hpp"

namespace wonham {

/// A probability vector on {0, ..., d-1}. Construction rejects negative or
/// non-finite entries and renormalizes to unit mass.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;

  explicit ProbabilityVector(Vector entries, const NumericsConfig& cfg = default_numerics())
      : p_(std::move(entries)) {
    if (p_.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty probability vector");
    if (!p_.allFinite()) throw Error(ErrorCode::NonFinite, "probability vector has non-finite entries");
    for (Eigen::Index i = 0; i < p_.size(); ++i) {
      if (p_[i] < -cfg.probability_sum_tol) {
        throw Error(ErrorCode::InvalidArgument,
                    "negative probability entry " + detail::format_vector(p_));
      }
      p_[i] = std::max(p_[i], 0.0);
    }
    const double s = p_.sum();
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "probability vector has zero mass");
    p_ /= s;
  }

  explicit ProbabilityVector(const std::vector<double>& entries,
                             const NumericsConfig& cfg = default_numerics())
      : ProbabilityVector(detail::to_eigen(entries), cfg) {}

  static ProbabilityVector uniform(Eigen::Index d) {
    return ProbabilityVector(Vector::Constant(d, 1.0 / static_cast<double>(d)));
  }

  static ProbabilityVector point_mass(Eigen::Index d, Eigen::Index x) {
    Vector v = Vector::Zero(d);
    v[x] = 1.0;
    return ProbabilityVector(std::move(v));
  }

  const Vector& values() const noexcept { return p_; }
  Eigen::Index size() const noexcept { return p_.size(); }
  double operator[](Eigen::Index i) const { return p_[i]; }

  /// mu(f) = sum_x mu(x) f(x)
  double expect(const Vector& f) const { return p_.dot(f); }

  /// supp(this) is contained in supp(other)
  bool absolutely_continuous_wrt(const ProbabilityVector& other) const {
    for (Eigen::Index i = 0; i < p_.size(); ++i)
      if (p_[i] > 0.0 && other.p_[i] <= 0.0) return false;
    return true;
  }

 private:
  Vector p_;
};

/// Observation function h and noise covariance R of dZ = h(X) dt + dW.
struct ObservationModel {
  Vector h;
  double R = 1.0;
};

/// Validated (A, h, R). Instances only come out of validate_model.
class HmmModel {
 public:
  const Matrix& A() const noexcept { return A_; }
  const Vector& h() const noexcept { return obs_.h; }
  double R() const noexcept { return obs_.R; }
  const ObservationModel& observation() const noexcept { return obs_; }
  Eigen::Index d() const noexcept { return A_.rows(); }
  const std::string& name() const noexcept { return name_; }

  /// ||A||_inf (max absolute row sum)
  double rate_norm() const { return A_.cwiseAbs().rowwise().sum().maxCoeff(); }

  HmmModel with_R(double R) const;
  HmmModel with_h(const Vector& h) const;

 private:
  friend HmmModel validate_model(const Matrix&, const Vector&, double, std::string,
                                 const NumericsConfig&);
  Matrix A_;
  ObservationModel obs_;
  std::string name_;
};

/// Collected invariant violations from validate_model.
class ModelValidationError : public Error {
 public:
  struct Issue {
    ErrorCode code;
    std::string message;
  };

  explicit ModelValidationError(std::vector<Issue> issues)
      : Error(issues.front().code, summarize(issues)), issues_(std::move(issues)) {}

  const std::vector<Issue>& issues() const noexcept { return issues_; }

  bool has(ErrorCode c) const {
    return std::any_of(issues_.begin(), issues_.end(), [c](const Issue& i) { return i.code == c; });
  }

 private:
  static std::string summarize(const std::vector<Issue>& issues) {
    std::ostringstream os;
    for (std::size_t i = 0; i < issues.size(); ++i) {
      if (i) os << "; ";
      if (i) os << to_string(issues[i].code) << ": ";
      os << issues[i].message;
    }
    return os.str();
  }

  std::vector<Issue> issues_;
};

/// Checks every model invariant and reports all violations at once. On
/// success the diagonal is reset to minus the off-diagonal row sum, so that
/// A*1 = 0 holds to rounding even when the input row sums were only within
/// row_sum_tol.
inline HmmModel validate_model(const Matrix& A, const Vector& h, double R, std::string name = {},
                               const NumericsConfig& cfg = default_numerics()) {
  std::vector<ModelValidationError::Issue> issues;
  auto add = [&](ErrorCode c, std::string m) { issues.push_back({c, std::move(m)}); };

  const Eigen::Index d = A.rows();
  if (d == 0) add(ErrorCode::DimensionMismatch, "rate matrix is empty");
  if (A.cols() != d) {
    std::ostringstream os;
    os << "rate matrix is " << A.rows() << "x" << A.cols() << ", not square";
    add(ErrorCode::DimensionMismatch, os.str());
  }
  if (h.size() != d) {
    std::ostringstream os;
    os << "h has length " << h.size() << " but A has " << d << " rows";
    add(ErrorCode::DimensionMismatch, os.str());
  }
  if (!A.allFinite() || !h.allFinite() || !std::isfinite(R))
    add(ErrorCode::NonFinite, "model contains NaN or Inf");
  if (!(R > 0.0)) {
    std::ostringstream os;
    os << "noise covariance R=" << R << " must be positive";
    add(ErrorCode::NonPositiveR, os.str());
  }
  if (A.cols() == d && A.allFinite()) {
    for (Eigen::Index x = 0; x < d; ++x) {
      for (Eigen::Index j = 0; j < d; ++j) {
        if (j != x && A(x, j) < 0.0) {
          std::ostringstream os;
          os << "A(" << x + 1 << "," << j + 1 << ")=" << A(x, j) << " is negative (states are 1-based)";
          add(ErrorCode::NegativeOffDiagonal, os.str());
        }
      }
      const double s = A.row(x).sum();
      if (std::abs(s) > cfg.row_sum_tol) {
        std::ostringstream os;
        os << "row " << x + 1 << " sums to " << s << " (states are 1-based)";
        add(ErrorCode::RowSumNonZero, os.str());
      }
    }
  }
  if (!issues.empty()) throw ModelValidationError(std::move(issues));

  HmmModel m;
  m.A_ = A;
  for (Eigen::Index x = 0; x < d; ++x) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < d; ++j)
      if (j != x) off += A(x, j);
    m.A_(x, x) = -off;
  }
  m.obs_ = ObservationModel{h, R};
  m.name_ = std::move(name);
  return m;
}

inline HmmModel validate_model(const std::vector<std::vector<double>>& A, const std::vector<double>& h,
                               double R, std::string name = {},
                               const NumericsConfig& cfg = default_numerics()) {
  const auto d = static_cast<Eigen::Index>(A.size());
  Eigen::Index cols = d;
  for (const auto& row : A)
    if (static_cast<Eigen::Index>(row.size()) != d) cols = static_cast<Eigen::Index>(row.size());
  if (cols != d) {
    throw ModelValidationError({{ErrorCode::DimensionMismatch, "rate matrix rows have unequal length or matrix is not square"}});
  }
  Matrix M(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) M(i, j) = A[i][j];
  return validate_model(M, detail::to_eigen(h), R, std::move(name), cfg);
}

inline HmmModel HmmModel::with_R(double R) const { return validate_model(A_, obs_.h, R, name_); }
inline HmmModel HmmModel::with_h(const Vector& h) const { return validate_model(A_, h, obs_.R, name_); }

/// Closed communicating classes of the rate graph (edge x->j iff A(x,j) > 0).
struct ErgodicDecomposition {
  std::vector<std::vector<Eigen::Index>> classes;  // ordered by smallest member
  std::vector<Vector> indicators;
  std::vector<Eigen::Index> class_of;  // state -> class index

  std::size_t m() const noexcept { return classes.size(); }
};

inline ErgodicDecomposition ergodic_decomposition(const HmmModel& model) {
  const Eigen::Index d = model.d();
  const Matrix& A = model.A();

  // reach(x, j): j reachable from x (reflexive)
  std::vector<std::vector<char>> reach(d, std::vector<char>(d, 0));
  for (Eigen::Index s = 0; s < d; ++s) {
    std::vector<Eigen::Index> stack{s};
    reach[s][s] = 1;
    while (!stack.empty()) {
      const Eigen::Index x = stack.back();
      stack.pop_back();
      for (Eigen::Index j = 0; j < d; ++j) {
        if (j != x && A(x, j) > 0.0 && !reach[s][j]) {
          reach[s][j] = 1;
          stack.push_back(j);
        }
      }
    }
  }

  ErgodicDecomposition out;
  out.class_of.assign(d, -1);
  std::vector<Eigen::Index> transient;
  for (Eigen::Index x = 0; x < d; ++x) {
    if (out.class_of[x] >= 0) continue;
    std::vector<Eigen::Index> cls;
    for (Eigen::Index j = x; j < d; ++j)
      if (reach[x][j] && reach[j][x]) cls.push_back(j);
    const auto k = static_cast<Eigen::Index>(out.classes.size());
    for (auto j : cls) out.class_of[j] = k;
    // closed iff everything reachable from x is in the class
    for (Eigen::Index j = 0; j < d; ++j) {
      if (reach[x][j] && !reach[j][x]) {
        transient.insert(transient.end(), cls.begin(), cls.end());
        break;
      }
    }
    out.classes.push_back(std::move(cls));
  }

  if (!transient.empty()) {
    std::sort(transient.begin(), transient.end());
    std::ostringstream os;
    os << "states {";
    for (std::size_t i = 0; i < transient.size(); ++i) os << (i ? "," : "") << transient[i] + 1;
    os << "} (1-based) belong to classes that are not closed";
    throw Error(ErrorCode::TransientStatesPresent, os.str());
  }

  for (const auto& cls : out.classes) {
    Vector ind = Vector::Zero(d);
    for (auto j : cls) ind[j] = 1.0;
    out.indicators.push_back(std::move(ind));
  }
  return out;
}

/// Invariant measure of ergodic class k, embedded in R^d (zero off the class).
inline ProbabilityVector invariant_measure(const HmmModel& model, const ErgodicDecomposition& dec,
                                           std::size_t k,
                                           const NumericsConfig& cfg = default_numerics()) {
  if (k >= dec.m()) throw Error(ErrorCode::InvalidArgument, "class index out of range");
  const auto& cls = dec.classes[k];
  const auto n = static_cast<Eigen::Index>(cls.size());
  Matrix block(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) block(i, j) = model.A()(cls[i], cls[j]);

  Eigen::JacobiSVD<Matrix> svd(block.transpose(), Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double tol = cfg.invariant_rank_tol * model.rate_norm();
  Eigen::Index nullity = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] <= tol) ++nullity;
  if (nullity != 1) {
    std::ostringstream os;
    os << "class " << k << " has a " << nullity << "-dimensional invariant null space";
    throw Error(ErrorCode::NumericalRankFailure, os.str());
  }
  Vector v = svd.matrixV().col(n - 1);
  if (v.sum() < 0.0) v = -v;
  Vector full = Vector::Zero(model.d());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (v[i] <= 0.0) throw Error(ErrorCode::NumericalRankFailure, "invariant vector is not positive on its class");
    full[cls[i]] = v[i];
  }
  return ProbabilityVector(std::move(full));
}

inline ProbabilityVector invariant_measure(const HmmModel& model, std::size_t k) {
  return invariant_measure(model, ergodic_decomposition(model), k);
}

/// sum_k a_k * mu_k over the class invariant measures.
inline ProbabilityVector mixture_invariant(const HmmModel& model, const ErgodicDecomposition& dec,
                                           const std::vector<double>& weights) {
  if (weights.size() != dec.m()) {
    std::ostringstream os;
    os << weights.size() << " weights for " << dec.m() << " classes";
    throw Error(ErrorCode::WeightCountMismatch, os.str());
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::InvalidArgument, "mixture weights must be non-negative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "mixture weights must sum to 1");
  Vector mix = Vector::Zero(model.d());
  for (std::size_t k = 0; k < dec.m(); ++k)
    if (weights[k] > 0.0) mix += weights[k] * invariant_measure(model, dec, k).values();
  return ProbabilityVector(std::move(mix));
}

}  // namespace wonham
