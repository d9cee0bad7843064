#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "wonham/model.hpp"

namespace wonham {

/// Gamma(f)(x) = sum_j A(x,j) (f(x) - f(j))^2
inline Vector carre_du_champ(const Matrix& A, const Vector& f) {
  detail::require_size(f, A.rows(), "f");
  const Eigen::Index d = A.rows();
  Vector g = Vector::Zero(d);
  for (Eigen::Index x = 0; x < d; ++x) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (j == x) continue;
      const double diff = f[x] - f[j];
      s += A(x, j) * diff * diff;
    }
    g[x] = s;
  }
  return g;
}

inline Vector carre_du_champ(const HmmModel& model, const Vector& f) { return carre_du_champ(model.A(), f); }

/// Orthonormal basis (as matrix columns) of a subspace of R^d.
struct SubspaceBasis {
  Matrix basis;  // d x dim
  double tol = 0.0;

  Eigen::Index dim() const noexcept { return basis.cols(); }
  Eigen::Index ambient_dim() const noexcept { return basis.rows(); }
  Vector vector(Eigen::Index i) const { return basis.col(i); }

  Vector project(const Vector& f) const {
    if (dim() == 0) return Vector::Zero(f.size());
    return basis * (basis.transpose() * f);
  }
};

struct Membership {
  bool in_subspace = false;
  double residual = 0.0;
};

/// residual = |f - P f| / max(1, |f|)
inline Membership membership(const SubspaceBasis& subspace, const Vector& f,
                             const NumericsConfig& cfg = default_numerics()) {
  detail::require_size(f, subspace.ambient_dim(), "f");
  const double r = (f - subspace.project(f)).norm() / std::max(1.0, f.norm());
  return {r < cfg.membership_tol, r};
}

namespace detail {

/// Orthogonalizes g against the columns of Q (two passes of classical
/// Gram-Schmidt) and returns the residual.
inline Vector orthogonalize(const Matrix& Q, const Vector& g) {
  Vector r = g;
  if (Q.cols() == 0) return r;
  for (int pass = 0; pass < 2; ++pass) r -= Q * (Q.transpose() * r);
  return r;
}

inline void append_column(Matrix& Q, const Vector& v) {
  Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
  Q.col(Q.cols() - 1) = v;
}

/// Columns of V for singular values below threshold; all columns if the
/// matrix is zero.
inline Matrix svd_null_basis(const Matrix& M, double threshold) {
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const Eigen::Index n = M.cols();
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = i < sv.size() ? sv[i] : 0.0;
    if (s <= threshold) idx.push_back(i);
  }
  Matrix N(n, static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) N.col(static_cast<Eigen::Index>(k)) = svd.matrixV().col(idx[k]);
  return N;
}

inline void normalize_sign(Vector& v, double tol = 1e-12) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > tol) {
      if (v[i] < 0.0) v = -v;
      return;
    }
  }
}

/// First row of the reduced row-echelon form of the rows of B^T: the unit
/// vector in span(B) whose first non-negligible coordinate comes earliest.
inline Vector lexicographic_first(const Matrix& B, double tol = 1e-10) {
  Matrix R = B.transpose();  // k x d
  const Eigen::Index k = R.rows(), d = R.cols();
  Eigen::Index row = 0;
  for (Eigen::Index col = 0; col < d && row < k; ++col) {
    Eigen::Index piv = row;
    for (Eigen::Index r = row + 1; r < k; ++r)
      if (std::abs(R(r, col)) > std::abs(R(piv, col))) piv = r;
    if (std::abs(R(piv, col)) <= tol) continue;
    R.row(row).swap(R.row(piv));
    R.row(row) /= R(row, col);
    for (Eigen::Index r = 0; r < k; ++r)
      if (r != row) R.row(r) -= R(r, col) * R.row(row);
    ++row;
  }
  Vector v = R.row(0).transpose();
  v.normalize();
  normalize_sign(v);
  return v;
}

}  // namespace detail

/// Smallest subspace containing 1 and closed under y -> A y and y -> h * y.
/// Generators are applied in the order (A, diag(h)) to every current basis
/// vector until a full round adds nothing.
inline SubspaceBasis controllable_subspace(const HmmModel& model, double tol) {
  const Eigen::Index d = model.d();
  Matrix Q(d, 1);
  Q.col(0) = Vector::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));

  bool grew = true;
  while (grew && Q.cols() < d) {
    grew = false;
    const Eigen::Index n0 = Q.cols();
    for (Eigen::Index i = 0; i < n0 && Q.cols() < d; ++i) {
      const Vector q = Q.col(i);
      const Vector gens[2] = {model.A() * q, model.h().cwiseProduct(q)};
      for (const Vector& g : gens) {
        if (Q.cols() >= d) break;
        const Vector r = detail::orthogonalize(Q, g);
        const double rn = r.norm();
        if (rn > tol * std::max(1.0, g.norm())) {
          detail::append_column(Q, r / rn);
          grew = true;
        }
      }
    }
  }
  return {Q, tol};
}

inline SubspaceBasis controllable_subspace(const HmmModel& model,
                                           const NumericsConfig& cfg = default_numerics()) {
  return controllable_subspace(model, cfg.subspace_tol);
}

/// ker(A) via SVD; singular values <= tol * ||A||_inf count as zero.
inline SubspaceBasis null_space(const HmmModel& model, double tol) {
  return {detail::svd_null_basis(model.A(), tol * model.rate_norm()), tol};
}

inline SubspaceBasis null_space(const HmmModel& model, const NumericsConfig& cfg = default_numerics()) {
  return null_space(model, cfg.subspace_tol);
}

/// Orthogonal complement of a subspace.
inline SubspaceBasis orthogonal_complement(const SubspaceBasis& s) {
  const Eigen::Index d = s.ambient_dim(), n = s.dim();
  if (n == 0) return {Matrix::Identity(d, d), s.tol};
  Eigen::HouseholderQR<Matrix> qr(s.basis);
  Matrix full = qr.householderQ() * Matrix::Identity(d, d);
  return {full.rightCols(d - n), s.tol};
}

/// A in the coordinates [C, C-perp]; upper block-triangular when C is
/// A-invariant.
struct BlockDecomposition {
  Matrix T;       // d x d orthogonal
  Matrix A_bar;   // T^T A T
  Matrix A_c;     // n x n
  Matrix A_uc;    // (d-n) x (d-n)
  Matrix coupling;  // n x (d-n)
  double residual_lower_left = 0.0;  // ||lower-left block||_inf

  Eigen::Index n() const noexcept { return A_c.rows(); }
};

inline BlockDecomposition block_decomposition(const HmmModel& model, const SubspaceBasis& C) {
  const Eigen::Index d = model.d(), n = C.dim();
  BlockDecomposition out;
  out.T.resize(d, d);
  out.T.leftCols(n) = C.basis;
  out.T.rightCols(d - n) = orthogonal_complement(C).basis;
  out.A_bar = out.T.transpose() * model.A() * out.T;
  out.A_c = out.A_bar.topLeftCorner(n, n);
  out.A_uc = out.A_bar.bottomRightCorner(d - n, d - n);
  out.coupling = out.A_bar.topRightCorner(n, d - n);
  out.residual_lower_left =
      (d - n > 0) ? out.A_bar.bottomLeftCorner(d - n, n).cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
  return out;
}

struct StabilizabilityReport {
  Eigen::Index controllable_dim = 0;
  Eigen::Index d = 0;
  std::size_t class_count = 0;
  Eigen::Index null_space_dim = 0;
  bool is_controllable = false;
  bool nullspace_test = false;   // ker(A) inside C
  bool indicator_test = false;   // every class indicator inside C
  bool hurwitz_test = false;     // C = R^d or A_uc Hurwitz
  bool verdict = false;
  std::optional<Vector> witness;  // unit f in C-perp, present iff not stabilizable
  std::vector<std::complex<double>> uc_eigenvalues;
  double hurwitz_margin = 0.0;
  double max_nullspace_residual = 0.0;
  double max_indicator_residual = 0.0;
  SubspaceBasis controllable;
  BlockDecomposition blocks;
};

/// Runs the three stabilizability tests independently and requires them to
/// agree. For a non-stabilizable model the witness is T * (0; eta) with eta a
/// unit null vector of A_uc.
inline StabilizabilityReport stabilizability(const HmmModel& model,
                                             const NumericsConfig& cfg = default_numerics()) {
  StabilizabilityReport rep;
  const Eigen::Index d = model.d();
  rep.d = d;
  const auto dec = ergodic_decomposition(model);
  rep.class_count = dec.m();

  rep.controllable = controllable_subspace(model, cfg.subspace_tol);
  rep.controllable_dim = rep.controllable.dim();
  rep.is_controllable = rep.controllable_dim == d;

  // (a) ker(A) in C
  const SubspaceBasis S0 = null_space(model, cfg.subspace_tol);
  rep.null_space_dim = S0.dim();
  rep.nullspace_test = true;
  for (Eigen::Index i = 0; i < S0.dim(); ++i) {
    const auto mem = membership(rep.controllable, S0.vector(i), cfg);
    rep.max_nullspace_residual = std::max(rep.max_nullspace_residual, mem.residual);
    rep.nullspace_test = rep.nullspace_test && mem.in_subspace;
  }

  // (b) class indicators in C
  rep.indicator_test = true;
  for (const Vector& ind : dec.indicators) {
    const auto mem = membership(rep.controllable, ind, cfg);
    rep.max_indicator_residual = std::max(rep.max_indicator_residual, mem.residual);
    rep.indicator_test = rep.indicator_test && mem.in_subspace;
  }

  // (c) spectrum of the uncontrollable block
  rep.blocks = block_decomposition(model, rep.controllable);
  rep.hurwitz_margin = cfg.hurwitz_margin * model.rate_norm();
  rep.hurwitz_test = true;
  if (!rep.is_controllable) {
    Eigen::EigenSolver<Matrix> es(rep.blocks.A_uc, false);
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
      const auto lambda = es.eigenvalues()[i];
      rep.uc_eigenvalues.push_back(lambda);
      if (!(lambda.real() < -rep.hurwitz_margin)) rep.hurwitz_test = false;
    }
    std::sort(rep.uc_eigenvalues.begin(), rep.uc_eigenvalues.end(),
              [](auto a, auto b) { return a.real() != b.real() ? a.real() > b.real() : a.imag() > b.imag(); });
  }

  if (rep.nullspace_test != rep.indicator_test || rep.indicator_test != rep.hurwitz_test) {
    std::ostringstream os;
    os << "stabilizability tests disagree: nullspace=" << rep.nullspace_test
       << " indicator=" << rep.indicator_test << " hurwitz=" << rep.hurwitz_test;
    throw Error(ErrorCode::InternalEquivalenceViolation, os.str());
  }
  rep.verdict = rep.nullspace_test;

  if (!rep.verdict) {
    const Eigen::Index n = rep.controllable_dim;
    const Matrix eta = detail::svd_null_basis(rep.blocks.A_uc, rep.hurwitz_margin);
    if (eta.cols() == 0) throw Error(ErrorCode::NumericalRankFailure, "uncontrollable block has no null vector");
    const Matrix lifted = rep.blocks.T.rightCols(d - n) * eta;  // orthonormal columns in C-perp
    Vector f = detail::lexicographic_first(lifted);
    // re-project onto C-perp to remove rounding from the echelon step
    f -= rep.controllable.project(f);
    f.normalize();
    detail::normalize_sign(f);
    rep.witness = f;
  }
  return rep;
}

}  // namespace wonham
