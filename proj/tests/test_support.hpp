#pragma once

#include <random>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "wonham/wonham.hpp"

namespace wonham::testing {

inline std::string model_path(const std::string& name) { return std::string(WONHAM_MODELS_DIR) + "/" + name + ".json"; }

inline HmmModel suite_model(const std::string& name) { return load_model(model_path(name)); }

inline HmmModel make_model(std::initializer_list<std::initializer_list<double>> A, std::initializer_list<double> h,
                           double R = 1.0) {
  std::vector<std::vector<double>> rows;
  for (const auto& r : A) rows.emplace_back(r);
  return validate_model(rows, std::vector<double>(h), R);
}

/// Random generator with 1-3 closed classes and no transient states. Each
/// class carries a random cycle (irreducible) plus random extra edges.
/// Observation functions are drawn from a small integer alphabet half of the
/// time, which produces repeated values and therefore uncontrollable models.
inline HmmModel random_model(std::mt19937_64& rng, int max_d = 5, int max_classes = 3) {
  std::uniform_int_distribution<int> dd(1, max_d);
  const int d = dd(rng);
  const int m = std::uniform_int_distribution<int>(1, std::min(d, max_classes))(rng);
  std::vector<int> perm(d);
  for (int i = 0; i < d; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  // split the permutation into m nonempty consecutive blocks
  std::vector<int> cuts;
  {
    std::vector<int> pos;
    for (int i = 1; i < d; ++i) pos.push_back(i);
    std::shuffle(pos.begin(), pos.end(), rng);
    cuts.assign(pos.begin(), pos.begin() + (m - 1));
    std::sort(cuts.begin(), cuts.end());
    cuts.insert(cuts.begin(), 0);
    cuts.push_back(d);
  }
  std::uniform_real_distribution<double> rate(0.2, 3.0);
  std::bernoulli_distribution extra(0.35);
  Matrix A = Matrix::Zero(d, d);
  for (int k = 0; k < m; ++k) {
    std::vector<int> cls(perm.begin() + cuts[k], perm.begin() + cuts[k + 1]);
    const int n = static_cast<int>(cls.size());
    if (n == 1) continue;
    for (int i = 0; i < n; ++i) A(cls[i], cls[(i + 1) % n]) = rate(rng);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j && A(cls[i], cls[j]) == 0.0 && extra(rng)) A(cls[i], cls[j]) = rate(rng);
  }
  for (int i = 0; i < d; ++i) A(i, i) = -A.row(i).sum();
  Vector h(d);
  if (std::bernoulli_distribution(0.5)(rng)) {
    std::uniform_int_distribution<int> level(0, 2);
    for (int i = 0; i < d; ++i) h[i] = level(rng);
  } else {
    std::normal_distribution<double> g(0.0, 1.0);
    for (int i = 0; i < d; ++i) h[i] = g(rng);
  }
  return validate_model(A, h, 1.0);
}

/// Twin-chain family: k copies of one irreducible block with identical h, so
/// the class indicators are never in the controllable subspace.
inline HmmModel twin_blocks(std::mt19937_64& rng, int block, int copies) {
  std::uniform_real_distribution<double> rate(0.2, 3.0);
  Matrix B = Matrix::Zero(block, block);
  for (int i = 0; i < block; ++i)
    for (int j = 0; j < block; ++j)
      if (i != j) B(i, j) = rate(rng);
  for (int i = 0; i < block; ++i) B(i, i) = -B.row(i).sum();
  Vector hb(block);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < block; ++i) hb[i] = g(rng);
  const int d = block * copies;
  Matrix A = Matrix::Zero(d, d);
  Vector h(d);
  for (int c = 0; c < copies; ++c) {
    A.block(c * block, c * block, block, block) = B;
    h.segment(c * block, block) = hb;
  }
  return validate_model(A, h, 1.0);
}

/// Numerical rank with columns normalized first; sigma_i > rel * sigma_max.
inline Eigen::Index normalized_rank(const Matrix& M, double rel = 1e-8) {
  if (M.cols() == 0) return 0;
  Matrix N = M;
  for (Eigen::Index j = 0; j < N.cols(); ++j) {
    const double n = N.col(j).norm();
    if (n > 0.0) N.col(j) /= n;
  }
  Eigen::JacobiSVD<Matrix> svd(N);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > rel * s[0]) ++r;
  return r;
}

/// Brute-force rank of span{w(1) : w a word in {A, diag(h)} of length <= d^2}.
/// Words up to length d are enumerated literally; longer words go through an
/// SVD-compressed basis of the exact-length layer. A word whose value is
/// below 1e-10 times the product of its operator norms is rounding residue
/// (A 1 = 0 only up to rounding) and is discarded before normalization.
inline Eigen::Index word_enumeration_rank(const HmmModel& model) {
  const Eigen::Index d = model.d();
  const Matrix H = model.h().asDiagonal();
  const double nA = model.A().operatorNorm(), nH = H.operatorNorm();
  const double noise = 1e-10;
  struct Word {
    Vector v;
    double scale;  // product of operator norms along the word, times |1|
  };
  std::vector<Word> layer{{Vector::Ones(d), std::sqrt(static_cast<double>(d))}};
  Matrix all(d, 0);
  auto keep = [&](const Vector& v) {
    all.conservativeResize(Eigen::NoChange, all.cols() + 1);
    all.col(all.cols() - 1) = v;
  };
  keep(layer.front().v);
  for (Eigen::Index len = 1; len <= d; ++len) {
    std::vector<Word> next;
    for (const auto& w : layer) {
      next.push_back({model.A() * w.v, w.scale * nA});
      next.push_back({H * w.v, w.scale * nH});
    }
    layer.clear();
    for (auto& w : next) {
      if (w.v.norm() > noise * w.scale) {
        keep(w.v);
        layer.push_back(std::move(w));
      }
    }
  }
  auto compress = [&](const Matrix& M) {
    std::vector<Vector> out;
    if (M.cols() == 0) return out;
    Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU);
    const Vector& s = svd.singularValues();
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s[i] > noise * std::max({nA, nH, 1.0})) out.push_back(svd.matrixU().col(i));
    return out;
  };
  std::vector<Vector> basis;
  {
    Matrix M(d, static_cast<Eigen::Index>(layer.size()));
    for (std::size_t i = 0; i < layer.size(); ++i) M.col(static_cast<Eigen::Index>(i)) = layer[i].v / layer[i].v.norm();
    basis = compress(M);
  }
  for (Eigen::Index len = d + 1; len <= d * d && !basis.empty(); ++len) {
    Matrix M(d, 2 * static_cast<Eigen::Index>(basis.size()));
    for (std::size_t i = 0; i < basis.size(); ++i) {
      M.col(2 * static_cast<Eigen::Index>(i)) = model.A() * basis[i];
      M.col(2 * static_cast<Eigen::Index>(i) + 1) = H * basis[i];
    }
    basis = compress(M);
    for (const auto& b : basis) keep(b);
  }
  return normalized_rank(all);
}

}  // namespace wonham::testing
