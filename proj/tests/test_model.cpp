#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace wonham;
using wonham::testing::make_model;

TEST(ProbabilityVector, RenormalizesAndRejectsNegative) {
  const ProbabilityVector p(std::vector<double>{1.0, 3.0});
  EXPECT_DOUBLE_EQ(p[0], 0.25);
  EXPECT_DOUBLE_EQ(p[1], 0.75);
  EXPECT_THROW(ProbabilityVector(std::vector<double>{-0.1, 1.1}), Error);
  EXPECT_THROW(ProbabilityVector(std::vector<double>{0.0, 0.0}), Error);
  EXPECT_THROW(ProbabilityVector(std::vector<double>{std::nan(""), 1.0}), Error);
  EXPECT_NEAR(ProbabilityVector::uniform(3).values().sum(), 1.0, 1e-15);
}

TEST(ValidateModel, AcceptsSymmetricChain) {
  const HmmModel m = make_model({{-1, 1}, {1, -1}}, {0, 1}, 1.0);
  EXPECT_EQ(m.d(), 2);
  EXPECT_DOUBLE_EQ(m.R(), 1.0);
}

TEST(ValidateModel, ReportsPositiveRowSum) {
  try {
    make_model({{-1, 2}, {1, -1}}, {0, 1}, 1.0);
    FAIL() << "expected a validation error";
  } catch (const ModelValidationError& e) {
    EXPECT_TRUE(e.has(ErrorCode::RowSumNonZero));
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(ValidateModel, ReportsEveryViolationAtOnce) {
  try {
    make_model({{-1, -1}, {1, -1}}, {0, 1}, 0.0);
    FAIL() << "expected a validation error";
  } catch (const ModelValidationError& e) {
    EXPECT_TRUE(e.has(ErrorCode::NegativeOffDiagonal));
    EXPECT_TRUE(e.has(ErrorCode::NonPositiveR));
    EXPECT_GE(e.issues().size(), 2u);
  }
}

TEST(ValidateModel, NonPositiveNoise) {
  try {
    make_model({{-1, 1}, {1, -1}}, {0, 1}, 0.0);
    FAIL();
  } catch (const ModelValidationError& e) {
    EXPECT_TRUE(e.has(ErrorCode::NonPositiveR));
  }
}

TEST(ValidateModel, DimensionMismatch) {
  try {
    make_model({{-1, 1}, {1, -1}}, {0, 1, 2}, 1.0);
    FAIL();
  } catch (const ModelValidationError& e) {
    EXPECT_TRUE(e.has(ErrorCode::DimensionMismatch));
  }
  EXPECT_THROW(validate_model(std::vector<std::vector<double>>{{-1, 1}, {1}}, {0.0, 1.0}, 1.0), ModelValidationError);
}

TEST(ValidateModel, RowSumsZeroAfterValidation) {
  const HmmModel m = make_model({{-0.3, 0.1, 0.2}, {0.7, -0.7, 0.0}, {0.05, 0.05, -0.1}}, {1, 2, 3});
  EXPECT_LE((m.A() * Vector::Ones(3)).cwiseAbs().maxCoeff(), 1e-12);
  for (double t : {0.1, 1.0, 10.0}) {
    const Matrix P = transition_matrix(m, t);
    EXPECT_LE((P * Vector::Ones(3) - Vector::Ones(3)).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GE(P.minCoeff(), -1e-12);
  }
}

TEST(ModelIo, ParsesAndRoundTrips) {
  const HmmModel m = parse_model(R"({"d":2,"A":[[-1,1],[2,-2]],"h":[0,1],"R":0.5,"name":"x"})");
  EXPECT_EQ(m.name(), "x");
  const HmmModel back = model_from_json(model_to_json(m));
  EXPECT_EQ(back.A(), m.A());
  EXPECT_EQ(back.h(), m.h());
  EXPECT_EQ(back.R(), m.R());
}

TEST(ModelIo, RejectsMalformedDocuments) {
  EXPECT_THROW(parse_model("{"), Error);
  EXPECT_THROW(parse_model(R"({"d":2,"A":[[-1,1],[1,-1]],"h":[0,1]})"), Error);
  EXPECT_THROW(parse_model(R"({"d":3,"A":[[-1,1],[1,-1]],"h":[0,1],"R":1})"), ModelValidationError);
  EXPECT_THROW(parse_model(R"({"d":2,"A":[[-1,1],[1,-1]],"h":[0,"a"],"R":1})"), Error);
  EXPECT_THROW(load_model("/nonexistent/model.json"), Error);
}

TEST(ModelIo, SuiteFilesLoad) {
  for (const char* name : {"sym2", "asym2", "detect2", "consth", "twin", "blocks4"})
    EXPECT_NO_THROW(wonham::testing::suite_model(name)) << name;
  try {
    wonham::testing::suite_model("bad");
    FAIL();
  } catch (const ModelValidationError& e) {
    EXPECT_TRUE(e.has(ErrorCode::RowSumNonZero));
  }
}

TEST(ErgodicDecomposition, ZeroRatesGiveSingletons) {
  const auto dec = ergodic_decomposition(make_model({{0, 0}, {0, 0}}, {0, 1}));
  ASSERT_EQ(dec.m(), 2u);
  EXPECT_EQ(dec.classes[0], std::vector<Eigen::Index>{0});
  EXPECT_EQ(dec.classes[1], std::vector<Eigen::Index>{1});
}

TEST(ErgodicDecomposition, BlockDiagonal) {
  const HmmModel m = wonham::testing::suite_model("blocks4");
  const auto dec = ergodic_decomposition(m);
  ASSERT_EQ(dec.m(), 2u);
  EXPECT_EQ(dec.classes[0], (std::vector<Eigen::Index>{0, 1}));
  EXPECT_EQ(dec.classes[1], (std::vector<Eigen::Index>{2, 3}));
  Vector sum = Vector::Zero(4);
  for (const auto& ind : dec.indicators) {
    EXPECT_LE((m.A() * ind).cwiseAbs().maxCoeff(), 1e-12);
    sum += ind;
  }
  EXPECT_EQ(sum, Vector::Ones(4));
}

TEST(ErgodicDecomposition, RejectsTransientStates) {
  const HmmModel m = make_model({{-1, 1}, {0, 0}}, {0, 1});
  try {
    ergodic_decomposition(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TransientStatesPresent);
    EXPECT_NE(std::string(e.what()).find('1'), std::string::npos);
  }
}

TEST(InvariantMeasure, Examples) {
  const HmmModel asym = make_model({{-1, 1}, {2, -2}}, {0, 1});
  const auto mu = invariant_measure(asym, 0);
  EXPECT_NEAR(mu[0], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(mu[1], 1.0 / 3.0, 1e-12);

  const HmmModel zero = make_model({{0, 0}, {0, 0}}, {0, 1});
  EXPECT_EQ(invariant_measure(zero, 0).values(), Vector::Unit(2, 0));

  const HmmModel blocks = wonham::testing::suite_model("blocks4");
  const auto m2 = invariant_measure(blocks, 1);
  EXPECT_NEAR(m2[0], 0.0, 1e-15);
  EXPECT_NEAR(m2[2], 0.5, 1e-12);
  EXPECT_NEAR(m2[3], 0.5, 1e-12);
}

TEST(InvariantMeasure, MixtureAndInvariance) {
  const HmmModel blocks = wonham::testing::suite_model("blocks4");
  const auto dec = ergodic_decomposition(blocks);
  const auto first = mixture_invariant(blocks, dec, {1.0, 0.0});
  EXPECT_NEAR(first[0], 0.5, 1e-12);
  EXPECT_NEAR(first[2], 0.0, 1e-15);
  const HmmModel zero = make_model({{0, 0}, {0, 0}}, {0, 1});
  const auto half = mixture_invariant(zero, ergodic_decomposition(zero), {0.5, 0.5});
  EXPECT_NEAR(half[0], 0.5, 1e-15);
  EXPECT_THROW(mixture_invariant(blocks, dec, {1.0}), Error);
}

TEST(InvariantMeasure, PropertyOnRandomModels) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const HmmModel m = wonham::testing::random_model(rng, 6, 3);
    const auto dec = ergodic_decomposition(m);
    std::vector<double> w(dec.m());
    double s = 0.0;
    for (auto& x : w) s += (x = std::uniform_real_distribution<double>(0.1, 1.0)(rng));
    for (auto& x : w) x /= s;
    const auto mix = mixture_invariant(m, dec, w);
    EXPECT_LE((m.A().transpose() * mix.values()).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, m.rate_norm()) * 10);
    for (std::size_t k = 0; k < dec.m(); ++k) {
      const Vector mu = invariant_measure(m, dec, k).values();
      EXPECT_LE((m.A().transpose() * mu).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, m.rate_norm()));
      const Vector evolved = (m.A().transpose()).exp() * mu;
      EXPECT_LE((evolved - mu).cwiseAbs().maxCoeff(), 1e-9);
      for (Eigen::Index x : dec.classes[k]) EXPECT_GT(mu[x], 0.0);
      EXPECT_NEAR(mu.dot(Vector::Ones(m.d()) - dec.indicators[k]), 0.0, 1e-15);
    }
  }
}
