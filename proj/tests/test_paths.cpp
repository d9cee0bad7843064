#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace wonham;
using wonham::testing::make_model;
using wonham::testing::suite_model;

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  const RngStream s(42, 7);
  auto a = s.engine(RngStream::Substream::Signal);
  auto b = s.engine(RngStream::Substream::Signal);
  auto c = s.engine(RngStream::Substream::Noise);
  auto d = RngStream(42, 8).engine(RngStream::Substream::Signal);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    EXPECT_EQ(x, b());
    differs_c = differs_c || x != c();
    differs_d = differs_d || x != d();
  }
  EXPECT_TRUE(differs_c);
  EXPECT_TRUE(differs_d);
}

TEST(Rng, UniformMomentsAreReasonable) {
  CounterEngine eng(123);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(eng);
    s += u;
    s2 += u * u;
  }
  EXPECT_NEAR(s / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n) * 1.5);
  EXPECT_NEAR(s2 / n, 1.0 / 3.0, 0.005);
}

TEST(SampleInitial, PointMassesAndFrequency) {
  CounterEngine eng(1);
  const auto first = ProbabilityVector(std::vector<double>{1, 0});
  const auto third = ProbabilityVector(std::vector<double>{0, 0, 1, 0});
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(sample_initial(first, eng), 0);
    EXPECT_EQ(sample_initial(third, eng), 2);
  }
  const auto half = ProbabilityVector::uniform(2);
  int ones = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) ones += sample_initial(half, eng) == 0;
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.5, 0.01);
}

TEST(SampleCtmc, AbsorbingWhenRatesVanish) {
  CounterEngine eng(2);
  const HmmModel m = make_model({{0, 0}, {0, 0}}, {0, 1});
  const auto path = sample_ctmc(m, 1, 50.0, eng);
  EXPECT_TRUE(path.jump_times.empty());
  EXPECT_EQ(path.final_state(), 1);
}

TEST(SampleCtmc, MeanHoldingTime) {
  const HmmModel m = make_model({{-1, 1}, {1, -1}}, {0, 1});
  double sum = 0.0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    auto eng = RngStream(9, static_cast<std::uint64_t>(i)).engine(RngStream::Substream::Signal);
    const auto path = sample_ctmc(m, 0, 100.0, eng);
    ASSERT_FALSE(path.jump_times.empty());
    sum += path.jump_times.front();
  }
  EXPECT_NEAR(sum / n, 1.0, 0.1);
}

TEST(SampleCtmc, StaysInInitialClassAndIsConsistent) {
  const HmmModel twin = suite_model("twin");
  const auto dec = ergodic_decomposition(twin);
  for (int i = 0; i < 200; ++i) {
    auto eng = RngStream(4, static_cast<std::uint64_t>(i)).engine(RngStream::Substream::Signal);
    const auto path = sample_ctmc(twin, 0, 20.0, eng);
    EXPECT_TRUE(path_is_consistent(path, twin, dec));
    for (auto x : path.jump_targets) EXPECT_LT(x, 2);
  }
  std::mt19937_64 rng(8);
  for (int t = 0; t < 30; ++t) {
    const HmmModel m = wonham::testing::random_model(rng, 5, 3);
    const auto d2 = ergodic_decomposition(m);
    for (int i = 0; i < 20; ++i) {
      auto eng = RngStream(t, static_cast<std::uint64_t>(i)).engine(RngStream::Substream::Signal);
      const auto x0 = sample_initial(ProbabilityVector::uniform(m.d()), eng);
      EXPECT_TRUE(path_is_consistent(sample_ctmc(m, x0, 5.0, eng), m, d2));
    }
  }
}

TEST(SampleCtmc, OccupationLawMatchesInvariantMeasure) {
  const HmmModel m = suite_model("asym2");
  auto eng = RngStream(3, 0).engine(RngStream::Substream::Signal);
  const double T = 1000.0;
  const auto path = sample_ctmc(m, 0, T, eng);
  const auto occ = integrate_h(path, Vector::Unit(2, 0), 1.0);
  double time_in_first = 0.0;
  for (double v : occ) time_in_first += v;
  // batch means over 10 segments give the Monte Carlo standard error
  std::vector<double> batches(10, 0.0);
  for (std::size_t k = 0; k < occ.size(); ++k) batches[k / 100] += occ[k] / 100.0;
  const Estimate e = estimate(batches);
  EXPECT_NEAR(time_in_first / T, 2.0 / 3.0, 3.0 * e.std_error + 1e-3);
}

TEST(IntegrateH, ExactGeometry) {
  SamplePath constant;
  constant.initial_state = 1;
  constant.horizon = 1.0;
  for (double v : integrate_h(constant, Vector(Eigen::Vector2d(0, 2)), 0.25)) EXPECT_DOUBLE_EQ(v, 0.5);

  SamplePath mid;
  mid.initial_state = 0;
  mid.jump_times = {0.375};
  mid.jump_targets = {1};
  mid.horizon = 1.0;
  const auto steps = integrate_h(mid, Vector(Eigen::Vector2d(0, 1)), 0.25);
  ASSERT_EQ(steps.size(), 4u);
  EXPECT_DOUBLE_EQ(steps[0], 0.0);
  EXPECT_DOUBLE_EQ(steps[1], 0.125);
  EXPECT_DOUBLE_EQ(steps[2], 0.25);
  EXPECT_DOUBLE_EQ(steps[3], 0.25);
}

TEST(IntegrateH, TelescopesToPathIntegral) {
  const HmmModel m = suite_model("blocks4");
  for (int i = 0; i < 50; ++i) {
    auto eng = RngStream(12, static_cast<std::uint64_t>(i)).engine(RngStream::Substream::Signal);
    const auto path = sample_ctmc(m, i % 4, 3.0, eng);
    double direct = 0.0, left = 0.0;
    Eigen::Index x = path.initial_state;
    for (std::size_t j = 0; j < path.jump_times.size(); ++j) {
      direct += m.h()[x] * (path.jump_times[j] - left);
      left = path.jump_times[j];
      x = path.jump_targets[j];
    }
    direct += m.h()[x] * (3.0 - left);
    double sum = 0.0;
    for (double v : integrate_h(path, m.h(), 1e-3)) sum += v;
    EXPECT_NEAR(sum, direct, 1e-10);
  }
}

TEST(IntegrateH, RejectsGridThatDoesNotDivideHorizon) {
  SamplePath p;
  p.horizon = 1.0;
  EXPECT_THROW(integrate_h(p, Vector::Ones(2), 0.3), Error);
}

TEST(SampleObservations, PureNoiseVariance) {
  const HmmModel m = make_model({{-1, 1}, {1, -1}}, {0, 0}, 0.5);
  const double dt = 1e-3;
  SamplePath p;
  p.horizon = 100.0;
  auto noise = RngStream(5, 0).engine(RngStream::Substream::Noise);
  const auto obs = sample_observations(p, m, dt, noise);
  ASSERT_EQ(obs.n_steps(), 100000u);
  double s2 = 0.0;
  for (double v : obs.increments) s2 += v * v;
  EXPECT_NEAR(s2 / obs.n_steps() / (0.5 * dt), 1.0, 0.03);
}

TEST(SampleObservations, TinyNoiseRecoversSignal) {
  const HmmModel m = make_model({{0, 0}, {0, 0}}, {0, 1}, 1e-12);
  SamplePath p;
  p.initial_state = 1;
  p.horizon = 1.0;
  auto noise = RngStream(5, 1).engine(RngStream::Substream::Noise);
  for (double v : sample_observations(p, m, 1e-3, noise).increments) EXPECT_NEAR(v, 1e-3, 1e-7);
}

TEST(SampleObservations, MeanOfZT) {
  const HmmModel m = make_model({{0, 0}, {0, 0}}, {0, 1}, 1.0);
  std::vector<double> z;
  for (int i = 0; i < 10000; ++i) {
    const Trial tr = simulate_trial(m, ProbabilityVector::uniform(2), 1.0, 1e-2, RngStream(6, i));
    z.push_back(tr.obs.cumulative().back());
  }
  const Estimate e = estimate(z);
  EXPECT_NEAR(e.mean, 0.5, 3.0 * e.std_error);
}

TEST(SimulateTrial, DeterministicAndSignalIndependentOfGrid) {
  const HmmModel m = suite_model("sym2");
  const auto prior = ProbabilityVector::uniform(2);
  const Trial a = simulate_trial(m, prior, 2.0, 1e-3, RngStream(77, 3));
  const Trial b = simulate_trial(m, prior, 2.0, 1e-3, RngStream(77, 3));
  const Trial c = simulate_trial(m, prior, 2.0, 5e-4, RngStream(77, 3));
  EXPECT_EQ(a.path.jump_times, b.path.jump_times);
  EXPECT_EQ(a.obs.increments, b.obs.increments);
  EXPECT_EQ(a.path.jump_times, c.path.jump_times);
  EXPECT_EQ(a.path.jump_targets, c.path.jump_targets);
}

TEST(ObservationGrid, CoarsenSumsBlocks) {
  ObservationGrid g{0.5, {1, 2, 3, 4}};
  const auto c = g.coarsen(2);
  EXPECT_DOUBLE_EQ(c.dt, 1.0);
  EXPECT_EQ(c.increments, (std::vector<double>{3, 7}));
  EXPECT_THROW(g.coarsen(3), Error);
  EXPECT_EQ(g.cumulative(), (std::vector<double>{0, 1, 3, 6, 10}));
}
