#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "rbguard/rb_estimator.hpp"

using namespace rbguard;

namespace {

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

Gmm random_gmm(std::mt19937_64& rng, int n_add) {
  std::uniform_int_distribution<int> k(1, 4);
  std::uniform_real_distribution<double> mu(-3, n_add + 3), sd(0.05, 6), w(0.1, 1);
  Gmm g(static_cast<std::size_t>(k(rng)));
  double tot = 0;
  for (auto& c : g) {
    c = {w(rng), mu(rng), sd(rng)};
    tot += c.weight;
  }
  for (auto& c : g) c.weight /= tot;
  return g;
}

double density(const Gmm& g, double x) {
  double p = 0;
  for (const auto& c : g) {
    const double z = (x - c.mean) / c.stddev;
    p += c.weight * std::exp(-0.5 * z * z) / (c.stddev * std::sqrt(2 * M_PI));
  }
  return p;
}

}  // namespace

TEST(RegionProbabilities, PointMass) {
  auto pi = region_probabilities({{1.0, 2.0, 0.01}}, 5);
  ASSERT_EQ(pi.size(), 6u);
  EXPECT_NEAR(pi[2], 1.0, 1e-12);
  for (int n : {0, 1, 3, 4, 5}) EXPECT_LT(pi[n], 1e-12);
}

TEST(RegionProbabilities, LowerTailFold) {
  auto pi = region_probabilities({{1.0, 0.5, 1.0}}, 4);
  EXPECT_NEAR(pi[0], 0.5, 1e-15);
}

TEST(RegionProbabilities, UpperTailFold) {
  auto pi = region_probabilities({{1.0, 100.0, 1.0}}, 4);
  EXPECT_NEAR(pi[4], 1.0, 1e-12);
  auto zero = region_probabilities({{1.0, 3.0, 2.0}}, 0);
  ASSERT_EQ(zero.size(), 1u);
  EXPECT_DOUBLE_EQ(zero[0], 1.0);
}

TEST(RegionProbabilities, ProbabilityVectorProperty) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const int n_add = trial % 40;
    auto pi = region_probabilities(random_gmm(rng, n_add), n_add);
    EXPECT_NEAR(sum(pi), 1.0, 1e-9);
    for (double p : pi) EXPECT_GE(p, 0.0);
  }
}

TEST(RegionProbabilities, MatchesQuadrature) {
  std::mt19937_64 rng(8);
  using boost::math::quadrature::gauss_kronrod;
  for (int trial = 0; trial < 20; ++trial) {
    const int n_add = 10;
    auto g = random_gmm(rng, n_add);
    auto pi = region_probabilities(g, n_add);
    auto f = [&](double x) { return density(g, x); };
    for (int n = 1; n < n_add; ++n) {
      const double q = gauss_kronrod<double, 61>::integrate(f, n - 0.5, n + 0.5, 15, 1e-12);
      EXPECT_NEAR(pi[n], q, 1e-9);
    }
  }
}

TEST(EmpiricalPi, Counting) {
  std::vector<int> h{0, 0, 1, 1};
  auto pi = empirical_pi(h, 3);
  EXPECT_EQ(pi, (std::vector<double>{0.5, 0.5, 0, 0}));
}

TEST(EmpiricalPi, EmptyHistoryFallsBack) {
  auto pi = empirical_pi({}, 4);
  EXPECT_EQ(pi, (std::vector<double>{1, 0, 0, 0, 0}));
  EXPECT_EQ(pi, pessimistic_pi(4));
}

TEST(EmpiricalPi, AllAtTop) {
  std::vector<int> h(7, 5);
  auto pi = empirical_pi(h, 5);
  EXPECT_DOUBLE_EQ(pi[5], 1.0);
}

TEST(EmpiricalPi, MatchesBruteForceCount) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> v(0, 30), len(1, 300);
  for (int trial = 0; trial < 200; ++trial) {
    const int n_add = v(rng);
    std::vector<int> h(static_cast<std::size_t>(len(rng)));
    for (auto& x : h) x = v(rng);
    std::map<int, int> count;
    for (int x : h) ++count[std::min(x, n_add)];
    auto pi = empirical_pi(h, n_add);
    for (int n = 0; n <= n_add; ++n)
      EXPECT_DOUBLE_EQ(pi[n], static_cast<double>(count[n]) / static_cast<double>(h.size()));
  }
}

TEST(ExtraRbHistory, CounterfactualUnderCandidate) {
  // Two services in a 10 RB cell. TTI 0: svc0 wants 6, svc1 wants 1.
  // TTI 1: svc0 wants 2 (not above its guarantee). TTI 2: svc0 wants 9, svc1 wants 8.
  std::vector<ServiceTelemetry> tel(2);
  tel[0].demand_rbs = {6, 2, 9};
  tel[1].demand_rbs = {1, 0, 8};
  EstimatorInput in{10, 1, tel};
  std::vector<int> cand{4, 6};
  EXPECT_EQ(extra_rb_history(in, cand, 0), (std::vector<int>{5, 0}));
  EXPECT_EQ(extra_rb_history(in, cand, 1), (std::vector<int>{0}));
}

TEST(Estimators, EmpiricalUsesHistory) {
  std::vector<ServiceTelemetry> tel(2);
  tel[0].demand_rbs = {6, 6, 6, 6};
  tel[1].demand_rbs = {0, 0, 6, 6};
  EstimatorInput in{10, 1, tel};
  std::vector<int> cand{5, 5};
  EmpiricalEstimator e;
  EXPECT_EQ(e.estimate(in, cand, 0, 5), (std::vector<double>{0.5, 0, 0, 0, 0, 0.5}));
  PessimisticEstimator p;
  EXPECT_EQ(p.estimate(in, cand, 0, 5), pessimistic_pi(5));
}
