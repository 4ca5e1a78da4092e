#include <gtest/gtest.h>

#include <random>

#include "rbguard/simulator.hpp"

using namespace rbguard;

namespace {

constexpr SimMode all_modes[] = {SimMode::full, SimMode::ref1_edf_only, SimMode::ref2_dedicated_snc,
                                 SimMode::ref3_snc_rt_no_mitigation};

GeneratorParams constant(std::int64_t bits, std::int64_t bpr) {
  GeneratorParams g;
  g.kind = GeneratorKind::constant;
  g.bits = bits;
  g.pkt_sizes = {{bits, 1.0}};
  g.channel = {{bpr, 1.0}};
  return g;
}

GeneratorParams poisson(double lambda) {
  GeneratorParams g;
  g.kind = GeneratorKind::poisson_batch;
  g.lambda = lambda;
  g.pkt_sizes = {{200, 0.3}, {400, 0.4}, {800, 0.3}};
  g.channel = {{80, 1.0 / 3}, {120, 1.0 / 3}, {160, 1.0 / 3}};
  return g;
}

SimRun small_run(SimMode mode, std::vector<GeneratorParams> gens, int n_cell = 10, std::int64_t horizon = 900) {
  SimRun r;
  r.mode = mode;
  r.cell.n_cell_rb = n_cell;
  r.cell.t_obs = 400;
  r.cell.t_out = 200;
  r.horizon = horizon;
  r.seed = 3;
  for (std::size_t m = 0; m < gens.size(); ++m)
    r.specs.push_back({static_cast<int>(m), 0.005 * static_cast<double>(m + 1), 1e-3, gens[m]});
  return r;
}

DelayRecord rec(int svc, double delay, double w_th) { return {svc, 0, 0, delay, (delay - w_th) / w_th}; }

}  // namespace

TEST(Modes, NamesRoundTrip) {
  for (auto m : all_modes) EXPECT_EQ(parse_mode(to_string(m)), m);
  EXPECT_THROW(parse_mode("nope"), error);
}

TEST(Simulator, UnderloadHasUnitDelays) {
  for (auto mode : all_modes) {
    auto res = run(small_run(mode, {constant(100, 200), constant(100, 200)}));
    ASSERT_FALSE(res.records.empty());
    for (const auto& r : res.records) {
      EXPECT_EQ(r.completion_tti, r.arrival_tti) << to_string(mode);
      EXPECT_DOUBLE_EQ(r.delay_s, 0.001);
    }
    EXPECT_EQ(res.violation, (std::vector<double>{0, 0})) << to_string(mode);
  }
}

TEST(Simulator, OverloadQueueGrows) {
  // 5000 bits per TTI against 10 RBs * 100 bits.
  for (auto mode : all_modes) {
    Simulator sim(small_run(mode, {constant(5000, 100)}, 10, 3000));
    std::int64_t prev = -1;
    while (sim.tti() < 3000) {
      sim.step_tti();
      std::int64_t bits = 0;
      for (const auto& p : sim.queues()[0]) bits += p.bits_remaining;
      EXPECT_GT(bits, prev);
      prev = bits;
    }
    sim.finish();
    EXPECT_GT(sim.result().violation[0], 0.95) << to_string(mode);
  }
}

TEST(Simulator, SingleServiceFullMatchesEdfOnly) {
  auto a = run(small_run(SimMode::full, {poisson(2.0)}, 8, 1500));
  auto b = run(small_run(SimMode::ref1_edf_only, {poisson(2.0)}, 8, 1500));
  EXPECT_EQ(a.grants, b.grants);
  EXPECT_EQ(a.records, b.records);
}

TEST(Simulator, DedicatedModeDoesNotShare) {
  GeneratorParams idle = poisson(0.0);
  Simulator sim(small_run(SimMode::ref2_dedicated_snc, {constant(1000, 100), idle}, 10, 900));
  auto res = sim.run();
  for (std::size_t t = 0; t < res.grants[0].size(); ++t) EXPECT_LE(res.grants[0][t], res.n_min[0][t]);
  EXPECT_FALSE(sim.queues()[0].empty());
  EXPECT_EQ(res.grants[1], std::vector<int>(res.grants[1].size(), 0));
}

TEST(Simulator, SameSeedSameOutputs) {
  auto a = run(small_run(SimMode::full, {poisson(1.0), poisson(1.5)}, 12, 1200));
  auto b = run(small_run(SimMode::full, {poisson(1.0), poisson(1.5)}, 12, 1200));
  EXPECT_EQ(a.records, b.records);
  EXPECT_EQ(a.grants, b.grants);
  ASSERT_EQ(a.allocations.size(), b.allocations.size());
  for (std::size_t i = 0; i < a.allocations.size(); ++i) EXPECT_EQ(a.allocations[i].n_min, b.allocations[i].n_min);
}

TEST(Simulator, DecisionCadence) {
  auto res = run(small_run(SimMode::full, {poisson(1.0), poisson(1.5)}, 12, 1200));
  // decisions at t_obs, t_obs + t_out, ... below the horizon
  ASSERT_EQ(res.allocations.size(), 4u);
  EXPECT_EQ(res.allocations[0].tti, 400);
  EXPECT_EQ(res.allocations[3].tti, 1000);
  auto ref1 = run(small_run(SimMode::ref1_edf_only, {poisson(1.0), poisson(1.5)}, 12, 1200));
  EXPECT_TRUE(ref1.allocations.empty());
}

TEST(Simulator, DelayAccountingAndConservation) {
  for (auto mode : all_modes) {
    Simulator sim(small_run(mode, {poisson(2.0), poisson(1.5), poisson(1.0)}, 12, 1200));
    while (sim.tti() < 1200) {
      sim.step_tti();
      const auto& res = sim.result();
      EXPECT_LE(res.utilization.back(), 12);
      if (mode == SimMode::ref2_dedicated_snc) continue;
      bool backlog = false;
      for (const auto& q : sim.queues()) backlog = backlog || !q.empty();
      if (backlog) {
        EXPECT_EQ(res.utilization.back(), 12) << to_string(mode) << " tti " << sim.tti();
      }
    }
    sim.finish();
    for (const auto& r : sim.result().records) {
      EXPECT_GE(r.completion_tti, r.arrival_tti);
      EXPECT_DOUBLE_EQ(r.delay_s, static_cast<double>(r.completion_tti - r.arrival_tti + 1) * 0.001);
      EXPECT_GE(r.delay_s, 0.001);
    }
  }
}

TEST(Simulator, HorizonMustCoverOneDecision) {
  auto r = small_run(SimMode::full, {poisson(1.0)});
  r.horizon = 599;
  EXPECT_THROW(Simulator{r}, error);
}

TEST(Simulator, EmpiricalEstimatorRuns) {
  auto r = small_run(SimMode::full, {poisson(2.0), poisson(1.5)}, 12, 1000);
  r.estimator = std::make_shared<EmpiricalEstimator>();
  auto res = run(r);
  ASSERT_FALSE(res.allocations.empty());
  for (const auto& a : res.allocations) {
    int s = 0;
    for (int v : a.n_min) s += v;
    EXPECT_EQ(s, 12);
  }
}

TEST(Violation, Counting) {
  std::vector<DelayRecord> r;
  for (double d : {0.001, 0.002, 0.003, 0.004}) r.push_back(rec(0, d, 0.0025));
  EXPECT_DOUBLE_EQ(*violation_probability(r, 0, 0.0025), 0.5);
  EXPECT_DOUBLE_EQ(*violation_probability(r, 0, 0.01), 0.0);
  EXPECT_FALSE(violation_probability(r, 1, 0.01).has_value());
}

TEST(Violation, MatchesRecount) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> d(1, 30), svc(0, 2);
  std::vector<DelayRecord> r;
  for (int i = 0; i < 10000; ++i) r.push_back(rec(svc(rng), d(rng) * 0.001, 0.01));
  for (int s = 0; s < 3; ++s) {
    int n = 0, over = 0;
    for (const auto& x : r) {
      if (x.service_id != s) continue;
      ++n;
      over += x.delay_s > 0.01;
    }
    EXPECT_EQ(*violation_probability(r, s, 0.01), static_cast<double>(over) / n);
  }
}

TEST(Ccdf, SingleRecord) {
  std::vector<DelayRecord> r{{0, 0, 0, 0.006, 0.2}};
  auto c = ccdf(r);
  EXPECT_EQ(ccdf_at(c, 0.0), 1.0);
  EXPECT_EQ(ccdf_at(c, 0.2), 0.0);
}

TEST(Ccdf, EmptyIsError) {
  try {
    ccdf({});
    FAIL();
  } catch (const error& e) {
    EXPECT_EQ(e.code(), errc::empty_records);
  }
}

TEST(Ccdf, NonincreasingAndMatchesViolation) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> d(1, 25);
  std::vector<DelayRecord> r;
  for (int i = 0; i < 1000; ++i) r.push_back(rec(0, d(rng) * 0.001, 0.01));
  auto c = ccdf(r);
  for (std::size_t i = 1; i < c.size(); ++i) {
    EXPECT_LT(c[i - 1].first, c[i].first);
    EXPECT_LE(c[i].second, c[i - 1].second);
  }
  EXPECT_DOUBLE_EQ(ccdf_at(c, 0.0), *violation_probability(r, 0, 0.01));
}

TEST(Quantile, SmallestDelayMeetingEpsilon) {
  std::vector<DelayRecord> r;
  for (int i = 1; i <= 1000; ++i) r.push_back(rec(0, i * 0.001, 1.0));
  const double q = delay_quantile(r, 0, 0.01);
  EXPECT_DOUBLE_EQ(q, 0.990);
  int over = 0;
  for (const auto& x : r) over += x.delay_s > q;
  EXPECT_LE(over, 10);
}
