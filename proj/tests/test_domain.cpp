#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rbguard/capacity.hpp"
#include "rbguard/domain.hpp"
#include "rbguard/trace_io.hpp"

using namespace rbguard;

namespace {

template <typename F>
errc code_of(F&& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no rbguard::error thrown";
  return errc::io;
}

std::vector<ServiceSpec> three_services() {
  std::vector<ServiceSpec> s(3);
  const double w[] = {0.005, 0.010, 0.015}, eps[] = {1e-5, 1e-4, 1e-3};
  for (int i = 0; i < 3; ++i) s[i] = {i, w[i], eps[i], GeneratorParams{}};
  return s;
}

}  // namespace

TEST(Config, FullScaleCellIsValid) {
  CellConfig cell{60, 0.001, 1000, 4000, 1};
  auto v = validate_config(cell, three_services());
  EXPECT_EQ(v.cell, cell);
  EXPECT_EQ(v.services.size(), 3u);
}

TEST(Config, RejectsEmptyCell) {
  CellConfig cell;
  cell.n_cell_rb = 0;
  EXPECT_EQ(code_of([&] { validate_config(cell, three_services()); }), errc::config);
}

TEST(Config, RejectsFewerRbsThanServices) {
  CellConfig cell;
  cell.n_cell_rb = 2;
  EXPECT_EQ(code_of([&] { validate_config(cell, three_services()); }), errc::config);
}

TEST(Config, RejectsBadBudgets) {
  auto s = three_services();
  s[1].epsilon = 1.5;
  EXPECT_EQ(code_of([&] { validate_config(CellConfig{}, s); }), errc::config);
  s = three_services();
  s[0].w_th = 0;
  EXPECT_EQ(code_of([&] { validate_config(CellConfig{}, s); }), errc::config);
}

TEST(Config, ValidationIsIdempotent) {
  auto v = validate_config(CellConfig{}, three_services());
  EXPECT_EQ(validate_config(v), v);
}

TEST(Trace, ParsesRows) {
  std::istringstream in("tti,ue_id,bits,rbs\n0,1,120,3\n0,2,80,2\n");
  auto r = parse_trace(in);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], (TraceRecord{0, 1, 120, 3}));
  EXPECT_EQ(r[1], (TraceRecord{0, 2, 80, 2}));
}

TEST(Trace, NonNumericFieldReportsLine) {
  std::istringstream in("tti,ue_id,bits,rbs\n0,1,120,3\n1,2,lots,2\n");
  try {
    parse_trace(in);
    FAIL();
  } catch (const parse_error& e) {
    EXPECT_EQ(e.code(), errc::parse);
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Trace, EmptyFileIsEmptyTrace) {
  std::istringstream in("");
  EXPECT_EQ(code_of([&] { parse_trace(in); }), errc::empty_trace);
  std::istringstream header_only("tti,ue_id,bits,rbs\n");
  EXPECT_EQ(code_of([&] { parse_trace(header_only); }), errc::empty_trace);
}

TEST(Trace, WriteParseRoundTrip) {
  std::vector<TraceRecord> recs{{0, 3, 10, 1}, {2, 1, 500, 4}, {2, 3, 7, 0}};
  std::stringstream ss;
  write_trace(ss, recs);
  EXPECT_EQ(parse_trace(ss), recs);
}

TEST(Trace, FalconConversionMergesAndRebases) {
  std::istringstream in(
      "# ts sfn sf rnti dir mcs prb tbs\n"
      "0.1 100 3 17 1 10 4 400\n"
      "0.1 100 3 17 1 10 2 100\n"
      "0.1 100 3 18 0 10 9 900\n"
      "0.2 100 5 18 1 10 1 50\n");
  auto r = convert_falcon(in);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], (TraceRecord{0, 17, 500, 6}));
  EXPECT_EQ(r[1], (TraceRecord{2, 18, 50, 1}));
}

TEST(Trace, FalconFrameWrap) {
  std::istringstream in("0 1023 9 1 1 0 1 10\n0 0 0 1 1 0 1 10\n");
  auto r = convert_falcon(in);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[1].tti, 1);
}

namespace {
std::vector<TraceRecord> ues(int n) {
  std::vector<TraceRecord> r;
  // ue i sends (n - i) * 100 bits once, so volume order is ue 0, 1, ...
  for (int i = 0; i < n; ++i) r.push_back({i, i, (n - i) * 100, 1});
  return r;
}
}  // namespace

TEST(GroupUes, EqualGroups) {
  auto s = group_ues(ues(6), 3);
  ASSERT_EQ(s.size(), 3u);
  for (const auto& g : s) EXPECT_EQ(g.arrivals.size(), 2u);
  EXPECT_EQ(s[0].arrivals[0].size_bits, 600);
  EXPECT_EQ(s[0].arrivals[1].size_bits, 500);
}

TEST(GroupUes, RemainderJoinsLastGroup) {
  auto s = group_ues(ues(7), 3);
  EXPECT_EQ(s[0].arrivals.size(), 2u);
  EXPECT_EQ(s[1].arrivals.size(), 2u);
  EXPECT_EQ(s[2].arrivals.size(), 3u);
}

TEST(GroupUes, SingleUeIsIdentity) {
  std::vector<TraceRecord> r{{0, 5, 120, 3}, {3, 5, 80, 0}};
  auto s = group_ues(r, 1, 40);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].n_ttis, 4);
  ASSERT_EQ(s[0].arrivals.size(), 2u);
  EXPECT_EQ(s[0].arrivals[0], (Arrival{0, 120, 40}));
  EXPECT_EQ(s[0].arrivals[1], (Arrival{3, 80, 40}));
}

TEST(GroupUes, TooFewUes) {
  EXPECT_EQ(code_of([] { group_ues(ues(2), 3); }), errc::too_few_ues);
}

TEST(Synthetic, ConstantStream) {
  GeneratorParams g;
  g.kind = GeneratorKind::constant;
  g.bits = 100;
  g.pkt_sizes = {{100, 1.0}};
  auto s = gen_synthetic(g, 5, 1);
  EXPECT_EQ(s.bits_per_tti(), (std::vector<std::int64_t>{100, 100, 100, 100, 100}));
}

TEST(Synthetic, PoissonMeanMatchesRate) {
  GeneratorParams g;
  g.kind = GeneratorKind::poisson_batch;
  g.lambda = 2;
  g.pkt_sizes = {{100, 1.0}};
  const std::int64_t n = 100000;
  auto x = gen_synthetic(g, n, 7).bits_per_tti();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  // Var = 100^2 * lambda per TTI.
  const double sigma = 100 * std::sqrt(2.0);
  EXPECT_NEAR(mean, 200.0, 3 * sigma / std::sqrt(static_cast<double>(n)));
}

TEST(Synthetic, OnOffNeverOnIsSilent) {
  GeneratorParams g;
  g.kind = GeneratorKind::on_off;
  g.lambda = 5;
  g.lambda_off = 0;
  g.p_on = 0;
  g.p_off = 0.5;
  auto s = gen_synthetic(g, 1000, 3);
  EXPECT_TRUE(s.arrivals.empty());
}

TEST(Synthetic, SameSeedSameStream) {
  GeneratorParams g;
  g.kind = GeneratorKind::poisson_batch;
  g.lambda = 1.3;
  g.pkt_sizes = {{200, 0.5}, {800, 0.5}};
  g.channel = {{80, 0.5}, {160, 0.5}};
  EXPECT_EQ(gen_synthetic(g, 2000, 11), gen_synthetic(g, 2000, 11));
  EXPECT_NE(gen_synthetic(g, 2000, 11), gen_synthetic(g, 2000, 12));
}

TEST(Synthetic, BadParams) {
  GeneratorParams g;
  g.kind = GeneratorKind::poisson_batch;
  g.lambda = -1;
  EXPECT_EQ(code_of([&] { gen_synthetic(g, 10, 1); }), errc::bad_generator_params);
  g.lambda = 1;
  g.pkt_sizes = {{100, 0.3}, {200, 0.3}};
  EXPECT_EQ(code_of([&] { gen_synthetic(g, 10, 1); }), errc::bad_generator_params);
}

TEST(Window, TakesTrailingTtis) {
  ServiceStream s{0, 10, {}};
  for (int t = 0; t < 10; ++t) s.arrivals.push_back({t, 10 * t, 1});
  std::vector<TransmittedPacket> tx{{5, 50, 5}, {6, 60, 2}, {9, 90, 3}};
  auto w = window(s, tx, 9, 4);
  EXPECT_EQ(w.x_d, (std::vector<std::int64_t>{60, 70, 80, 90}));
  ASSERT_EQ(w.packets.size(), 2u);
  EXPECT_EQ(w.packets[0], (PacketRecord{60, 2}));
  EXPECT_EQ(w, window(s, tx, 9, 4));
}

TEST(Window, InsufficientHistory) {
  ServiceStream s{0, 10, {}};
  EXPECT_EQ(code_of([&] { window(s, {}, 2, 4); }), errc::insufficient_history);
}

TEST(Capacity, PerPacketVector) {
  EXPECT_EQ(per_packet_rb_vector(120, 3), (std::vector<std::int64_t>{40, 40, 40}));
  EXPECT_EQ(per_packet_rb_vector(100, 1), (std::vector<std::int64_t>{100}));
  EXPECT_EQ(per_packet_rb_vector(5, 10), std::vector<std::int64_t>(10, 1));
}

TEST(Capacity, Concatenation) {
  std::vector<PacketRecord> a{{120, 3}, {80, 2}}, b{{100, 2}, {60, 3}};
  EXPECT_EQ(concat_samples(a).x_con, (std::vector<std::int64_t>{40, 40, 40, 40, 40}));
  EXPECT_EQ(concat_samples(b).x_con, (std::vector<std::int64_t>{50, 50, 20, 20, 20}));
  EXPECT_TRUE(concat_samples({}).x_con.empty());
}

TEST(Capacity, NonOverlappingRuns) {
  std::vector<std::int64_t> x{40, 40, 40, 40, 40};
  auto s = build_capacity_samples(x, 2, 2);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], (std::vector<double>{80, 80}));
  std::vector<std::int64_t> y{50, 50, 20, 20, 20};
  EXPECT_EQ(build_capacity_samples(y, 3, 3)[0], (std::vector<double>{120}));
}

TEST(Capacity, InsufficientSamples) {
  std::vector<std::int64_t> x{40};
  EXPECT_EQ(code_of([&] { build_capacity_samples(x, 2, 4); }), errc::insufficient_samples);
  EXPECT_TRUE(build_capacity_samples_truncated(x, 2, 4).empty());
  std::vector<std::int64_t> y(5, 10);
  // runs of 2..5 exist, 6 does not
  EXPECT_EQ(build_capacity_samples_truncated(y, 2, 10).size(), 4u);
}

TEST(Capacity, SampleCountAndSumProperty) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::int64_t> v(1, 300);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::int64_t> x(static_cast<std::size_t>(v(rng)));
    for (auto& e : x) e = v(rng);
    for (int n_set = 1; n_set <= 12; ++n_set) {
      auto s = capacity_samples_for(x, n_set);
      ASSERT_EQ(s.size(), x.size() / n_set);
      double want = std::accumulate(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(s.size() * n_set), 0.0);
      EXPECT_DOUBLE_EQ(std::accumulate(s.begin(), s.end(), 0.0), want);
    }
  }
}
