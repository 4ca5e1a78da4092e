#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rbguard/report.hpp"
#include "rbguard/scenario.hpp"

using namespace rbguard;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json small_sim() {
  return json::parse(R"({
    "name": "small",
    "cell": {"n_cell_rb": 12, "t_out": 200, "t_obs": 400},
    "horizon": 900,
    "seeds": [1, 2],
    "modes": ["full", "ref2_dedicated_snc"],
    "estimator": {"kind": "pessimistic"},
    "services": [
      {"w_th": 0.005, "traffic": {"kind": "poisson_batch", "lambda": 1.5, "pkt_sizes": [[300, 1.0]], "channel": [[100, 1.0]]}},
      {"w_th": 0.010, "traffic": {"kind": "poisson_batch", "lambda": 1.0, "pkt_sizes": [[300, 1.0]], "channel": [[100, 1.0]]}}
    ]
  })");
}

errc code_of(const json& j) {
  try {
    parse_scenario(j);
  } catch (const error& e) {
    return e.code();
  }
  ADD_FAILURE() << "parsed fine";
  return errc::io;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  auto p = fs::path(testing::TempDir()) / ("rbguard_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Scenario, PresetsParse) {
  for (const auto& [name, src] : preset_sources()) {
    auto s = preset(name);
    EXPECT_EQ(s.name, name);
    EXPECT_FALSE(expand(s).empty());
  }
  EXPECT_EQ(preset("complexity").kind, ScenarioKind::complexity);
  EXPECT_EQ(preset("validate_snc").kind, ScenarioKind::validation);
  EXPECT_EQ(preset("endtoend_compare").modes.size(), 4u);
}

TEST(Scenario, Defaults) {
  auto j = small_sim();
  j.erase("estimator");
  j.erase("modes");
  auto s = parse_scenario(j);
  EXPECT_EQ(s.estimator, EstimatorKind::empirical);
  EXPECT_EQ(s.rt.eta, 0.75);
  EXPECT_EQ(s.rt.tau, 0.3);
  EXPECT_EQ(s.output_dir, "small");
  EXPECT_EQ(s.services[1].id, 1);
}

TEST(Scenario, EmptySweepIsConfigError) {
  auto j = small_sim();
  j["sweep"] = json::object();
  EXPECT_EQ(code_of(j), errc::config);
  j["sweep"] = {{"t_obs", json::array()}};
  EXPECT_EQ(code_of(j), errc::config);
  j["sweep"] = {{"colour", {1, 2}}};
  EXPECT_EQ(code_of(j), errc::config);
}

TEST(Scenario, StrictKeys) {
  auto j = small_sim();
  j["cel"] = json::object();
  EXPECT_EQ(code_of(j), errc::config);
  j = small_sim();
  j["services"][0]["traffic"]["lamda"] = 2;
  EXPECT_EQ(code_of(j), errc::config);
  j = small_sim();
  j["modes"] = {"fullest"};
  EXPECT_EQ(code_of(j), errc::config);
}

TEST(Scenario, MissingTraceFile) {
  auto j = small_sim();
  j["services"][0].erase("traffic");
  j["services"][0]["trace"] = {{"path", "/definitely/not/here.csv"}};
  EXPECT_EQ(code_of(j), errc::config);
}

TEST(Scenario, TraceSourcesResolveAgainstBase) {
  auto dir = scratch("trace");
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "t.csv");
    out << "tti,ue_id,bits,rbs\n";
    for (int t = 0; t < 700; ++t) out << t << ",1,300,3\n" << t << ",2,100,1\n";
  }
  auto j = small_sim();
  for (int m = 0; m < 2; ++m) {
    j["services"][m].erase("traffic");
    j["services"][m]["trace"] = {{"path", "t.csv"}, {"group", m}};
  }
  auto s = parse_scenario(j, dir);
  auto streams = build_streams(s.services, 650, 1);
  ASSERT_EQ(streams.size(), 2u);
  EXPECT_EQ(streams[0].arrivals.size(), 650u);
  EXPECT_EQ(streams[0].arrivals[0].size_bits, 300);
  EXPECT_EQ(streams[1].arrivals[0].size_bits, 100);
}

TEST(Scenario, ExpandProduct) {
  auto j = small_sim();
  j["sweep"] = {{"n_cell_rb", {10, 20}}, {"t_obs", {400, 600}}};
  j["horizon"] = 1000;
  auto pts = expand(parse_scenario(j));
  ASSERT_EQ(pts.size(), 8u);
  EXPECT_EQ(pts[0].tag, "n_cell_rb10_t_obs400_seed1");
  EXPECT_EQ(pts[1].tag, "n_cell_rb10_t_obs400_seed2");
  EXPECT_EQ(pts[7].tag, "n_cell_rb20_t_obs600_seed2");
  EXPECT_EQ(pts[7].cell.t_obs, 600);
  EXPECT_EQ(pts[7].cell.n_cell_rb, 20);
}

TEST(Scenario, ExpandValidatesPoints) {
  auto j = small_sim();
  j["sweep"] = {{"n_cell_rb", {1}}};
  EXPECT_THROW(expand(parse_scenario(j)), error);
  j["sweep"] = {{"t_obs", {2000}}};
  EXPECT_THROW(expand(parse_scenario(j)), error);
}

TEST(Report, NineDigits) {
  EXPECT_EQ(format9(1.0 / 3), "0.333333333");
  EXPECT_EQ(format9(123456789012.0), "1.23456789e+11");
  EXPECT_EQ(format9(INFINITY), "inf");
  EXPECT_TRUE(num9(NAN).is_null());
}

TEST(Experiment, SimulationOutputsAreByteStable) {
  auto s = parse_scenario(small_sim());
  auto a = scratch("sim_a"), b = scratch("sim_b");
  auto ra = run_experiment(s, a, {2, false});
  auto rb = run_experiment(s, b, {1, false});
  ASSERT_EQ(ra.files.size(), 8u);
  for (std::size_t i = 0; i < ra.files.size(); ++i) {
    EXPECT_EQ(ra.files[i].filename(), rb.files[i].filename());
    EXPECT_EQ(slurp(ra.files[i]), slurp(rb.files[i])) << ra.files[i];
  }
}

TEST(Experiment, SummaryAndCsvShape) {
  auto s = parse_scenario(small_sim());
  auto dir = scratch("sim_shape");
  auto r = run_experiment(s, dir, {1, false});
  for (const auto& o : r.simulations) {
    const std::string stem = o.point.tag + "_" + std::string(to_string(o.mode));
    auto csv = slurp(dir / (stem + ".csv"));
    const auto lines = static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
    EXPECT_EQ(lines, o.result.records.size() + 1);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), records_header);
    auto j = json::parse(slurp(dir / (stem + ".json")));
    ASSERT_TRUE(j["violation_probability"].is_object());
    EXPECT_TRUE(j["violation_probability"].contains("0"));
    EXPECT_TRUE(j["violation_probability"].contains("1"));
    EXPECT_EQ(j["packets"].get<std::size_t>(), o.result.records.size());
    EXPECT_FALSE(j.contains("runtime_s"));
  }
}

TEST(Experiment, TimingIsOptIn) {
  auto j = small_sim();
  j["seeds"] = {1};
  j["modes"] = {"full"};
  auto dir = scratch("sim_timing");
  auto r = run_experiment(parse_scenario(j), dir, {1, true});
  auto out = json::parse(slurp(dir / "seed1_full.json"));
  EXPECT_TRUE(out.contains("runtime_s"));
}

TEST(Experiment, DatasetExport) {
  auto j = small_sim();
  j["seeds"] = {1};
  j["modes"] = {"full"};
  j["mdn_dataset"] = {{"stride", 50}};
  auto dir = scratch("sim_ds");
  run_experiment(parse_scenario(j), dir, {1, false});
  std::ifstream in(dir / "seed1_full_mdn.csv");
  auto rows = mdn::read_dataset(in);
  EXPECT_EQ(rows.size(), 14u);  // TTIs 200, 250, ..., 850
  EXPECT_EQ(rows[0].features.size(), 16u);
}

TEST(Experiment, ComplexityRecordsEnumeration) {
  auto j = preset_json("complexity");
  j["sweep"] = {{"n_cell_rb", {60}}, {"n_services", {3}}};
  j["seeds"] = {1};
  auto dir = scratch("cx");
  auto r = run_experiment(parse_scenario(j), dir, {1, false});
  ASSERT_EQ(r.complexity.size(), 1u);
  EXPECT_EQ(r.complexity[0].enumeration, 1711u);
  EXPECT_EQ(r.complexity[0].brute.iterations, 1711);
  EXPECT_LE(r.complexity[0].brute.objective, r.complexity[0].alg2.objective);
  auto csv = slurp(dir / "complexity.csv");
  EXPECT_NE(csv.find(",1711\n"), std::string::npos);
}
