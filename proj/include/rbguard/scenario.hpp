#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "rbguard/domain.hpp"
#include "rbguard/error.hpp"
#include "rbguard/mdn.hpp"
#include "rbguard/near_rt.hpp"
#include "rbguard/report.hpp"
#include "rbguard/simulator.hpp"
#include "rbguard/trace_io.hpp"

namespace rbguard {

enum class ScenarioKind { simulation, validation, complexity };

struct Scenario {
  std::string name;
  ScenarioKind kind = ScenarioKind::simulation;
  CellConfig cell;
  std::vector<ServiceSpec> services;
  std::vector<SimMode> modes{SimMode::full};
  std::int64_t horizon = 0;
  std::vector<std::uint64_t> seeds{1};
  // Axis name -> values. Allowed axes: n_cell_rb, t_obs, t_out, n_services,
  // horizon, seed.
  std::map<std::string, std::vector<double>> sweep;
  EstimatorKind estimator = EstimatorKind::empirical;
  std::string mdn_model;
  RtParams rt{};
  snc::Algorithm1Options alg1{};
  std::string output_dir;
  // > 0: also write an MDN training set per simulation, one row every
  // `dataset_stride` TTIs.
  int dataset_stride = 0;
};

namespace detail {

inline void allow_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw error(errc::config, where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) throw error(errc::config, where + ": unknown key '" + k + "'");
  }
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw error(errc::config, where + "." + key + ": wrong type");
  }
}

inline std::vector<WeightedValue> parse_table(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) throw error(errc::config, where + ": expected [[value, probability], ...]");
  std::vector<WeightedValue> t;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number())
      throw error(errc::config, where + ": entries are [integer value, probability]");
    t.push_back({e[0].get<std::int64_t>(), e[1].get<double>()});
  }
  return t;
}

inline GeneratorKind parse_generator_kind(const std::string& s) {
  if (s == "constant") return GeneratorKind::constant;
  if (s == "poisson_batch") return GeneratorKind::poisson_batch;
  if (s == "on_off") return GeneratorKind::on_off;
  throw error(errc::config, "unknown traffic kind '" + s + "'");
}

inline ServiceSpec parse_service(const nlohmann::json& j, int index, const std::filesystem::path& base) {
  const std::string where = "services[" + std::to_string(index) + "]";
  allow_keys(j, where, {"id", "w_th", "epsilon", "traffic", "trace"});
  ServiceSpec s;
  s.id = get_or<int>(j, "id", index, where);
  s.w_th = get_or<double>(j, "w_th", s.w_th, where);
  s.epsilon = get_or<double>(j, "epsilon", s.epsilon, where);
  if (j.contains("traffic") == j.contains("trace"))
    throw error(errc::config, where + ": exactly one of 'traffic' or 'trace'");
  if (j.contains("traffic")) {
    const auto& t = j.at("traffic");
    const std::string tw = where + ".traffic";
    allow_keys(t, tw, {"kind", "bits", "lambda", "lambda_off", "p_on", "p_off", "pkt_sizes", "channel"});
    GeneratorParams g;
    g.kind = parse_generator_kind(get_or<std::string>(t, "kind", "constant", tw));
    g.bits = get_or<std::int64_t>(t, "bits", g.bits, tw);
    g.lambda = get_or<double>(t, "lambda", g.lambda, tw);
    g.lambda_off = get_or<double>(t, "lambda_off", g.lambda_off, tw);
    g.p_on = get_or<double>(t, "p_on", g.p_on, tw);
    g.p_off = get_or<double>(t, "p_off", g.p_off, tw);
    if (t.contains("pkt_sizes")) g.pkt_sizes = parse_table(t.at("pkt_sizes"), tw + ".pkt_sizes");
    if (t.contains("channel")) g.channel = parse_table(t.at("channel"), tw + ".channel");
    s.source = g;
  } else {
    const auto& t = j.at("trace");
    const std::string tw = where + ".trace";
    allow_keys(t, tw, {"path", "group", "default_bits_per_rb"});
    TraceSource src;
    src.path = get_or<std::string>(t, "path", "", tw);
    if (src.path.empty()) throw error(errc::config, tw + ".path is required");
    std::filesystem::path p(src.path);
    if (p.is_relative()) p = base / p;
    if (!std::filesystem::is_regular_file(p)) throw error(errc::config, tw + ": no such file " + p.string());
    src.path = p.string();
    src.group = get_or<int>(t, "group", 0, tw);
    src.default_bits_per_rb = get_or<std::int64_t>(t, "default_bits_per_rb", src.default_bits_per_rb, tw);
    if (src.group < 0 || src.default_bits_per_rb < 1) throw error(errc::config, tw + ": bad group or default_bits_per_rb");
    s.source = src;
  }
  return s;
}

inline const std::set<std::string>& sweep_axes() {
  static const std::set<std::string> axes{"n_cell_rb", "t_obs", "t_out", "n_services", "horizon", "seed"};
  return axes;
}

}  // namespace detail

inline ScenarioKind parse_kind(const std::string& s) {
  if (s == "simulation") return ScenarioKind::simulation;
  if (s == "validation") return ScenarioKind::validation;
  if (s == "complexity") return ScenarioKind::complexity;
  throw error(errc::config, "unknown scenario kind '" + s + "'");
}

// Relative trace and model paths resolve against `base`.
inline Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base = ".") {
  using detail::get_or;
  const std::string w = "scenario";
  detail::allow_keys(j, w,
                     {"name", "kind", "cell", "horizon", "seeds", "modes", "estimator", "rt", "alg1", "services",
                      "sweep", "output_dir", "mdn_dataset"});
  Scenario s;
  s.name = get_or<std::string>(j, "name", "", w);
  if (s.name.empty()) throw error(errc::config, "scenario.name is required");
  s.kind = parse_kind(get_or<std::string>(j, "kind", "simulation", w));
  if (j.contains("cell")) {
    const auto& c = j.at("cell");
    detail::allow_keys(c, "cell", {"n_cell_rb", "t_slot", "t_out", "t_obs", "rng_seed"});
    s.cell.n_cell_rb = get_or<int>(c, "n_cell_rb", s.cell.n_cell_rb, "cell");
    s.cell.t_slot = get_or<double>(c, "t_slot", s.cell.t_slot, "cell");
    s.cell.t_out = get_or<int>(c, "t_out", s.cell.t_out, "cell");
    s.cell.t_obs = get_or<int>(c, "t_obs", s.cell.t_obs, "cell");
    s.cell.rng_seed = get_or<std::uint64_t>(c, "rng_seed", s.cell.rng_seed, "cell");
  }
  s.horizon = get_or<std::int64_t>(j, "horizon", static_cast<std::int64_t>(s.cell.t_obs) + 10 * s.cell.t_out, w);
  if (j.contains("seeds")) {
    s.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {}, w);
    if (s.seeds.empty()) throw error(errc::config, "scenario.seeds must not be empty");
  } else {
    s.seeds = {s.cell.rng_seed};
  }
  if (j.contains("modes")) {
    s.modes.clear();
    for (const auto& m : get_or<std::vector<std::string>>(j, "modes", {}, w)) s.modes.push_back(parse_mode(m));
    if (s.modes.empty()) throw error(errc::config, "scenario.modes must not be empty");
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    detail::allow_keys(e, "estimator", {"kind", "model"});
    const auto k = get_or<std::string>(e, "kind", "empirical", "estimator");
    if (k == "pessimistic") s.estimator = EstimatorKind::pessimistic;
    else if (k == "empirical") s.estimator = EstimatorKind::empirical;
    else if (k == "mdn") s.estimator = EstimatorKind::mdn;
    else throw error(errc::config, "unknown estimator '" + k + "'");
    if (s.estimator == EstimatorKind::mdn) {
      std::filesystem::path p(get_or<std::string>(e, "model", "", "estimator"));
      if (p.empty()) throw error(errc::config, "estimator.model is required for mdn");
      if (p.is_relative()) p = base / p;
      if (!std::filesystem::is_regular_file(p)) throw error(errc::config, "estimator.model: no such file " + p.string());
      s.mdn_model = p.string();
    }
  }
  if (j.contains("rt")) {
    detail::allow_keys(j.at("rt"), "rt", {"eta", "tau"});
    s.rt.eta = get_or<double>(j.at("rt"), "eta", s.rt.eta, "rt");
    s.rt.tau = get_or<double>(j.at("rt"), "tau", s.rt.tau, "rt");
  }
  if (j.contains("alg1")) {
    detail::allow_keys(j.at("alg1"), "alg1", {"delta_shrink", "theta_min"});
    s.alg1.delta_shrink = get_or<double>(j.at("alg1"), "delta_shrink", s.alg1.delta_shrink, "alg1");
    s.alg1.theta_min = get_or<double>(j.at("alg1"), "theta_min", s.alg1.theta_min, "alg1");
  }
  if (!j.contains("services") || !j.at("services").is_array() || j.at("services").empty())
    throw error(errc::config, "scenario.services must be a nonempty array");
  int i = 0;
  for (const auto& sj : j.at("services")) s.services.push_back(detail::parse_service(sj, i++, base));
  if (j.contains("sweep")) {
    const auto& sw = j.at("sweep");
    if (!sw.is_object() || sw.empty()) throw error(errc::config, "scenario.sweep has no axes");
    for (const auto& [k, v] : sw.items()) {
      if (!detail::sweep_axes().count(k)) throw error(errc::config, "sweep: unknown axis '" + k + "'");
      if (!v.is_array() || v.empty()) throw error(errc::config, "sweep." + k + " must be a nonempty array");
      for (const auto& x : v) {
        if (!x.is_number()) throw error(errc::config, "sweep." + k + ": numbers only");
        s.sweep[k].push_back(x.get<double>());
      }
    }
  }
  s.output_dir = get_or<std::string>(j, "output_dir", s.name, w);
  if (j.contains("mdn_dataset")) {
    detail::allow_keys(j.at("mdn_dataset"), "mdn_dataset", {"stride"});
    s.dataset_stride = get_or<int>(j.at("mdn_dataset"), "stride", 10, "mdn_dataset");
    if (s.dataset_stride < 1) throw error(errc::config, "mdn_dataset.stride must be >= 1");
  }
  return s;
}

// Built-in scaled-down experiments.
inline const std::map<std::string, std::string>& preset_sources() {
  static const std::map<std::string, std::string> presets{
      {"validate_snc", R"({
  "name": "validate_snc",
  "kind": "validation",
  "cell": {"n_cell_rb": 60, "t_slot": 0.001, "t_out": 1000, "t_obs": 4000},
  "horizon": 200000,
  "seeds": [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20],
  "sweep": {"t_obs": [1000, 2000, 3000, 4000, 5000, 6000]},
  "services": [
    {"w_th": 0.005, "epsilon": 0.001, "traffic": {"kind": "on_off", "lambda": 3.8, "lambda_off": 2.2, "p_on": 0.001, "p_off": 0.002,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}},
    {"w_th": 0.005, "epsilon": 0.001, "traffic": {"kind": "on_off", "lambda": 3.8, "lambda_off": 2.2, "p_on": 0.001, "p_off": 0.002,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}},
    {"w_th": 0.005, "epsilon": 0.001, "traffic": {"kind": "on_off", "lambda": 3.8, "lambda_off": 2.2, "p_on": 0.001, "p_off": 0.002,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}}
  ]
})"},
      {"complexity", R"({
  "name": "complexity",
  "kind": "complexity",
  "cell": {"n_cell_rb": 60, "t_slot": 0.001, "t_out": 1000, "t_obs": 4000},
  "seeds": [1, 2, 3],
  "sweep": {"n_cell_rb": [20, 30, 60], "n_services": [2, 3]},
  "services": [
    {"w_th": 0.003, "epsilon": 0.001, "traffic": {"kind": "poisson_batch", "lambda": 1.0,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}},
    {"w_th": 0.010, "epsilon": 0.001, "traffic": {"kind": "poisson_batch", "lambda": 1.5,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}},
    {"w_th": 0.020, "epsilon": 0.01, "traffic": {"kind": "poisson_batch", "lambda": 1.0,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}}
  ]
})"},
      {"endtoend_compare", R"({
  "name": "endtoend_compare",
  "kind": "simulation",
  "cell": {"n_cell_rb": 60, "t_slot": 0.001, "t_out": 1000, "t_obs": 4000},
  "horizon": 30000,
  "seeds": [1],
  "modes": ["full", "ref1_edf_only", "ref2_dedicated_snc", "ref3_snc_rt_no_mitigation"],
  "estimator": {"kind": "pessimistic"},
  "rt": {"eta": 0.75, "tau": 0.3},
  "services": [
    {"w_th": 0.003, "epsilon": 0.001, "traffic": {"kind": "on_off", "lambda": 4, "lambda_off": 1, "p_on": 0.01, "p_off": 0.02,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}},
    {"w_th": 0.010, "epsilon": 0.001, "traffic": {"kind": "on_off", "lambda": 6, "lambda_off": 1, "p_on": 0.005, "p_off": 0.005,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}},
    {"w_th": 0.020, "epsilon": 0.01, "traffic": {"kind": "on_off", "lambda": 5, "lambda_off": 1, "p_on": 0.002, "p_off": 0.002,
      "pkt_sizes": [[200, 0.3], [400, 0.4], [800, 0.3]], "channel": [[80, 0.3333333333333333], [120, 0.3333333333333333], [160, 0.3333333333333334]]}}
  ]
})"}};
  return presets;
}

inline nlohmann::json preset_json(const std::string& name) {
  auto it = preset_sources().find(name);
  if (it == preset_sources().end()) throw error(errc::config, "unknown preset '" + name + "'");
  return nlohmann::json::parse(it->second);
}

inline Scenario preset(const std::string& name) { return parse_scenario(preset_json(name)); }

// A file path, or a preset name when no such file exists.
inline Scenario load_scenario(const std::string& path_or_preset) {
  std::filesystem::path p(path_or_preset);
  if (!std::filesystem::exists(p)) {
    if (preset_sources().count(path_or_preset)) return preset(path_or_preset);
    throw error(errc::config, "no scenario file or preset named '" + path_or_preset + "'");
  }
  std::ifstream in(p);
  if (!in) throw error(errc::io, "cannot open " + p.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw error(errc::parse, p.string() + ": " + e.what());
  }
  return parse_scenario(j, p.parent_path().empty() ? std::filesystem::path(".") : p.parent_path());
}

struct SweepPoint {
  std::string tag;
  std::map<std::string, double> axes;
  CellConfig cell;
  std::vector<ServiceSpec> services;
  std::int64_t horizon = 0;
  std::uint64_t seed = 1;
};

// Cartesian product of the sweep axes and the seed list, in axis-name order
// with the seed varying fastest. Every point is validated up front.
inline std::vector<SweepPoint> expand(const Scenario& s) {
  std::map<std::string, std::vector<double>> axes = s.sweep;
  if (!axes.count("seed")) {
    auto& v = axes["seed"];
    for (auto x : s.seeds) v.push_back(static_cast<double>(x));
  }
  std::vector<std::string> names;
  for (const auto& [k, v] : axes)
    if (k != "seed") names.push_back(k);
  names.push_back("seed");

  std::vector<SweepPoint> out;
  std::vector<std::size_t> idx(names.size(), 0);
  while (true) {
    SweepPoint p;
    p.cell = s.cell;
    p.services = s.services;
    p.horizon = s.horizon;
    std::string tag;
    for (std::size_t a = 0; a < names.size(); ++a) {
      const double v = axes[names[a]][idx[a]];
      p.axes[names[a]] = v;
      const auto iv = static_cast<std::int64_t>(std::llround(v));
      if (std::abs(v - static_cast<double>(iv)) > 1e-9) throw error(errc::config, "sweep." + names[a] + ": integers only");
      tag += (tag.empty() ? "" : "_") + names[a] + std::to_string(iv);
      if (names[a] == "n_cell_rb") p.cell.n_cell_rb = static_cast<int>(iv);
      else if (names[a] == "t_obs") p.cell.t_obs = static_cast<int>(iv);
      else if (names[a] == "t_out") p.cell.t_out = static_cast<int>(iv);
      else if (names[a] == "horizon") p.horizon = iv;
      else if (names[a] == "seed") p.seed = static_cast<std::uint64_t>(iv);
      else if (names[a] == "n_services") {
        if (iv < 1 || iv > static_cast<std::int64_t>(s.services.size()))
          throw error(errc::config, "sweep.n_services out of range");
        p.services.resize(static_cast<std::size_t>(iv));
      }
    }
    p.tag = tag;
    validate_config(p.cell, p.services);
    if (s.kind == ScenarioKind::simulation && p.horizon < static_cast<std::int64_t>(p.cell.t_obs) + p.cell.t_out)
      throw error(errc::config, p.tag + ": horizon must be >= t_obs + t_out");
    if (s.kind == ScenarioKind::validation && p.horizon < p.cell.t_obs)
      throw error(errc::config, p.tag + ": horizon must be >= t_obs");
    out.push_back(std::move(p));
    std::size_t a = names.size();
    while (a > 0) {
      --a;
      if (++idx[a] < axes[names[a]].size()) break;
      idx[a] = 0;
      if (a == 0) return out;
    }
    if (names.empty()) return out;
  }
}

inline std::shared_ptr<const RbEstimator> make_estimator(const Scenario& s) {
  switch (s.estimator) {
    case EstimatorKind::pessimistic: return std::make_shared<PessimisticEstimator>();
    case EstimatorKind::empirical: return std::make_shared<EmpiricalEstimator>();
    case EstimatorKind::mdn: {
      std::ifstream in(s.mdn_model);
      if (!in) throw error(errc::io, "cannot open " + s.mdn_model);
      return std::make_shared<mdn::MdnEstimator>(mdn::load_model(in));
    }
  }
  return nullptr;
}

struct ExperimentOptions {
  int jobs = 1;
  // Adds wall-clock runtimes to the JSON outputs (which then stop being
  // byte-stable).
  bool timing = false;
};

// Runs `n` independent jobs on up to `jobs` threads; the first exception is
// rethrown after all threads stop.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& body) {
  const auto workers = static_cast<std::size_t>(std::clamp<int>(jobs, 1, 64));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      while (true) {
        const std::size_t i = next++;
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!err) err = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

struct SimulationOutcome {
  SweepPoint point;
  SimMode mode = SimMode::full;
  SimResult result;
  double runtime_s = 0;
};

struct ValidationRow {
  SweepPoint point;
  ValidationPoint v;
};

struct ComplexityRow {
  SweepPoint point;
  Allocation alg2;
  Allocation brute;
  std::uint64_t enumeration = 0;
  double gap_pct = 0;
  double alg2_s = 0;
  double brute_s = 0;
};

struct ExperimentResult {
  std::vector<SimulationOutcome> simulations;
  std::vector<ValidationRow> validation;
  std::vector<ComplexityRow> complexity;
  std::vector<std::filesystem::path> files;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Greedy allocation against exhaustive search on windows taken from nominal
// transmissions of the point's traffic (no scheduler history, so the
// pessimistic estimator).
inline ComplexityRow complexity_point(const SweepPoint& p, const snc::Algorithm1Options& alg1) {
  ComplexityRow row;
  row.point = p;
  auto streams = build_streams(p.services, p.cell.t_obs, p.seed);
  NearRtInput in;
  in.cell = p.cell;
  in.specs = p.services;
  in.alg1 = alg1;
  for (const auto& st : streams) {
    auto tx = nominal_transmissions(st);
    in.windows.push_back(window(st, tx, p.cell.t_obs - 1, p.cell.t_obs));
  }
  PessimisticEstimator est;
  auto t0 = std::chrono::steady_clock::now();
  row.alg2 = allocate_guaranteed(in, est);
  row.alg2_s = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  row.brute = brute_force_allocate(in, est);
  row.brute_s = seconds_since(t0);
  row.enumeration = composition_count(p.cell.n_cell_rb, static_cast<int>(p.services.size()));
  row.gap_pct = (row.alg2.objective - row.brute.objective) / row.brute.objective * 100.0;
  return row;
}

inline ExperimentResult run_experiment(const Scenario& s, const std::filesystem::path& out_dir,
                                       ExperimentOptions opt = {}) {
  const auto points = expand(s);
  ExperimentResult res;
  auto emit = [&](const std::filesystem::path& name, const std::string& content) {
    write_file(out_dir / name, content);
    res.files.push_back(out_dir / name);
  };

  if (s.kind == ScenarioKind::simulation) {
    auto est = make_estimator(s);
    std::vector<SimulationOutcome> outs(points.size() * s.modes.size());
    parallel_for(outs.size(), opt.jobs, [&](std::size_t i) {
      const auto& p = points[i / s.modes.size()];
      SimRun r;
      r.mode = s.modes[i % s.modes.size()];
      r.cell = p.cell;
      r.specs = p.services;
      r.horizon = p.horizon;
      r.seed = p.seed;
      r.estimator = est;
      r.rt = s.rt;
      r.alg1 = s.alg1;
      auto t0 = std::chrono::steady_clock::now();
      outs[i].result = run(r);
      outs[i].runtime_s = seconds_since(t0);
      outs[i].point = p;
      outs[i].mode = r.mode;
    });
    for (auto& o : outs) {
      const std::string stem = o.point.tag + "_" + std::string(to_string(o.mode));
      std::ostringstream csv;
      write_records_csv(csv, o.result.records);
      emit(stem + ".csv", csv.str());
      auto j = summary_json(o.result, o.point.services);
      j["scenario"] = s.name;
      j["point"] = o.point.axes;
      j["horizon"] = o.point.horizon;
      j["seed"] = o.point.seed;
      j["estimator"] = std::string(to_string(o.mode == SimMode::ref2_dedicated_snc ? EstimatorKind::pessimistic
                                                                                   : s.estimator));
      if (opt.timing) j["runtime_s"] = o.runtime_s;
      emit(stem + ".json", dump(j));
      if (s.dataset_stride > 0) {
        auto rows = mdn::mdn_dataset(o.result.telemetry, o.result.n_min, o.point.cell.n_cell_rb,
                                     o.point.cell.t_out, s.dataset_stride);
        std::ostringstream ds;
        mdn::write_dataset(ds, rows);
        emit(stem + "_mdn.csv", ds.str());
      }
    }
    res.simulations = std::move(outs);
  } else if (s.kind == ScenarioKind::validation) {
    std::vector<std::vector<ValidationPoint>> per(points.size());
    parallel_for(points.size(), opt.jobs, [&](std::size_t i) {
      per[i] = validate_bounds(points[i].cell, points[i].services, points[i].horizon, points[i].seed, s.alg1);
    });
    std::ostringstream csv;
    csv << "t_obs,seed,service_id,n_min,w_mod,w_sim,eps_r\n";
    std::map<int, std::vector<double>> by_tobs;
    for (std::size_t i = 0; i < points.size(); ++i)
      for (const auto& v : per[i]) {
        csv << points[i].cell.t_obs << ',' << points[i].seed << ',' << v.service_id << ',' << v.n_min << ','
            << format9(v.w_mod) << ',' << format9(v.w_sim) << ',' << format9(v.eps_r) << '\n';
        by_tobs[points[i].cell.t_obs].push_back(v.eps_r);
        res.validation.push_back({points[i], v});
      }
    emit("validation.csv", csv.str());
    json summary = json::object();
    for (const auto& [t, e] : by_tobs) {
      std::size_t cons = 0;
      double sum = 0, lo = INFINITY;
      for (double x : e) {
        cons += x >= 0;
        sum += x;
        lo = std::min(lo, x);
      }
      summary[std::to_string(t)] = {{"runs", e.size()},
                                    {"conservative_fraction", num9(static_cast<double>(cons) / e.size())},
                                    {"mean_eps_r", num9(sum / static_cast<double>(e.size()))},
                                    {"min_eps_r", num9(lo)}};
    }
    emit("validation.json", dump({{"scenario", s.name}, {"by_t_obs", summary}}));
  } else {
    std::vector<ComplexityRow> rows(points.size());
    parallel_for(points.size(), opt.jobs, [&](std::size_t i) { rows[i] = complexity_point(points[i], s.alg1); });
    std::ostringstream csv;
    csv << "n_cell_rb,n_services,seed,alg2_objective,brute_objective,gap_pct,alg2_iterations,enumeration";
    csv << (opt.timing ? ",alg2_s,brute_s\n" : "\n");
    json arr = json::array();
    for (const auto& r : rows) {
      csv << r.point.cell.n_cell_rb << ',' << r.point.services.size() << ',' << r.point.seed << ','
          << format9(r.alg2.objective) << ',' << format9(r.brute.objective) << ',' << format9(r.gap_pct) << ','
          << r.alg2.iterations << ',' << r.enumeration;
      if (opt.timing) csv << ',' << format9(r.alg2_s) << ',' << format9(r.brute_s);
      csv << '\n';
      arr.push_back({{"tag", r.point.tag},
                     {"alg2_n_min", r.alg2.n_min},
                     {"brute_n_min", r.brute.n_min},
                     {"alg2_objective", num9(r.alg2.objective)},
                     {"brute_objective", num9(r.brute.objective)},
                     {"gap_pct", num9(r.gap_pct)},
                     {"alg2_iterations", r.alg2.iterations},
                     {"enumeration", r.enumeration}});
    }
    emit("complexity.csv", csv.str());
    emit("complexity.json", dump({{"scenario", s.name}, {"points", arr}}));
    res.complexity = std::move(rows);
  }
  return res;
}

}  // namespace rbguard
