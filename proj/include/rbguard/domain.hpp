#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "rbguard/error.hpp"

namespace rbguard {

// Units: rates in bits/s, delays in seconds, queue ages in TTIs.

struct CellConfig {
  int n_cell_rb = 60;
  double t_slot = 1e-3;
  int t_out = 1000;
  int t_obs = 4000;
  std::uint64_t rng_seed = 1;

  bool operator==(const CellConfig&) const = default;
};

// Discrete distribution entry, used for packet sizes and per-packet
// bits-per-RB (the synthetic channel model).
struct WeightedValue {
  std::int64_t value = 0;
  double probability = 0.0;

  bool operator==(const WeightedValue&) const = default;
};

enum class GeneratorKind { constant, poisson_batch, on_off };

struct GeneratorParams {
  GeneratorKind kind = GeneratorKind::constant;
  // constant: `bits` per TTI, cut into packets of pkt_sizes.front().value bits.
  std::int64_t bits = 0;
  // poisson_batch: packets/TTI; on_off: packets/TTI in the ON state.
  double lambda = 0.0;
  // on_off only: packets/TTI in the OFF state and the two switching
  // probabilities per TTI (OFF->ON, ON->OFF). The chain starts OFF.
  double lambda_off = 0.0;
  double p_on = 0.0;
  double p_off = 1.0;
  std::vector<WeightedValue> pkt_sizes{{100, 1.0}};
  std::vector<WeightedValue> channel{{100, 1.0}};

  bool operator==(const GeneratorParams&) const = default;
};

struct TraceSource {
  std::string path;
  // Position among the UE groups produced from the trace.
  int group = 0;
  // bits-per-RB for records whose rbs column is 0.
  std::int64_t default_bits_per_rb = 100;

  bool operator==(const TraceSource&) const = default;
};

using TrafficSource = std::variant<GeneratorParams, TraceSource>;

struct ServiceSpec {
  int id = 0;
  double w_th = 0.005;
  double epsilon = 1e-3;
  TrafficSource source = GeneratorParams{};

  bool operator==(const ServiceSpec&) const = default;
};

struct Packet {
  int service_id = 0;
  std::int64_t size_bits = 0;
  std::int64_t arrival_tti = 0;
  std::int64_t bits_remaining = 0;
  std::int64_t bits_per_rb = 1;
  // RBs spent on this packet so far.
  std::int64_t rbs_used = 0;

  std::int64_t rbs_needed() const {
    return (bits_remaining + bits_per_rb - 1) / bits_per_rb;
  }
};

struct ValidatedConfig {
  CellConfig cell;
  std::vector<ServiceSpec> services;

  bool operator==(const ValidatedConfig&) const = default;
};

namespace detail {
inline void require(bool ok, const std::string& what) {
  if (!ok) throw error(errc::config, what);
}
}  // namespace detail

inline void validate_cell(const CellConfig& cell) {
  using detail::require;
  require(cell.n_cell_rb >= 1, "n_cell_rb >= 1");
  require(cell.t_slot > 0 && std::isfinite(cell.t_slot), "t_slot > 0");
  require(cell.t_out >= 1, "t_out >= 1");
  require(cell.t_obs >= 1, "t_obs >= 1");
  require(cell.t_obs >= cell.t_out, "t_obs >= t_out");
}

inline void validate_generator(const GeneratorParams& g) {
  auto table_ok = [](const std::vector<WeightedValue>& t) {
    if (t.empty()) return false;
    double sum = 0;
    for (const auto& e : t) {
      if (e.value < 1 || !(e.probability >= 0)) return false;
      sum += e.probability;
    }
    return std::abs(sum - 1.0) < 1e-9;
  };
  auto fail = [](const char* what) { throw error(errc::bad_generator_params, what); };
  if (!table_ok(g.pkt_sizes)) fail("pkt_sizes must be a probability table over sizes >= 1");
  if (!table_ok(g.channel)) fail("channel must be a probability table over bits_per_rb >= 1");
  switch (g.kind) {
    case GeneratorKind::constant:
      if (g.bits < 0) fail("constant bits must be >= 0");
      break;
    case GeneratorKind::poisson_batch:
      if (!(g.lambda >= 0) || !std::isfinite(g.lambda)) fail("lambda must be >= 0");
      break;
    case GeneratorKind::on_off:
      if (!(g.lambda >= 0) || !(g.lambda_off >= 0)) fail("rates must be >= 0");
      if (!(g.p_on >= 0 && g.p_on <= 1) || !(g.p_off >= 0 && g.p_off <= 1))
        fail("switching probabilities must lie in [0,1]");
      break;
  }
}

inline ValidatedConfig validate_config(const CellConfig& cell, const std::vector<ServiceSpec>& services) {
  using detail::require;
  validate_cell(cell);
  require(!services.empty(), "at least one service");
  require(cell.n_cell_rb >= static_cast<int>(services.size()),
          "n_cell_rb >= number of services (equal-split initializer needs one RB each)");
  for (std::size_t i = 0; i < services.size(); ++i) {
    const auto& s = services[i];
    const auto tag = "service " + std::to_string(s.id) + ": ";
    require(s.id == static_cast<int>(i), tag + "ids must be dense and ordered from 0");
    require(s.epsilon > 0 && s.epsilon < 1, tag + "0 < epsilon < 1");
    require(s.w_th >= cell.t_slot, tag + "w_th >= t_slot");
    if (const auto* g = std::get_if<GeneratorParams>(&s.source)) {
      try {
        validate_generator(*g);
      } catch (const error& e) {
        throw error(errc::config, tag + e.what());
      }
    }
  }
  return ValidatedConfig{cell, services};
}

inline ValidatedConfig validate_config(const ValidatedConfig& cfg) {
  return validate_config(cfg.cell, cfg.services);
}

}  // namespace rbguard
