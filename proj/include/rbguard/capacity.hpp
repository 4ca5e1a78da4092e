#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "rbguard/error.hpp"
#include "rbguard/trace_io.hpp"

namespace rbguard {

struct ConcatenatedRbSamples {
  std::vector<std::int64_t> x_con;
};

// Bits carried by each RB of a packet: floor(size / rbs) clamped to >= 1.
inline std::vector<std::int64_t> per_packet_rb_vector(std::int64_t size_bits, std::int64_t rbs_used) {
  if (size_bits < 1 || rbs_used < 1) return {};
  return std::vector<std::int64_t>(static_cast<std::size_t>(rbs_used),
                                   std::max<std::int64_t>(1, size_bits / rbs_used));
}

inline ConcatenatedRbSamples concat_samples(std::span<const PacketRecord> packets) {
  ConcatenatedRbSamples out;
  for (const auto& p : packets) {
    auto v = per_packet_rb_vector(p.size_bits, p.rbs_used);
    out.x_con.insert(out.x_con.end(), v.begin(), v.end());
  }
  return out;
}

// Capacity of n + n_min RBs in one TTI: x_con cut into non-overlapping runs of
// n + n_min entries (trailing remainder dropped), one sample per run sum.
inline std::vector<double> capacity_samples_for(std::span<const std::int64_t> x_con, int n_set) {
  const std::size_t runs = n_set > 0 ? x_con.size() / static_cast<std::size_t>(n_set) : 0;
  std::vector<double> out(runs, 0.0);
  for (std::size_t i = 0; i < runs; ++i) {
    std::int64_t sum = 0;
    for (int k = 0; k < n_set; ++k) sum += x_con[i * n_set + k];
    out[i] = static_cast<double>(sum);
  }
  return out;
}

// Sample vectors for n = 0..n_cell_rb - n_min. Throws InsufficientSamples
// naming the first n with no complete run.
inline std::vector<std::vector<double>> build_capacity_samples(std::span<const std::int64_t> x_con, int n_min,
                                                               int n_cell_rb) {
  if (n_min < 1 || n_cell_rb < n_min) throw error(errc::config, "need 1 <= n_min <= n_cell_rb");
  std::vector<std::vector<double>> sets;
  for (int n = 0; n <= n_cell_rb - n_min; ++n) {
    auto s = capacity_samples_for(x_con, n + n_min);
    if (s.empty())
      throw error(errc::insufficient_samples, "no complete run of " + std::to_string(n + n_min) + " RBs (n=" +
                                                  std::to_string(n) + ")");
    sets.push_back(std::move(s));
  }
  return sets;
}

// Same as build_capacity_samples but stops at the largest n that still has a
// sample; returns an empty vector when even n = 0 has none.
inline std::vector<std::vector<double>> build_capacity_samples_truncated(std::span<const std::int64_t> x_con,
                                                                         int n_min, int n_cell_rb) {
  std::vector<std::vector<double>> sets;
  for (int n = 0; n <= n_cell_rb - n_min; ++n) {
    auto s = capacity_samples_for(x_con, n + n_min);
    if (s.empty()) break;
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace rbguard
