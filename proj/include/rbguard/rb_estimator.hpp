#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "rbguard/error.hpp"

namespace rbguard {

struct GaussianComponent {
  double weight = 1.0;
  double mean = 0.0;
  double stddev = 1.0;
};

// Mixture for one service.
using Gmm = std::vector<GaussianComponent>;

// One mixture per service.
using GmmParams = std::vector<Gmm>;

namespace detail {

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

// P[a < Z <= b] for standard normal Z, evaluated on the tail that keeps the
// difference well conditioned.
inline double normal_mass(double a, double b) {
  if (a >= 0) return normal_upper_tail(a) - normal_upper_tail(b);
  return normal_upper_tail(-b) - normal_upper_tail(-a);
}

}  // namespace detail

// pi_n = P[extra RBs = n]: mixture mass on [n-0.5, n+0.5], with (-inf, 0.5]
// for n = 0 and [n_add-0.5, inf) for n = n_add so the vector sums to one.
inline std::vector<double> region_probabilities(const Gmm& gmm, int n_add) {
  if (n_add < 0) n_add = 0;
  std::vector<double> pi(static_cast<std::size_t>(n_add) + 1, 0.0);
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (const auto& c : gmm) {
    for (int n = 0; n <= n_add; ++n) {
      const double lo = n == 0 ? -inf : (n - 0.5 - c.mean) / c.stddev;
      const double hi = n == n_add ? inf : (n + 0.5 - c.mean) / c.stddev;
      pi[n] += c.weight * detail::normal_mass(lo, hi);
    }
  }
  return pi;
}

// Frequency count over the conditioning history; entries above n_add fold
// into n_add. Empty history falls back to pi_0 = 1.
inline std::vector<double> empirical_pi(std::span<const int> history, int n_add) {
  if (n_add < 0) n_add = 0;
  std::vector<double> pi(static_cast<std::size_t>(n_add) + 1, 0.0);
  if (history.empty()) {
    pi[0] = 1.0;
    return pi;
  }
  for (int h : history) pi[std::clamp(h, 0, n_add)] += 1.0;
  for (auto& p : pi) p /= static_cast<double>(history.size());
  return pi;
}

inline std::vector<double> pessimistic_pi(int n_add) {
  std::vector<double> pi(static_cast<std::size_t>(std::max(n_add, 0)) + 1, 0.0);
  pi[0] = 1.0;
  return pi;
}

// Per-TTI scheduler history for one service, aligned with its arrival window.
struct ServiceTelemetry {
  std::vector<std::int64_t> incoming_bits;
  // Bits queued at the start of the TTI after arrivals.
  std::vector<std::int64_t> enqueued_bits;
  // RBs needed to drain the whole queue at the start of the TTI.
  std::vector<int> demand_rbs;
  std::vector<int> granted_rbs;
};

struct EstimatorInput {
  int n_cell_rb = 0;
  int t_out = 1;
  std::span<const ServiceTelemetry> telemetry;
};

// Extra RBs service m would have had available in TTI i under `candidate`:
// the cell minus its own guarantee minus what the other services consume of
// theirs. Only TTIs where m needed more than its guarantee are kept.
inline std::vector<int> extra_rb_history(const EstimatorInput& in, std::span<const int> candidate, int m) {
  std::vector<int> out;
  if (in.telemetry.empty()) return out;
  const auto& own = in.telemetry[m].demand_rbs;
  for (std::size_t i = 0; i < own.size(); ++i) {
    if (own[i] <= candidate[m]) continue;
    int used_by_others = 0;
    for (std::size_t k = 0; k < in.telemetry.size(); ++k) {
      if (static_cast<int>(k) == m) continue;
      const auto& d = in.telemetry[k].demand_rbs;
      if (i < d.size()) used_by_others += std::min(d[i], candidate[k]);
    }
    out.push_back(std::max(0, in.n_cell_rb - candidate[m] - used_by_others));
  }
  return out;
}

enum class EstimatorKind { pessimistic, empirical, mdn };

constexpr std::string_view to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::pessimistic: return "pessimistic";
    case EstimatorKind::empirical: return "empirical";
    case EstimatorKind::mdn: return "mdn";
  }
  return "?";
}

class RbEstimator {
 public:
  virtual ~RbEstimator() = default;
  virtual EstimatorKind kind() const = 0;
  // pi over n = 0..n_add for service m given a candidate guarantee vector.
  virtual std::vector<double> estimate(const EstimatorInput& in, std::span<const int> candidate, int m,
                                       int n_add) const = 0;
};

class PessimisticEstimator final : public RbEstimator {
 public:
  EstimatorKind kind() const override { return EstimatorKind::pessimistic; }
  std::vector<double> estimate(const EstimatorInput&, std::span<const int>, int, int n_add) const override {
    return pessimistic_pi(n_add);
  }
};

class EmpiricalEstimator final : public RbEstimator {
 public:
  EstimatorKind kind() const override { return EstimatorKind::empirical; }
  std::vector<double> estimate(const EstimatorInput& in, std::span<const int> candidate, int m,
                               int n_add) const override {
    auto h = extra_rb_history(in, candidate, m);
    return empirical_pi(h, n_add);
  }
};

}  // namespace rbguard
