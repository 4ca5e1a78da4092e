#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ranges>
#include <span>
#include <vector>

#include "rbguard/error.hpp"

namespace rbguard::snc {

// Capacity samples per number of extra RBs n in [0, n_add] together with the
// probability pi[n] that exactly n extra RBs are available.
struct ServiceSampleSet {
  std::vector<std::vector<double>> sets;
  std::vector<double> pi;

  std::size_t n_add() const { return sets.empty() ? 0 : sets.size() - 1; }
};

struct EnvelopeSolution {
  double theta = 0;
  double delta = 0;
  double rho_a = 0;
  double rho_s = 0;
  double w_bound = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

namespace detail {

// log(sum_i exp(scale * x_i)), accumulated in long double.
template <std::ranges::input_range R>
long double log_sum_exp(const R& xs, long double scale) {
  long double mx = -std::numeric_limits<long double>::infinity();
  for (auto x : xs) mx = std::max(mx, scale * static_cast<long double>(x));
  if (!std::isfinite(mx)) return mx;
  long double acc = 0;
  // Shifted terms lie in (0, 1]; double exp is enough for them.
  for (auto x : xs) acc += std::exp(static_cast<double>(scale * static_cast<long double>(x) - mx));
  return mx + std::log(acc);
}

inline long double log_add(long double a, long double b) {
  if (a == -std::numeric_limits<long double>::infinity()) return b;
  if (b == -std::numeric_limits<long double>::infinity()) return a;
  long double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace detail

// ln( mean_i exp(theta * d_i) ), the per-TTI arrival cumulant.
template <std::ranges::sized_range R>
long double arrival_log_mgf(const R& x_d, double theta) {
  if (std::ranges::size(x_d) == 0) throw error(errc::empty_sample_set, "empty arrival samples");
  return detail::log_sum_exp(x_d, theta) - std::log(static_cast<long double>(std::ranges::size(x_d)));
}

// ln( mean_i exp(-theta * c_i) ) over one region's capacity samples.
template <std::ranges::sized_range R>
long double region_log_mgf(const R& c, double theta) {
  if (std::ranges::size(c) == 0) return -std::numeric_limits<long double>::infinity();
  return detail::log_sum_exp(c, -static_cast<long double>(theta)) - std::log(static_cast<long double>(std::ranges::size(c)));
}

// ln( sum_n pi_n exp(region[n]) ) where region[n] is region_log_mgf of set n.
// A weighted region without samples shows up as -inf and is an error.
inline long double mix_region_log_mgf(std::span<const long double> region, std::span<const double> pi) {
  if (region.size() != pi.size()) throw error(errc::empty_sample_set, "sets and pi differ in length");
  long double acc = -std::numeric_limits<long double>::infinity();
  bool any = false;
  for (std::size_t n = 0; n < region.size(); ++n) {
    if (!(pi[n] > 0)) continue;
    if (region[n] == -std::numeric_limits<long double>::infinity())
      throw error(errc::empty_sample_set, "region " + std::to_string(n) + " has weight but no samples");
    acc = detail::log_add(acc, std::log(static_cast<long double>(pi[n])) + region[n]);
    any = true;
  }
  if (!any) throw error(errc::empty_sample_set, "no weighted capacity samples");
  return acc;
}

// ln( sum_n pi_n / T_n * sum_i exp(-theta * c_{n,i}) ), the per-TTI log of the
// negative capacity MGF.
inline long double service_log_mgf(const ServiceSampleSet& s, double theta) {
  if (s.sets.size() != s.pi.size()) throw error(errc::empty_sample_set, "sets and pi differ in length");
  std::vector<long double> region(s.sets.size(), -std::numeric_limits<long double>::infinity());
  for (std::size_t n = 0; n < s.sets.size(); ++n)
    if (s.pi[n] > 0) region[n] = region_log_mgf(s.sets[n], theta);
  return mix_region_log_mgf(region, s.pi);
}

template <std::ranges::sized_range R>
double arrival_rate_param(const R& x_d, double theta, double t_slot) {
  long double v = arrival_log_mgf(x_d, theta) / (static_cast<long double>(theta) * t_slot);
  if (!std::isfinite(static_cast<double>(v))) throw error(errc::numeric_overflow, "rho_a not representable");
  return static_cast<double>(v);
}

inline double service_rate_param(const ServiceSampleSet& s, double theta, double t_slot) {
  long double v = -service_log_mgf(s, theta) / (static_cast<long double>(theta) * t_slot);
  if (!std::isfinite(static_cast<double>(v))) throw error(errc::numeric_overflow, "rho_s not representable");
  return static_cast<double>(v);
}

// Delay bound W(theta, delta) in seconds given the already-evaluated log-MGF
// of the capacity process; +inf marks an infeasible point.
inline double delay_bound_from_log_mgf(long double log_mgf_c, double theta, double delta, double epsilon,
                                       double t_slot) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  long double den = log_mgf_c + static_cast<long double>(delta) * theta * t_slot;
  if (!(den < 0)) return inf;
  long double td = static_cast<long double>(theta) * delta;
  if (!(td > 0)) return inf;
  long double num = 2.0L * t_slot * (std::log(static_cast<long double>(epsilon) / 2) + std::log(-std::expm1(-td)));
  double w = static_cast<double>(num / den);
  return std::isfinite(w) && w > 0 ? w : inf;
}

inline double delay_bound_objective(double theta, double delta, const ServiceSampleSet& s, double epsilon,
                                    double t_slot) {
  return delay_bound_from_log_mgf(service_log_mgf(s, theta), theta, delta, epsilon, t_slot);
}

struct Algorithm1Options {
  double delta_shrink = 0.9;
  double theta_min = 1e-8;
};

// Shrinks theta geometrically from 1 and keeps the (theta, delta) pair while
// theta * delta keeps improving, with delta on the feasibility boundary
// (rho_s - rho_a) / 2. The log-MGFs come in as callables of (theta, k) where
// theta = delta_shrink^k, so callers may cache per step.
template <typename ArrivalLm, typename ServiceLm>
EnvelopeSolution algorithm1_search(ArrivalLm&& arrival_lm, ServiceLm&& service_lm, double epsilon, double t_slot,
                                   Algorithm1Options opt = {}) {
  if (!(opt.delta_shrink > 0 && opt.delta_shrink < 1))
    throw error(errc::config, "delta_shrink must lie in (0,1)");
  if (!(opt.theta_min > 0)) throw error(errc::config, "theta_min must be > 0");
  EnvelopeSolution best;
  bool found = false;
  double y = 0;
  double theta = 1.0;
  int it = 0;
  while (true) {
    theta *= opt.delta_shrink;
    ++it;
    if (theta < opt.theta_min) break;
    const long double lma = arrival_lm(theta, it);
    const double rho_a = static_cast<double>(lma / (static_cast<long double>(theta) * t_slot));
    if (!std::isfinite(rho_a)) throw error(errc::numeric_overflow, "rho_a not representable");
    const long double lmc = service_lm(theta, it);
    const double rho_s = static_cast<double>(-lmc / (static_cast<long double>(theta) * t_slot));
    if (!(rho_s > rho_a)) continue;
    const double delta = (rho_s - rho_a) / 2;
    const double y_z = theta * delta;
    if (y_z > y) {
      y = y_z;
      best = {theta, delta, rho_a, rho_s, delay_bound_from_log_mgf(lmc, theta, delta, epsilon, t_slot), it};
      found = true;
    } else {
      break;
    }
  }
  if (!found) throw error(errc::no_stable_bound, "rho_s <= rho_a for every probed theta");
  best.iterations = it;
  return best;
}

template <std::ranges::sized_range R>
EnvelopeSolution algorithm1_delay_bound(const R& x_d, const ServiceSampleSet& s, double epsilon, double t_slot,
                                        Algorithm1Options opt = {}) {
  return algorithm1_search([&](double theta, int) { return arrival_log_mgf(x_d, theta); },
                           [&](double theta, int) { return service_log_mgf(s, theta); }, epsilon, t_slot, opt);
}

struct GridSpec {
  int n_theta = 200;
  int n_delta = 200;
  double theta_lo = 1e-6;
  double theta_hi = 1.0;

  // Refinement that contains every point of the coarser grid.
  GridSpec refined() const { return {2 * n_theta - 1, 2 * n_delta, theta_lo, theta_hi}; }
};

// Exhaustive minimum of the delay-bound objective over a log-spaced theta grid
// and, per theta, the delta grid {k/n_delta * (rho_s - rho_a)/2 : k=1..n_delta}.
template <std::ranges::sized_range R>
double grid_oracle_delay_bound(const R& x_d, const ServiceSampleSet& s, double epsilon, double t_slot,
                               GridSpec grid = {}) {
  double best = std::numeric_limits<double>::infinity();
  const double lo = std::log(grid.theta_lo), hi = std::log(grid.theta_hi);
  for (int i = 0; i < grid.n_theta; ++i) {
    const double theta =
        grid.n_theta == 1 ? grid.theta_hi : std::exp(lo + (hi - lo) * i / static_cast<double>(grid.n_theta - 1));
    const long double lma = arrival_log_mgf(x_d, theta);
    const long double lmc = service_log_mgf(s, theta);
    const double rho_a = static_cast<double>(lma / (static_cast<long double>(theta) * t_slot));
    const double rho_s = static_cast<double>(-lmc / (static_cast<long double>(theta) * t_slot));
    if (!(rho_s > rho_a)) continue;
    const double half_gap = (rho_s - rho_a) / 2;
    for (int k = 1; k <= grid.n_delta; ++k) {
      const double delta = half_gap * k / grid.n_delta;
      best = std::min(best, delay_bound_from_log_mgf(lmc, theta, delta, epsilon, t_slot));
    }
  }
  return best;
}

}  // namespace rbguard::snc
