#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <tuple>
#include <vector>

#include "rbguard/capacity.hpp"
#include "rbguard/domain.hpp"
#include "rbguard/error.hpp"
#include "rbguard/rb_estimator.hpp"
#include "rbguard/snc.hpp"
#include "rbguard/trace_io.hpp"

namespace rbguard {

struct Allocation {
  std::vector<int> n_min;
  std::vector<double> w;
  double objective = std::numeric_limits<double>::infinity();
  // Bound-pipeline evaluations (loop passes for the heuristic, enumerated
  // allocations for brute force).
  int iterations = 0;
  bool hit_iteration_cap = false;
  std::vector<double> committed_objectives;
};

// max_m w[m] / w_th[m]; an infinite bound gives an infinite ratio.
inline double objective_g(std::span<const double> w, std::span<const double> w_th) {
  double g = 0;
  for (std::size_t m = 0; m < w.size(); ++m) g = std::max(g, w[m] / w_th[m]);
  return g;
}

// Ordering used to decide whether a candidate improves: fewer services
// without a stable bound first, then the max ratio among the rest.
struct Score {
  int unstable = 0;
  double g = 0;

  friend bool operator<(const Score& a, const Score& b) {
    return a.unstable != b.unstable ? a.unstable < b.unstable : a.g < b.g;
  }
};

inline Score score_of(std::span<const double> w, std::span<const double> w_th) {
  Score s;
  for (std::size_t m = 0; m < w.size(); ++m) {
    if (std::isinf(w[m]))
      ++s.unstable;
    else
      s.g = std::max(s.g, w[m] / w_th[m]);
  }
  return s;
}

struct NearRtInput {
  CellConfig cell;
  std::vector<ServiceSpec> specs;
  std::vector<SampleWindow> windows;
  // Scheduler history aligned with the windows; may be empty for the
  // pessimistic estimator.
  std::vector<ServiceTelemetry> telemetry;
  snc::Algorithm1Options alg1{};
  int max_enumeration = 100000;
};

// Evaluates per-service delay bounds for a candidate allocation, memoizing on
// (service, guarantee, pi).
class BoundEvaluator {
 public:
  BoundEvaluator(const NearRtInput& in, const RbEstimator& est) : in_(in), est_(est) {
    const std::size_t n = in.specs.size();
    if (in.windows.size() != n) throw error(errc::config, "one sample window per service required");
    x_con_.resize(n);
    arrival_.resize(n);
    idle_.resize(n);
    for (std::size_t m = 0; m < n; ++m) {
      x_con_[m] = concat_samples(in.windows[m].packets).x_con;
      idle_[m] = std::all_of(in.windows[m].x_d.begin(), in.windows[m].x_d.end(), [](auto v) { return v == 0; });
    }
    for (const auto& s : in.specs) w_th_.push_back(s.w_th);
  }

  // Bound in seconds; +inf when no stable bound exists.
  double bound(std::span<const int> candidate, int m) {
    if (idle_[m]) return 0.0;
    const int n_min = candidate[m];
    const int n_cell = in_.cell.n_cell_rb;
    EstimatorInput ei{n_cell, in_.cell.t_out, in_.telemetry};
    auto pi = est_.estimate(ei, candidate, m, n_cell - n_min);
    auto key = std::make_tuple(m, n_min, pi);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    double w = compute(m, n_min, pi);
    cache_.emplace(std::move(key), w);
    return w;
  }

  std::vector<double> bounds(std::span<const int> candidate) {
    std::vector<double> w(candidate.size());
    for (std::size_t m = 0; m < candidate.size(); ++m) w[m] = bound(candidate, static_cast<int>(m));
    return w;
  }

  std::span<const double> w_th() const { return w_th_; }

 private:
  // Capacity sample sets for one (service, guarantee) and their per-region
  // log-MGFs at each theta step of the search, filled lazily.
  struct RegionCache {
    std::vector<std::vector<double>> sets;
    std::vector<std::vector<long double>> by_step;
  };

  RegionCache& regions(int m, int n_min) {
    auto [it, fresh] = regions_.try_emplace({m, n_min});
    if (fresh) it->second.sets = build_capacity_samples_truncated(x_con_[m], n_min, in_.cell.n_cell_rb);
    return it->second;
  }

  double compute(int m, int n_min, std::vector<double> pi) {
    auto& rc = regions(m, n_min);
    if (rc.sets.empty()) return std::numeric_limits<double>::infinity();
    pi.resize(rc.sets.size());
    double mass = std::accumulate(pi.begin(), pi.end(), 0.0);
    if (!(mass > 0)) {
      std::fill(pi.begin(), pi.end(), 0.0);
      pi[0] = 1.0;
    } else {
      for (auto& p : pi) p /= mass;
    }
    auto& arr = arrival_[m];
    const auto& x_d = in_.windows[m].x_d;
    auto arrival_lm = [&](double theta, int k) {
      if (static_cast<int>(arr.size()) < k) arr.resize(static_cast<std::size_t>(k), std::nanl(""));
      auto& v = arr[static_cast<std::size_t>(k - 1)];
      if (std::isnan(v)) v = snc::arrival_log_mgf(x_d, theta);
      return v;
    };
    auto service_lm = [&](double theta, int k) {
      if (static_cast<int>(rc.by_step.size()) < k) rc.by_step.resize(static_cast<std::size_t>(k));
      auto& region = rc.by_step[static_cast<std::size_t>(k - 1)];
      if (region.empty()) region.assign(rc.sets.size(), std::nanl(""));
      for (std::size_t n = 0; n < rc.sets.size(); ++n)
        if (pi[n] > 0 && std::isnan(region[n])) region[n] = snc::region_log_mgf(rc.sets[n], theta);
      return snc::mix_region_log_mgf(region, pi);
    };
    try {
      return snc::algorithm1_search(arrival_lm, service_lm, in_.specs[m].epsilon, in_.cell.t_slot, in_.alg1).w_bound;
    } catch (const error& e) {
      if (e.code() == errc::no_stable_bound) return std::numeric_limits<double>::infinity();
      throw;
    }
  }

  const NearRtInput& in_;
  const RbEstimator& est_;
  std::vector<std::vector<std::int64_t>> x_con_;
  std::vector<bool> idle_;
  std::vector<double> w_th_;
  std::vector<std::vector<long double>> arrival_;
  std::map<std::pair<int, int>, RegionCache> regions_;
  std::map<std::tuple<int, int, std::vector<double>>, double> cache_;
};

// floor(n_cell_rb / |M|) each, the remainder handed one RB at a time to the
// lowest service ids so the whole cell is assigned.
inline std::vector<int> equal_split(int n_cell_rb, int n_services) {
  std::vector<int> n(static_cast<std::size_t>(n_services), n_cell_rb / n_services);
  for (int i = 0; i < n_cell_rb % n_services; ++i) ++n[i];
  return n;
}

// Iterative descent on g: move one guaranteed RB from the service with the
// smallest ratio to the one with the largest while g improves.
inline Allocation allocate_guaranteed(const NearRtInput& in, const RbEstimator& est) {
  const int n_serv = static_cast<int>(in.specs.size());
  if (n_serv < 1) throw error(errc::config, "no services");
  if (in.cell.n_cell_rb < n_serv) throw error(errc::config, "n_cell_rb < number of services");
  BoundEvaluator eval(in, est);
  const auto w_th = eval.w_th();
  const int cap = in.cell.n_cell_rb * n_serv;

  Allocation best;
  Score best_score{};
  bool committed = false;
  std::vector<int> cand = equal_split(in.cell.n_cell_rb, n_serv);
  while (true) {
    if (best.iterations >= cap) {
      best.hit_iteration_cap = true;
      break;
    }
    ++best.iterations;
    auto w = eval.bounds(cand);
    Score sc = score_of(w, w_th);
    if (!committed && sc.unstable == n_serv) throw error(errc::infeasible, "no service has a stable bound");
    if (committed && !(sc < best_score)) break;
    committed = true;
    best_score = sc;
    best.n_min = cand;
    best.w = w;
    best.objective = objective_g(w, w_th);
    best.committed_objectives.push_back(best.objective);

    std::vector<int> order(static_cast<std::size_t>(n_serv));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> ratio(static_cast<std::size_t>(n_serv));
    for (int m = 0; m < n_serv; ++m) ratio[m] = w[m] / w_th[m];
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ratio[a] < ratio[b]; });
    // Highest ratio, lowest id among ties.
    int receiver = 0;
    for (int m = 1; m < n_serv; ++m)
      if (ratio[m] > ratio[receiver]) receiver = m;
    const int worst_donor = order.front();
    if (receiver == worst_donor) break;
    int donor = -1;
    for (int m : order) {
      if (m != receiver && cand[m] > 1) {
        donor = m;
        break;
      }
    }
    if (donor < 0) break;
    cand = best.n_min;
    ++cand[receiver];
    --cand[donor];
  }
  return best;
}

// C(n-1, k-1): compositions of n into k positive parts.
inline std::uint64_t composition_count(int n, int k) {
  if (k < 1 || n < k) return 0;
  std::uint64_t r = 1;
  const int top = n - 1, choose = std::min(k - 1, n - k);
  for (int i = 1; i <= choose; ++i) r = r * static_cast<std::uint64_t>(top - choose + i) / static_cast<std::uint64_t>(i);
  return r;
}

// Visits every allocation with sum n_cell_rb and parts >= 1 in lexicographic
// order.
template <typename F>
void for_each_composition(int n, int k, F&& visit) {
  std::vector<int> parts(static_cast<std::size_t>(k), 1);
  auto rec = [&](auto& self, int idx, int left) -> void {
    if (idx == k - 1) {
      parts[idx] = left;
      visit(std::span<const int>(parts));
      return;
    }
    for (int v = 1; v <= left - (k - 1 - idx); ++v) {
      parts[idx] = v;
      self(self, idx + 1, left - v);
    }
  };
  rec(rec, 0, n);
}

inline Allocation brute_force_allocate(const NearRtInput& in, const RbEstimator& est) {
  const int n_serv = static_cast<int>(in.specs.size());
  if (n_serv < 1) throw error(errc::config, "no services");
  const auto count = composition_count(in.cell.n_cell_rb, n_serv);
  if (count == 0) throw error(errc::config, "n_cell_rb < number of services");
  if (count > static_cast<std::uint64_t>(in.max_enumeration))
    throw error(errc::search_space_too_large, std::to_string(count) + " allocations exceed the cap of " +
                                                  std::to_string(in.max_enumeration));
  BoundEvaluator eval(in, est);
  const auto w_th = eval.w_th();
  Allocation best;
  Score best_score{};
  bool any = false;
  for_each_composition(in.cell.n_cell_rb, n_serv, [&](std::span<const int> cand) {
    ++best.iterations;
    auto w = eval.bounds(cand);
    Score sc = score_of(w, w_th);
    if (!any || sc < best_score) {
      any = true;
      best_score = sc;
      best.n_min.assign(cand.begin(), cand.end());
      best.w = std::move(w);
    }
  });
  best.objective = objective_g(best.w, w_th);
  if (best_score.unstable == n_serv) throw error(errc::infeasible, "no allocation yields a stable bound");
  return best;
}

}  // namespace rbguard
