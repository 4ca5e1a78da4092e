#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rbguard/domain.hpp"
#include "rbguard/error.hpp"
#include "rbguard/near_rt.hpp"
#include "rbguard/rb_estimator.hpp"
#include "rbguard/rt_ctl.hpp"
#include "rbguard/trace_io.hpp"

namespace rbguard {

enum class SimMode { full, ref1_edf_only, ref2_dedicated_snc, ref3_snc_rt_no_mitigation };

constexpr std::string_view to_string(SimMode m) {
  switch (m) {
    case SimMode::full: return "full";
    case SimMode::ref1_edf_only: return "ref1_edf_only";
    case SimMode::ref2_dedicated_snc: return "ref2_dedicated_snc";
    case SimMode::ref3_snc_rt_no_mitigation: return "ref3_snc_rt_no_mitigation";
  }
  return "?";
}

inline SimMode parse_mode(std::string_view s) {
  for (auto m : {SimMode::full, SimMode::ref1_edf_only, SimMode::ref2_dedicated_snc,
                 SimMode::ref3_snc_rt_no_mitigation})
    if (s == to_string(m)) return m;
  throw error(errc::config, "unknown mode '" + std::string(s) + "'");
}

struct SimRun {
  SimMode mode = SimMode::full;
  CellConfig cell;
  std::vector<ServiceSpec> specs;
  std::int64_t horizon = 0;
  std::uint64_t seed = 1;
  // Estimator for the guaranteed-RB controller; null means pessimistic.
  // ref2 always uses the pessimistic one.
  std::shared_ptr<const RbEstimator> estimator;
  RtParams rt{};
  snc::Algorithm1Options alg1{};
  // Keep the equal split forever instead of calling the near-RT controller.
  bool freeze_allocation = false;
  // Streams to use instead of generating them from the specs.
  std::vector<ServiceStream> streams;
};

struct DelayRecord {
  int service_id = 0;
  std::int64_t arrival_tti = 0;
  std::int64_t completion_tti = 0;
  double delay_s = 0;
  double excess_norm = 0;

  bool operator==(const DelayRecord&) const = default;
};

struct AllocationEvent {
  std::int64_t tti = 0;
  std::vector<int> n_min;
  std::vector<double> w;
  double objective = 0;
  int iterations = 0;
  bool infeasible = false;
};

struct SimResult {
  SimMode mode = SimMode::full;
  std::vector<DelayRecord> records;
  std::vector<double> violation;
  // Services that completed no packet; their violation is reported as 0.
  std::vector<bool> no_records;
  std::vector<AllocationEvent> allocations;
  // Total RBs granted per TTI.
  std::vector<int> utilization;
  std::vector<ServiceTelemetry> telemetry;
  // Per-TTI grants and near-RT guarantees, service-major: grants[m][tti].
  std::vector<std::vector<int>> grants;
  std::vector<std::vector<int>> n_min;
};

// Fraction of the service's records with delay above w_th. Returns nullopt
// when the service has no record.
inline std::optional<double> violation_probability(std::span<const DelayRecord> records, int service_id,
                                                   double w_th) {
  std::size_t n = 0, over = 0;
  for (const auto& r : records) {
    if (r.service_id != service_id) continue;
    ++n;
    if (r.delay_s > w_th) ++over;
  }
  if (n == 0) return std::nullopt;
  return static_cast<double>(over) / static_cast<double>(n);
}

// Right-continuous empirical CCDF of the normalized excess: (x, P[X > x]) at
// every distinct value, ascending.
inline std::vector<std::pair<double, double>> ccdf(std::span<const DelayRecord> records) {
  if (records.empty()) throw error(errc::empty_records, "ccdf of no records");
  std::vector<double> x;
  x.reserve(records.size());
  for (const auto& r : records) x.push_back(r.excess_norm);
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  std::vector<std::pair<double, double>> out;
  for (std::size_t i = 0; i < x.size();) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    out.emplace_back(x[i], static_cast<double>(x.size() - j) / n);
    i = j;
  }
  return out;
}

// P[X > x] from the step function returned by ccdf.
inline double ccdf_at(std::span<const std::pair<double, double>> c, double x) {
  auto it = std::upper_bound(c.begin(), c.end(), x, [](double v, const auto& p) { return v < p.first; });
  if (it == c.begin()) return 1.0;
  return std::prev(it)->second;
}

// One stream per service, each covering [0, horizon). Trace sources that
// share a file are grouped together; the group count is the largest group
// index referenced plus one.
inline std::vector<ServiceStream> build_streams(std::span<const ServiceSpec> specs, std::int64_t horizon,
                                                std::uint64_t seed) {
  std::vector<ServiceStream> out(specs.size());
  std::map<std::string, int> groups;
  for (const auto& s : specs)
    if (const auto* t = std::get_if<TraceSource>(&s.source)) groups[t->path] = std::max(groups[t->path], t->group + 1);
  std::map<std::string, std::vector<ServiceStream>> loaded;
  for (std::size_t m = 0; m < specs.size(); ++m) {
    const auto& s = specs[m];
    if (const auto* g = std::get_if<GeneratorParams>(&s.source)) {
      out[m] = gen_synthetic(*g, horizon, derive_seed(seed, static_cast<std::uint64_t>(m)), s.id);
      continue;
    }
    const auto& t = std::get<TraceSource>(s.source);
    auto it = loaded.find(t.path);
    if (it == loaded.end()) {
      auto recs = load_trace(t.path);
      it = loaded.emplace(t.path, group_ues(recs, groups[t.path], t.default_bits_per_rb)).first;
    }
    ServiceStream st = it->second[static_cast<std::size_t>(t.group)];
    st.service_id = s.id;
    st.n_ttis = horizon;
    std::erase_if(st.arrivals, [&](const Arrival& a) { return a.tti >= horizon; });
    out[m] = std::move(st);
  }
  return out;
}

class Simulator {
 public:
  explicit Simulator(SimRun run) : run_(std::move(run)) {
    validate_config(run_.cell, run_.specs);
    if (run_.horizon < static_cast<std::int64_t>(run_.cell.t_obs) + run_.cell.t_out)
      throw error(errc::config, "horizon must be >= t_obs + t_out");
    const std::size_t n = run_.specs.size();
    streams_ = run_.streams.empty() ? build_streams(run_.specs, run_.horizon, run_.seed) : run_.streams;
    if (streams_.size() != n) throw error(errc::config, "one stream per service required");
    for (auto& s : streams_) bits_.push_back(s.bits_per_tti());
    for (auto& b : bits_) b.resize(static_cast<std::size_t>(run_.horizon), 0);
    cursor_.assign(n, 0);
    queued_bits_.assign(n, 0);
    queues_.resize(n);
    transmitted_.resize(n);
    rt_ = make_rt_state(run_.cell, run_.specs, run_.rt);
    n_min_ = run_.mode == SimMode::ref1_edf_only ? std::vector<int>(n, 0)
                                                  : equal_split(run_.cell.n_cell_rb, static_cast<int>(n));
    res_.mode = run_.mode;
    res_.telemetry.resize(n);
    res_.grants.resize(n);
    res_.n_min.resize(n);
    if (run_.mode == SimMode::ref2_dedicated_snc || !run_.estimator)
      estimator_ = std::make_shared<PessimisticEstimator>();
    else
      estimator_ = run_.estimator;
  }

  std::int64_t tti() const { return tti_; }
  std::span<const ServiceQueue> queues() const { return queues_; }
  std::span<const int> n_min() const { return n_min_; }
  const SimResult& result() const { return res_; }
  std::span<const TransmittedPacket> transmitted(int m) const { return transmitted_[m]; }

  // Arrivals, optional near-RT decision, RT control, transmission, delay
  // recording.
  void step_tti() {
    const std::int64_t t = tti_;
    if (t >= run_.horizon) throw error(errc::config, "stepped past the horizon");
    const std::size_t n = run_.specs.size();
    for (std::size_t m = 0; m < n; ++m) {
      const auto& arr = streams_[m].arrivals;
      auto& c = cursor_[m];
      while (c < arr.size() && arr[c].tti < t) ++c;
      while (c < arr.size() && arr[c].tti == t) {
        const auto& a = arr[c++];
        queues_[m].push_back({static_cast<int>(m), a.size_bits, a.tti, a.size_bits, a.bits_per_rb, 0});
      }
      auto& tel = res_.telemetry[m];
      queued_bits_[m] += bits_[m][static_cast<std::size_t>(t)];
      tel.incoming_bits.push_back(bits_[m][static_cast<std::size_t>(t)]);
      tel.enqueued_bits.push_back(queued_bits_[m]);
      // Capped one past the cell: nothing downstream distinguishes more.
      tel.demand_rbs.push_back(static_cast<int>(demand_rbs(queues_[m], run_.cell.n_cell_rb)));
    }

    if (decision_due(t)) decide(t);

    RtTickOptions opt;
    switch (run_.mode) {
      case SimMode::full: break;
      case SimMode::ref1_edf_only:
      case SimMode::ref3_snc_rt_no_mitigation: opt.mitigation = false; break;
      case SimMode::ref2_dedicated_snc: opt.mitigation = false; opt.sharing = false; break;
    }
    auto tick = rt_tick(queues_, n_min_, rt_, run_.specs, run_.cell, t, opt);

    int total = 0;
    for (std::size_t m = 0; m < n; ++m) {
      transmit(static_cast<int>(m), tick.grants[m], t);
      res_.telemetry[m].granted_rbs.push_back(tick.grants[m]);
      res_.grants[m].push_back(tick.grants[m]);
      res_.n_min[m].push_back(n_min_[m]);
      total += tick.grants[m];
    }
    res_.utilization.push_back(total);
    ++tti_;
  }

  SimResult run() {
    while (tti_ < run_.horizon) step_tti();
    finish();
    return res_;
  }

  void finish() {
    const std::size_t n = run_.specs.size();
    res_.violation.assign(n, 0.0);
    res_.no_records.assign(n, false);
    for (std::size_t m = 0; m < n; ++m) {
      auto v = violation_probability(res_.records, static_cast<int>(m), run_.specs[m].w_th);
      res_.violation[m] = v.value_or(0.0);
      res_.no_records[m] = !v.has_value();
    }
  }

 private:
  bool decision_due(std::int64_t t) const {
    if (run_.mode == SimMode::ref1_edf_only || run_.freeze_allocation) return false;
    return t >= run_.cell.t_obs && (t - run_.cell.t_obs) % run_.cell.t_out == 0;
  }

  // Guaranteed-RB decision from the trailing t_obs TTIs [t - t_obs, t - 1].
  void decide(std::int64_t t) {
    const std::size_t n = run_.specs.size();
    const std::int64_t end = t - 1, t_obs = run_.cell.t_obs;
    NearRtInput in;
    in.cell = run_.cell;
    in.specs = run_.specs;
    in.alg1 = run_.alg1;
    for (std::size_t m = 0; m < n; ++m) {
      in.windows.push_back(window(bits_[m], transmitted_[m], static_cast<int>(m), end, t_obs));
      const auto& tel = res_.telemetry[m];
      const auto first = static_cast<std::ptrdiff_t>(t - t_obs), last = static_cast<std::ptrdiff_t>(t);
      ServiceTelemetry s;
      s.incoming_bits.assign(tel.incoming_bits.begin() + first, tel.incoming_bits.begin() + last);
      s.enqueued_bits.assign(tel.enqueued_bits.begin() + first, tel.enqueued_bits.begin() + last);
      s.demand_rbs.assign(tel.demand_rbs.begin() + first, tel.demand_rbs.begin() + last);
      s.granted_rbs.assign(tel.granted_rbs.begin() + first, tel.granted_rbs.begin() + last);
      in.telemetry.push_back(std::move(s));
    }
    AllocationEvent ev;
    ev.tti = t;
    try {
      auto a = allocate_guaranteed(in, *estimator_);
      n_min_ = a.n_min;
      ev.w = a.w;
      ev.objective = a.objective;
      ev.iterations = a.iterations;
    } catch (const error& e) {
      if (e.code() != errc::infeasible) throw;
      ev.infeasible = true;
    }
    ev.n_min = n_min_;
    res_.allocations.push_back(std::move(ev));
  }

  // Spends the grant on the service's packets in FIFO order.
  void transmit(int m, int grant, std::int64_t t) {
    auto& q = queues_[m];
    std::int64_t left = grant;
    while (left > 0 && !q.empty()) {
      auto& p = q.front();
      const std::int64_t use = std::min(left, p.rbs_needed());
      const std::int64_t sent = std::min(p.bits_remaining, use * p.bits_per_rb);
      p.bits_remaining -= sent;
      queued_bits_[m] -= sent;
      p.rbs_used += use;
      left -= use;
      if (p.bits_remaining > 0) break;
      const double delay = static_cast<double>(t - p.arrival_tti + 1) * run_.cell.t_slot;
      const double w_th = run_.specs[m].w_th;
      res_.records.push_back({m, p.arrival_tti, t, delay, (delay - w_th) / w_th});
      transmitted_[m].push_back({t, p.size_bits, p.rbs_used});
      q.pop_front();
    }
  }

  SimRun run_;
  std::shared_ptr<const RbEstimator> estimator_;
  std::vector<ServiceStream> streams_;
  std::vector<std::vector<std::int64_t>> bits_;
  std::vector<std::size_t> cursor_;
  std::vector<std::int64_t> queued_bits_;
  std::vector<ServiceQueue> queues_;
  std::vector<std::vector<TransmittedPacket>> transmitted_;
  RtState rt_;
  std::vector<int> n_min_;
  std::int64_t tti_ = 0;
  SimResult res_;
};

inline SimResult run(SimRun spec) { return Simulator(std::move(spec)).run(); }

// (1 - epsilon)-quantile of a service's delays: the smallest recorded w with
// P[delay > w] <= epsilon.
inline double delay_quantile(std::span<const DelayRecord> records, int service_id, double epsilon) {
  std::vector<double> d;
  for (const auto& r : records)
    if (r.service_id == service_id) d.push_back(r.delay_s);
  if (d.empty()) throw error(errc::empty_records, "no records for service " + std::to_string(service_id));
  std::sort(d.begin(), d.end());
  const auto n = d.size();
  const auto allowed = static_cast<std::size_t>(std::floor(epsilon * static_cast<double>(n)));
  return d[n - 1 - std::min(allowed, n - 1)];
}

struct ValidationPoint {
  int service_id = 0;
  int n_min = 0;
  double w_mod = 0;
  double w_sim = 0;
  // (w_mod - w_sim) / w_sim * 100
  double eps_r = 0;
  bool stable = true;
};

// Model bound from the first t_obs TTIs against the simulated delay quantile
// over the whole horizon, with the cell statically split and no sharing.
inline std::vector<ValidationPoint> validate_bounds(const CellConfig& cell, std::span<const ServiceSpec> specs,
                                                    std::int64_t horizon, std::uint64_t seed,
                                                    snc::Algorithm1Options alg1 = {}) {
  SimRun r;
  r.mode = SimMode::ref2_dedicated_snc;
  r.cell = cell;
  r.specs.assign(specs.begin(), specs.end());
  r.horizon = horizon;
  r.seed = seed;
  r.freeze_allocation = true;
  r.alg1 = alg1;
  Simulator sim(r);
  auto res = sim.run();

  NearRtInput in;
  in.cell = cell;
  in.specs = r.specs;
  in.alg1 = alg1;
  const std::size_t n = specs.size();
  for (std::size_t m = 0; m < n; ++m)
    in.windows.push_back(window(res.telemetry[m].incoming_bits, sim.transmitted(static_cast<int>(m)),
                                static_cast<int>(m), cell.t_obs - 1, cell.t_obs));
  PessimisticEstimator est;
  BoundEvaluator eval(in, est);
  const auto n_min = sim.n_min();

  std::vector<ValidationPoint> out;
  for (std::size_t m = 0; m < n; ++m) {
    ValidationPoint v;
    v.service_id = static_cast<int>(m);
    v.n_min = n_min[m];
    v.w_mod = eval.bound(n_min, v.service_id);
    v.stable = std::isfinite(v.w_mod);
    v.w_sim = delay_quantile(res.records, v.service_id, specs[m].epsilon);
    v.eps_r = (v.w_mod - v.w_sim) / v.w_sim * 100.0;
    out.push_back(v);
  }
  return out;
}

}  // namespace rbguard
