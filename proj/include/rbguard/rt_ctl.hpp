#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "rbguard/domain.hpp"
#include "rbguard/error.hpp"

namespace rbguard {

enum class FsmState : std::uint8_t { A, B, C };

// Per-service RT control state.
struct RtEntry {
  FsmState fsm = FsmState::A;
  int n_req = 0;
  int n_min_i = 0;
  std::int64_t q = 0;
  std::int64_t q_u = 0;
  std::int64_t q_l = 0;
  int n_cap = 0;  // upper bound on n_req (the cell size)
};

struct RtParams {
  double eta = 0.75;
  double tau = 0.3;
};

// Q_T = floor(w_th / t_slot); the upper and lower thresholds scale it by eta
// and tau. Requires q_u > q_l.
inline RtEntry make_rt_entry(double w_th, double t_slot, int n_cell_rb, RtParams p = {}) {
  if (!(p.eta > 0 && p.eta <= 1) || !(p.tau > 0 && p.tau <= 1))
    throw error(errc::config, "eta and tau must lie in (0,1]");
  const auto q_t = static_cast<std::int64_t>(std::floor(w_th / t_slot + 1e-9));
  RtEntry e;
  e.q_u = static_cast<std::int64_t>(std::floor(p.eta * static_cast<double>(q_t) + 1e-9));
  e.q_l = static_cast<std::int64_t>(std::floor(p.tau * static_cast<double>(q_t) + 1e-9));
  e.n_cap = n_cell_rb;
  if (!(e.q_u > e.q_l))
    throw error(errc::config, "thresholds collapse: q_u=" + std::to_string(e.q_u) + " q_l=" + std::to_string(e.q_l));
  return e;
}

struct RtState {
  std::vector<RtEntry> entries;
};

inline RtState make_rt_state(const CellConfig& cell, std::span<const ServiceSpec> specs, RtParams p = {}) {
  RtState s;
  for (const auto& spec : specs) s.entries.push_back(make_rt_entry(spec.w_th, cell.t_slot, cell.n_cell_rb, p));
  return s;
}

// q is the head-of-line age in TTIs; an empty queue forces state A.
inline RtEntry fsm_step(RtEntry e, std::int64_t q, bool queue_empty = false) {
  e.q = queue_empty ? 0 : q;
  if (queue_empty || e.q < e.q_l) {
    e.fsm = FsmState::A;
    e.n_req = 0;
  } else if (e.q >= e.q_u) {
    e.fsm = FsmState::B;
    e.n_req = std::min(e.n_req + 1, e.n_cap);
  } else if (e.fsm == FsmState::A) {
    e.n_req = 0;
  } else {
    e.fsm = FsmState::C;
  }
  return e;
}

// Moves sum(n_req of borrowers) single RBs from services in A to services in
// B or C, cycling round-robin over both lists. A donor down to one RB leaves
// the donor list; the loop ends early once no donor is left.
inline std::vector<int> mitigate(std::span<const RtEntry> states, std::span<const int> n_min) {
  std::vector<int> out(n_min.begin(), n_min.end());
  std::vector<int> donors, borrowers;
  int n_ite = 0;
  for (std::size_t m = 0; m < states.size(); ++m) {
    if (states[m].fsm == FsmState::A) {
      donors.push_back(static_cast<int>(m));
    } else {
      borrowers.push_back(static_cast<int>(m));
      n_ite += states[m].n_req;
    }
  }
  if (donors.empty() || borrowers.empty()) return out;
  std::size_t jd = 0, jb = 0;
  int done = 0;
  while (done < n_ite && !donors.empty()) {
    if (jd >= donors.size()) jd = 0;
    const int d = donors[jd];
    if (out[d] <= 1) {
      donors.erase(donors.begin() + static_cast<std::ptrdiff_t>(jd));
      continue;
    }
    const int b = borrowers[jb];
    --out[d];
    ++out[b];
    ++done;
    jd = (jd + 1) % donors.size();
    jb = (jb + 1) % borrowers.size();
  }
  return out;
}

using ServiceQueue = std::deque<Packet>;

// RBs needed to drain the queue, counting stops once `cap` is exceeded.
inline std::int64_t demand_rbs(const ServiceQueue& q,
                               std::int64_t cap = std::numeric_limits<std::int64_t>::max()) {
  std::int64_t d = 0;
  for (const auto& p : q) {
    d += p.rbs_needed();
    if (d > cap) break;
  }
  return d;
}

struct PendingPacket {
  std::int64_t arrival_tti = 0;
  std::int64_t rbs_needed = 0;
};

// Remaining packets of one service, FIFO order.
struct EdfBacklog {
  int service_id = 0;
  double w_th = 0;
  std::vector<PendingPacket> packets;
};

struct EdfGrant {
  int service_id = 0;
  std::int64_t arrival_tti = 0;
  std::int64_t rbs = 0;
  double deadline = 0;
};

struct EdfResult {
  // Indexed like the backlog span.
  std::vector<int> grants;
  std::vector<EdfGrant> log;
};

// Grants free RBs packet by packet to the head packet with the earliest
// absolute deadline arrival_tti * t_slot + w_th (ties: lower service id).
inline EdfResult edf_allocate_free(int free_rbs, std::span<const EdfBacklog> backlog, double t_slot) {
  EdfResult r;
  r.grants.assign(backlog.size(), 0);
  std::vector<std::size_t> cursor(backlog.size(), 0);
  std::vector<std::int64_t> head_left(backlog.size(), 0);
  for (std::size_t s = 0; s < backlog.size(); ++s)
    if (!backlog[s].packets.empty()) head_left[s] = backlog[s].packets[0].rbs_needed;
  while (free_rbs > 0) {
    int pick = -1;
    double best = 0;
    for (std::size_t s = 0; s < backlog.size(); ++s) {
      if (cursor[s] >= backlog[s].packets.size()) continue;
      const double dl = static_cast<double>(backlog[s].packets[cursor[s]].arrival_tti) * t_slot + backlog[s].w_th;
      if (pick < 0 || dl < best ||
          (dl == best && backlog[s].service_id < backlog[static_cast<std::size_t>(pick)].service_id)) {
        pick = static_cast<int>(s);
        best = dl;
      }
    }
    if (pick < 0) break;
    auto& left = head_left[pick];
    const auto take = static_cast<int>(std::min<std::int64_t>(left, free_rbs));
    if (take > 0) {
      r.grants[pick] += take;
      free_rbs -= take;
      r.log.push_back({backlog[pick].service_id, backlog[pick].packets[cursor[pick]].arrival_tti, take, best});
    }
    left -= take;
    if (left <= 0) {
      ++cursor[pick];
      if (cursor[pick] < backlog[pick].packets.size()) left = backlog[pick].packets[cursor[pick]].rbs_needed;
    }
  }
  return r;
}

struct RtTickOptions {
  bool mitigation = true;
  bool sharing = true;
};

struct RtTickResult {
  std::vector<int> grants;
  std::vector<int> guaranteed;  // RBs granted in the guaranteed phase
  std::vector<int> n_min_i;
  int free_rbs = 0;
};

// Per-TTI control: head-of-line ages, FSM update, mitigation, the guaranteed
// phase, then EDF over the RBs nobody used.
inline RtTickResult rt_tick(std::span<const ServiceQueue> queues, std::span<const int> n_min, RtState& state,
                            std::span<const ServiceSpec> specs, const CellConfig& cell, std::int64_t tti,
                            RtTickOptions opt = {}) {
  const std::size_t n = queues.size();
  RtTickResult r;
  for (std::size_t m = 0; m < n; ++m) {
    const bool empty = queues[m].empty();
    const std::int64_t q = empty ? 0 : tti - queues[m].front().arrival_tti;
    state.entries[m] = fsm_step(state.entries[m], q, empty);
  }
  r.n_min_i = opt.mitigation ? mitigate(state.entries, n_min) : std::vector<int>(n_min.begin(), n_min.end());
  for (std::size_t m = 0; m < n; ++m) state.entries[m].n_min_i = r.n_min_i[m];

  r.guaranteed.assign(n, 0);
  int used = 0;
  std::vector<EdfBacklog> backlog;
  for (std::size_t m = 0; m < n; ++m) {
    const std::int64_t demand = demand_rbs(queues[m], cell.n_cell_rb);
    r.guaranteed[m] = static_cast<int>(std::min<std::int64_t>(demand, r.n_min_i[m]));
    used += r.guaranteed[m];
    if (!opt.sharing || demand <= r.guaranteed[m]) continue;
    // What is left after the guaranteed phase drains packets FIFO.
    EdfBacklog b{static_cast<int>(m), specs[m].w_th, {}};
    std::int64_t g = r.guaranteed[m];
    // Packets beyond a cell's worth of RBs can never be reached this TTI.
    std::int64_t listed = 0;
    for (const auto& p : queues[m]) {
      if (listed > cell.n_cell_rb) break;
      std::int64_t need = p.rbs_needed();
      const std::int64_t take = std::min(need, g);
      g -= take;
      need -= take;
      if (need > 0) {
        b.packets.push_back({p.arrival_tti, need});
        listed += need;
      }
    }
    backlog.push_back(std::move(b));
  }
  r.free_rbs = cell.n_cell_rb - used;
  r.grants = r.guaranteed;
  if (opt.sharing && r.free_rbs > 0 && !backlog.empty()) {
    auto edf = edf_allocate_free(r.free_rbs, backlog, cell.t_slot);
    for (std::size_t i = 0; i < backlog.size(); ++i) r.grants[backlog[i].service_id] += edf.grants[i];
  }
  return r;
}

}  // namespace rbguard
