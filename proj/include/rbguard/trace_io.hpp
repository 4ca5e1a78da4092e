#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rbguard/domain.hpp"
#include "rbguard/error.hpp"

namespace rbguard {

struct TraceRecord {
  std::int64_t tti = 0;
  std::int64_t ue_id = 0;
  std::int64_t bits = 0;
  std::int64_t rbs = 0;

  bool operator==(const TraceRecord&) const = default;
};

// One packet entering a service queue.
struct Arrival {
  std::int64_t tti = 0;
  std::int64_t size_bits = 0;
  std::int64_t bits_per_rb = 1;

  bool operator==(const Arrival&) const = default;
};

// Packet arrivals for one service over [0, n_ttis), sorted by tti.
struct ServiceStream {
  int service_id = 0;
  std::int64_t n_ttis = 0;
  std::vector<Arrival> arrivals;

  std::vector<std::int64_t> bits_per_tti() const {
    std::vector<std::int64_t> x(static_cast<std::size_t>(n_ttis), 0);
    for (const auto& a : arrivals) x[static_cast<std::size_t>(a.tti)] += a.size_bits;
    return x;
  }

  bool operator==(const ServiceStream&) const = default;
};

// A packet whose last bit left the queue in completion_tti.
struct TransmittedPacket {
  std::int64_t completion_tti = 0;
  std::int64_t size_bits = 0;
  std::int64_t rbs_used = 0;

  bool operator==(const TransmittedPacket&) const = default;
};

struct PacketRecord {
  std::int64_t size_bits = 0;
  std::int64_t rbs_used = 0;

  bool operator==(const PacketRecord&) const = default;
};

struct SampleWindow {
  int service_id = 0;
  std::vector<std::int64_t> x_d;
  // Packets completed inside the window, in completion order.
  std::vector<PacketRecord> packets;

  bool operator==(const SampleWindow&) const = default;
};

inline constexpr std::string_view trace_header = "tti,ue_id,bits,rbs";

namespace detail {

inline bool parse_int(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && p == s.data() + s.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline std::vector<TraceRecord> parse_trace(std::istream& in) {
  std::vector<TraceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!saw_header) {
      if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
      if (line != trace_header)
        throw parse_error(line_no, "expected header '" + std::string(trace_header) + "'");
      saw_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto fields = detail::split(line, ',');
    if (fields.size() != 4) throw parse_error(line_no, "expected 4 fields");
    TraceRecord r;
    std::int64_t* dst[] = {&r.tti, &r.ue_id, &r.bits, &r.rbs};
    static constexpr const char* names[] = {"tti", "ue_id", "bits", "rbs"};
    for (int i = 0; i < 4; ++i) {
      if (!detail::parse_int(fields[i], *dst[i]))
        throw parse_error(line_no, std::string("non-numeric ") + names[i] + " field");
    }
    if (r.tti < 0 || r.bits < 0 || r.rbs < 0) throw parse_error(line_no, "negative value");
    records.push_back(r);
  }
  if (records.empty()) throw error(errc::empty_trace, "trace has no records");
  std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
    return a.tti != b.tti ? a.tti < b.tti : a.ue_id < b.ue_id;
  });
  return records;
}

inline std::vector<TraceRecord> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw error(errc::io, "cannot open " + path);
  return parse_trace(in);
}

inline void write_trace(std::ostream& out, std::span<const TraceRecord> records) {
  out << trace_header << '\n';
  for (const auto& r : records) out << r.tti << ',' << r.ue_id << ',' << r.bits << ',' << r.rbs << '\n';
}

// Converts a FALCON DCI log to trace records. Each non-comment line holds
// whitespace- or comma-separated columns
//   timestamp sfn subframe rnti direction mcs nof_prb tbs_sum [...]
// Only downlink rows (direction == 1) are kept; tti = 10*sfn + subframe with
// the 1024-frame wrap unrolled, then rebased so the first row is TTI 0.
// Rows hitting the same (tti, rnti) are merged.
inline std::vector<TraceRecord> convert_falcon(std::istream& in) {
  std::map<std::pair<std::int64_t, std::int64_t>, TraceRecord> merged;
  std::string line;
  std::size_t line_no = 0;
  std::int64_t wraps = 0, last_raw = -1, base = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::replace(line.begin(), line.end(), '\t', ' ');
    std::istringstream ss(line);
    std::vector<std::string> cols;
    for (std::string c; ss >> c;) cols.push_back(c);
    if (cols.size() < 8) throw parse_error(line_no, "expected at least 8 columns");
    std::int64_t sfn, sf, rnti, dir, prb, tbs;
    if (!detail::parse_int(cols[1], sfn) || !detail::parse_int(cols[2], sf) ||
        !detail::parse_int(cols[3], rnti) || !detail::parse_int(cols[4], dir) ||
        !detail::parse_int(cols[6], prb) || !detail::parse_int(cols[7], tbs))
      throw parse_error(line_no, "non-numeric column");
    if (dir != 1) continue;
    std::int64_t raw = sfn * 10 + sf;
    if (last_raw >= 0 && raw + 5000 < last_raw) ++wraps;
    last_raw = raw;
    std::int64_t tti = raw + wraps * 10240;
    if (base < 0) base = tti;
    tti -= base;
    if (tti < 0) throw parse_error(line_no, "time went backwards");
    auto& r = merged[{tti, rnti}];
    r.tti = tti;
    r.ue_id = rnti;
    r.bits += std::max<std::int64_t>(0, tbs);
    r.rbs += std::max<std::int64_t>(0, prb);
  }
  if (merged.empty()) throw error(errc::empty_trace, "no downlink rows");
  std::vector<TraceRecord> out;
  out.reserve(merged.size());
  for (auto& [k, r] : merged) out.push_back(r);
  return out;
}

// UEs are ordered by descending total bits (ties: lower ue_id first) and cut
// into n_services contiguous groups of equal size; the remainder joins the
// last group. Every record with bits > 0 becomes one packet.
inline std::vector<ServiceStream> group_ues(std::span<const TraceRecord> records, int n_services,
                                            std::int64_t default_bits_per_rb = 100) {
  if (n_services < 1) throw error(errc::too_few_ues, "n_services must be >= 1");
  std::map<std::int64_t, std::int64_t> volume;
  std::int64_t max_tti = 0;
  for (const auto& r : records) {
    volume[r.ue_id] += r.bits;
    max_tti = std::max(max_tti, r.tti);
  }
  if (static_cast<int>(volume.size()) < n_services)
    throw error(errc::too_few_ues, std::to_string(volume.size()) + " UEs for " +
                                       std::to_string(n_services) + " services");
  std::vector<std::pair<std::int64_t, std::int64_t>> order(volume.begin(), volume.end());
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t per_group = order.size() / static_cast<std::size_t>(n_services);
  std::map<std::int64_t, int> group_of;
  for (std::size_t i = 0; i < order.size(); ++i)
    group_of[order[i].first] = std::min<int>(static_cast<int>(i / per_group), n_services - 1);

  std::vector<ServiceStream> streams(static_cast<std::size_t>(n_services));
  for (int s = 0; s < n_services; ++s) {
    streams[s].service_id = s;
    streams[s].n_ttis = records.empty() ? 0 : max_tti + 1;
  }
  for (const auto& r : records) {
    if (r.bits <= 0) continue;
    std::int64_t bpr = r.rbs > 0 ? std::max<std::int64_t>(1, r.bits / r.rbs) : default_bits_per_rb;
    streams[group_of[r.ue_id]].arrivals.push_back({r.tti, r.bits, bpr});
  }
  for (auto& s : streams)
    std::stable_sort(s.arrivals.begin(), s.arrivals.end(),
                     [](const auto& a, const auto& b) { return a.tti < b.tti; });
  return streams;
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::discrete_distribution<std::size_t> make_table(const std::vector<WeightedValue>& t) {
  std::vector<double> w;
  w.reserve(t.size());
  for (const auto& e : t) w.push_back(e.probability);
  return std::discrete_distribution<std::size_t>(w.begin(), w.end());
}

}  // namespace detail

// Deterministic per-service seed derived from a run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return detail::splitmix64(seed ^ detail::splitmix64(stream + 0x51ed270b27ULL));
}

inline ServiceStream gen_synthetic(const GeneratorParams& params, std::int64_t n_ttis, std::uint64_t seed,
                                   int service_id = 0) {
  validate_generator(params);
  if (n_ttis < 1) throw error(errc::bad_generator_params, "n_ttis must be >= 1");
  std::mt19937_64 rng(seed);
  auto size_dist = detail::make_table(params.pkt_sizes);
  auto chan_dist = detail::make_table(params.channel);
  ServiceStream out{service_id, n_ttis, {}};
  auto emit = [&](std::int64_t tti, std::int64_t size) {
    out.arrivals.push_back({tti, size, params.channel[chan_dist(rng)].value});
  };
  auto emit_random = [&](std::int64_t tti) { emit(tti, params.pkt_sizes[size_dist(rng)].value); };

  switch (params.kind) {
    case GeneratorKind::constant: {
      const std::int64_t pkt = params.pkt_sizes.front().value;
      for (std::int64_t t = 0; t < n_ttis; ++t) {
        std::int64_t left = params.bits;
        while (left > 0) {
          std::int64_t sz = std::min(left, pkt);
          emit(t, sz);
          left -= sz;
        }
      }
      break;
    }
    case GeneratorKind::poisson_batch: {
      std::poisson_distribution<std::int64_t> count(params.lambda);
      for (std::int64_t t = 0; t < n_ttis; ++t) {
        std::int64_t k = params.lambda > 0 ? count(rng) : 0;
        for (std::int64_t j = 0; j < k; ++j) emit_random(t);
      }
      break;
    }
    case GeneratorKind::on_off: {
      std::bernoulli_distribution turn_on(params.p_on), turn_off(params.p_off);
      std::poisson_distribution<std::int64_t> on_count(params.lambda > 0 ? params.lambda : 1.0);
      std::poisson_distribution<std::int64_t> off_count(params.lambda_off > 0 ? params.lambda_off : 1.0);
      bool on = false;
      for (std::int64_t t = 0; t < n_ttis; ++t) {
        on = on ? !turn_off(rng) : turn_on(rng);
        double rate = on ? params.lambda : params.lambda_off;
        std::int64_t k = rate > 0 ? (on ? on_count(rng) : off_count(rng)) : 0;
        for (std::int64_t j = 0; j < k; ++j) emit_random(t);
      }
      break;
    }
  }
  return out;
}

// Transmission log for a stream where every packet leaves in its arrival TTI
// using ceil(size / bits_per_rb) RBs. Used by offline studies that have no
// scheduler history.
inline std::vector<TransmittedPacket> nominal_transmissions(const ServiceStream& s) {
  std::vector<TransmittedPacket> out;
  out.reserve(s.arrivals.size());
  for (const auto& a : s.arrivals)
    out.push_back({a.tti, a.size_bits, (a.size_bits + a.bits_per_rb - 1) / a.bits_per_rb});
  return out;
}

// Last t_obs TTIs ending at end_tti (inclusive). `transmitted` must be sorted
// by completion_tti.
inline SampleWindow window(std::span<const std::int64_t> bits_per_tti,
                           std::span<const TransmittedPacket> transmitted, int service_id,
                           std::int64_t end_tti, std::int64_t t_obs) {
  if (t_obs < 1 || end_tti < t_obs - 1)
    throw error(errc::insufficient_history, "end_tti " + std::to_string(end_tti) + " < t_obs - 1");
  if (end_tti >= static_cast<std::int64_t>(bits_per_tti.size()))
    throw error(errc::insufficient_history, "end_tti beyond recorded arrivals");
  const std::int64_t first = end_tti - t_obs + 1;
  SampleWindow w;
  w.service_id = service_id;
  w.x_d.assign(bits_per_tti.begin() + first, bits_per_tti.begin() + end_tti + 1);
  auto lo = std::lower_bound(transmitted.begin(), transmitted.end(), first,
                             [](const auto& p, std::int64_t t) { return p.completion_tti < t; });
  for (auto it = lo; it != transmitted.end() && it->completion_tti <= end_tti; ++it)
    if (it->size_bits >= 1 && it->rbs_used >= 1) w.packets.push_back({it->size_bits, it->rbs_used});
  return w;
}

inline SampleWindow window(const ServiceStream& stream, std::span<const TransmittedPacket> transmitted,
                           std::int64_t end_tti, std::int64_t t_obs) {
  auto x = stream.bits_per_tti();
  return window(x, transmitted, stream.service_id, end_tti, t_obs);
}

}  // namespace rbguard
