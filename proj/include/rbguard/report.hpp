#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "rbguard/error.hpp"
#include "rbguard/simulator.hpp"

namespace rbguard {

using json = nlohmann::json;

// 9 significant digits, the format of every number in the reports.
inline std::string format9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// JSON number carrying the same 9 digits; non-finite values become null.
inline json num9(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::strtod(format9(v).c_str(), nullptr);
}

inline json num9(std::span<const double> v) {
  json a = json::array();
  for (double x : v) a.push_back(num9(x));
  return a;
}

inline constexpr const char* records_header = "service_id,arrival_tti,completion_tti,delay_s,excess_norm";

inline void write_records_csv(std::ostream& out, std::span<const DelayRecord> records) {
  out << records_header << '\n';
  for (const auto& r : records)
    out << r.service_id << ',' << r.arrival_tti << ',' << r.completion_tti << ',' << format9(r.delay_s) << ','
        << format9(r.excess_norm) << '\n';
}

// Keys sort alphabetically (std::map backed), so dumps are byte-stable.
inline json summary_json(const SimResult& res, std::span<const ServiceSpec> specs) {
  json j;
  j["mode"] = std::string(to_string(res.mode));
  json viol = json::object();
  json services = json::array();
  for (std::size_t m = 0; m < specs.size(); ++m) {
    std::size_t packets = 0;
    for (const auto& r : res.records) packets += r.service_id == static_cast<int>(m);
    viol[std::to_string(m)] = num9(res.violation.at(m));
    services.push_back({{"id", specs[m].id},
                        {"w_th", num9(specs[m].w_th)},
                        {"epsilon", num9(specs[m].epsilon)},
                        {"packets", packets},
                        {"no_records", static_cast<bool>(res.no_records.at(m))},
                        {"violation_probability", num9(res.violation.at(m))}});
  }
  j["violation_probability"] = viol;
  j["services"] = services;
  json alloc = json::array();
  for (const auto& a : res.allocations)
    alloc.push_back({{"tti", a.tti},
                     {"n_min", a.n_min},
                     {"w", num9(a.w)},
                     {"objective", a.infeasible ? json(nullptr) : num9(a.objective)},
                     {"iterations", a.iterations},
                     {"infeasible", a.infeasible}});
  j["allocations"] = alloc;
  double used = 0;
  for (int u : res.utilization) used += u;
  j["ttis"] = res.utilization.size();
  j["mean_rbs_used"] = num9(res.utilization.empty() ? 0.0 : used / static_cast<double>(res.utilization.size()));
  j["packets"] = res.records.size();
  return j;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw error(errc::io, "cannot write " + path.string());
  out << content;
  if (!out) throw error(errc::io, "write failed: " + path.string());
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace rbguard
