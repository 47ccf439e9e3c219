#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coexec/core.hpp"
#include "coexec/error.hpp"

namespace coexec {

/// Ratio of the earliest-finishing device's busy span to the latest-finishing
/// device's busy span; 1 means every device stopped at once.
inline double balance(const ExecutionTrace& trace) {
  if (trace.packages.empty()) throw Error(ErrorCode::EmptyTrace, "trace has no packages");
  std::map<std::string, std::pair<double, double>> spans;  // id -> (first enqueue, last end)
  for (const auto& pkg : trace.packages) {
    auto [it, inserted] = spans.try_emplace(pkg.device_id, pkg.t_enqueue_ms, pkg.t_end_ms);
    if (!inserted) {
      it->second.first = std::min(it->second.first, pkg.t_enqueue_ms);
      it->second.second = std::max(it->second.second, pkg.t_end_ms);
    }
  }
  double first_finish_span = 0.0, first_finish_time = 0.0;
  double last_finish_span = 0.0, last_finish_time = 0.0;
  bool first = true;
  for (const auto& [id, span] : spans) {
    const double busy = span.second - span.first;
    if (first || span.second < first_finish_time) {
      first_finish_time = span.second;
      first_finish_span = busy;
    }
    if (first || span.second > last_finish_time) {
      last_finish_time = span.second;
      last_finish_span = busy;
    }
    first = false;
  }
  return first_finish_span / last_finish_span;
}

/// Best achievable speedup given each device's solo time: sum T_i / max T_i.
inline double s_max(std::span<const double> solo_times_ms) {
  if (solo_times_ms.empty()) throw Error(ErrorCode::NonPositiveTime, "no solo times");
  double sum = 0.0, max = 0.0;
  for (double t : solo_times_ms) {
    if (!(t > 0.0)) throw Error(ErrorCode::NonPositiveTime, "solo times must be > 0");
    sum += t;
    max = std::max(max, t);
  }
  return sum / max;
}

/// Speedup against the fastest device's solo run, and its share of the best
/// achievable speedup.
inline std::pair<double, double> speedup_and_efficiency(const ExecutionTrace& trace,
                                                        std::span<const double> solo_times_ms) {
  if (trace.packages.empty()) throw Error(ErrorCode::EmptyTrace, "trace has no packages");
  if (solo_times_ms.empty()) throw Error(ErrorCode::MissingBaseline, "no solo baseline times");
  const double baseline = *std::min_element(solo_times_ms.begin(), solo_times_ms.end());
  if (!(baseline > 0.0)) throw Error(ErrorCode::NonPositiveTime, "baseline must be > 0");
  const double speedup = baseline / trace.t_total_ms;
  return {speedup, speedup / s_max(solo_times_ms)};
}

inline double overhead_pct(double t_subject_ms, double t_reference_ms) {
  if (!(t_reference_ms > 0.0))
    throw Error(ErrorCode::NonPositiveReference, "reference time must be > 0");
  return (t_subject_ms - t_reference_ms) / t_reference_ms * 100.0;
}

struct MetricsReport {
  double balance = 1.0;
  double speedup = 1.0;
  double s_max = 1.0;
  double efficiency = 1.0;
  std::optional<double> overhead_pct;
  std::map<std::string, double> work_share;
  std::vector<std::string> notes;

  bool operator==(const MetricsReport&) const = default;
};

inline std::map<std::string, double> work_share_of(const ExecutionTrace& trace) {
  std::map<std::string, double> share;
  std::uint64_t total = 0;
  for (const auto& pkg : trace.packages) {
    share[pkg.device_id] += static_cast<double>(pkg.size_wg);
    total += pkg.size_wg;
  }
  for (auto& [id, wg] : share) wg /= static_cast<double>(total);
  return share;
}

inline MetricsReport make_report(const ExecutionTrace& trace, std::span<const double> solo_times_ms,
                                 std::optional<double> reference_ms = std::nullopt) {
  MetricsReport report;
  report.balance = balance(trace);
  auto [speedup, efficiency] = speedup_and_efficiency(trace, solo_times_ms);
  report.speedup = speedup;
  report.s_max = s_max(solo_times_ms);
  report.efficiency = efficiency;
  if (reference_ms) report.overhead_pct = overhead_pct(trace.t_total_ms, *reference_ms);
  report.work_share = work_share_of(trace);
  if (report.efficiency > 1.001)
    report.notes.push_back("efficiency above s_max by more than 0.1%; trace anomaly");
  return report;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j{{"balance", r.balance},
                   {"speedup", r.speedup},
                   {"s_max", r.s_max},
                   {"efficiency", r.efficiency},
                   {"work_share", r.work_share},
                   {"notes", r.notes}};
  if (r.overhead_pct) j["overhead_pct"] = *r.overhead_pct;
  return j;
}

inline MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.balance = j.at("balance").get<double>();
  r.speedup = j.at("speedup").get<double>();
  r.s_max = j.at("s_max").get<double>();
  r.efficiency = j.at("efficiency").get<double>();
  r.work_share = j.at("work_share").get<std::map<std::string, double>>();
  r.notes = j.at("notes").get<std::vector<std::string>>();
  if (j.contains("overhead_pct")) r.overhead_pct = j.at("overhead_pct").get<double>();
  return r;
}

inline std::string render_table(const MetricsReport& r) {
  std::ostringstream out;
  char line[128];
  std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "balance", r.balance);
  out << line;
  std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "speedup", r.speedup);
  out << line;
  std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "s_max", r.s_max);
  out << line;
  std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "efficiency", r.efficiency);
  out << line;
  if (r.overhead_pct) {
    std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "overhead_pct", *r.overhead_pct);
    out << line;
  }
  for (const auto& [id, share] : r.work_share) {
    std::snprintf(line, sizeof(line), "share[%s]%*s %7.2f%%\n", id.c_str(),
                  static_cast<int>(id.size() <= 10 ? 10 - id.size() : 0), "", share * 100.0);
    out << line;
  }
  for (const auto& note : r.notes) out << "note: " << note << "\n";
  return out.str();
}

// ---------------------------------------------------------------------------
// Analytical code-cost model: LOC/token constants per OpenCL primitive times
// the primitive's variable product.

struct CodeCostQuery {
  std::uint64_t platforms = 1;
  std::uint64_t devices = 1;
  std::uint64_t programs = 1;
  std::uint64_t kernels = 1;
  std::uint64_t args = 1;
  std::uint64_t buffers = 1;
};

struct CodeCostRow {
  std::string primitive;
  std::uint64_t loc = 0;
  std::uint64_t tokens = 0;

  bool operator==(const CodeCostRow&) const = default;
};

struct CodeCostTable {
  std::vector<CodeCostRow> rows;
  std::uint64_t total_loc = 0;
  std::uint64_t total_tokens = 0;
};

inline CodeCostTable code_cost(const CodeCostQuery& q) {
  struct RowModel {
    const char* primitive;
    std::uint64_t loc, tokens;
    std::uint64_t multiplier;
  };
  const RowModel models[] = {
      {"Device", 3, 9, q.platforms},
      {"Context", 1, 3, q.devices},
      {"CommandQueue", 2, 9, q.devices},
      {"Buffer", 3, 15, q.devices * q.buffers},
      {"Program", 6, 21, q.devices * q.programs},
      {"Kernel", 2, 8, q.devices * q.kernels},
      {"Arg", 2, 7, q.devices * q.args * q.kernels},
  };
  CodeCostTable table;
  for (const auto& m : models) {
    CodeCostRow row{m.primitive, m.loc * m.multiplier, m.tokens * m.multiplier};
    table.total_loc += row.loc;
    table.total_tokens += row.tokens;
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::string render_table(const CodeCostTable& table) {
  std::ostringstream out;
  char line[96];
  std::snprintf(line, sizeof(line), "%-14s %10s %10s\n", "Primitive", "LOC", "Tokens");
  out << line;
  for (const auto& row : table.rows) {
    std::snprintf(line, sizeof(line), "%-14s %10llu %10llu\n", row.primitive.c_str(),
                  static_cast<unsigned long long>(row.loc), static_cast<unsigned long long>(row.tokens));
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-14s %10llu %10llu\n", "Total",
                static_cast<unsigned long long>(table.total_loc),
                static_cast<unsigned long long>(table.total_tokens));
  out << line;
  return out.str();
}

inline nlohmann::json to_json(const CodeCostTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : table.rows)
    rows.push_back({{"primitive", row.primitive}, {"loc", row.loc}, {"tokens", row.tokens}});
  return nlohmann::json{
      {"rows", std::move(rows)}, {"total_loc", table.total_loc}, {"total_tokens", table.total_tokens}};
}

}  // namespace coexec
