#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "coexec/core.hpp"
#include "coexec/error.hpp"

namespace coexec {

using json = nlohmann::json;

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline json to_json(const Backend& b) {
  json j{{"kind", b.kind == BackendKind::Simulated ? "simulated" : "native_pool"}};
  if (b.kind == BackendKind::NativePool) j["worker_count"] = b.worker_count;
  return j;
}

inline Backend backend_from_json(const json& j) {
  Backend b;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "simulated") {
    b.kind = BackendKind::Simulated;
  } else if (kind == "native_pool") {
    b.kind = BackendKind::NativePool;
    b.worker_count = j.value("worker_count", 1u);
  } else {
    throw Error(ErrorCode::ConfigError, "unknown backend kind '" + kind + "'");
  }
  return b;
}

inline json to_json(const DeviceProfile& d) {
  return json{{"id", d.id},
              {"name", d.name},
              {"computing_power", d.computing_power},
              {"launch_overhead_ms", d.launch_overhead_ms},
              {"bandwidth_bytes_per_ms", d.bandwidth_bytes_per_ms},
              {"backend", to_json(d.backend)},
              {"min_package_work_groups", d.min_package_work_groups}};
}

inline DeviceProfile device_from_json(const json& j) {
  DeviceProfile d;
  d.id = j.at("id").get<std::string>();
  d.name = j.value("name", d.id);
  d.computing_power = j.value("computing_power", 1.0);
  d.launch_overhead_ms = j.value("launch_overhead_ms", 0.0);
  d.bandwidth_bytes_per_ms = j.value("bandwidth_bytes_per_ms", 1.0);
  if (j.contains("backend")) d.backend = backend_from_json(j.at("backend"));
  d.min_package_work_groups = j.value("min_package_work_groups", std::uint64_t{0});
  return d;
}

inline json to_json(const Package& p) {
  return json{{"seq", p.seq},
              {"device_index", p.device_index},
              {"device_id", p.device_id},
              {"offset_wg", p.offset_wg},
              {"size_wg", p.size_wg},
              {"t_enqueue_ms", p.t_enqueue_ms},
              {"t_start_ms", p.t_start_ms},
              {"t_end_ms", p.t_end_ms}};
}

inline Package package_from_json(const json& j) {
  Package p;
  p.seq = j.at("seq").get<std::uint64_t>();
  p.device_index = j.at("device_index").get<std::uint32_t>();
  p.device_id = j.at("device_id").get<std::string>();
  p.offset_wg = j.at("offset_wg").get<std::uint64_t>();
  p.size_wg = j.at("size_wg").get<std::uint64_t>();
  p.t_enqueue_ms = j.at("t_enqueue_ms").get<double>();
  p.t_start_ms = j.at("t_start_ms").get<double>();
  p.t_end_ms = j.at("t_end_ms").get<double>();
  return p;
}

inline json to_json(const ExecutionTrace& t) {
  json program{{"kernel", t.program.kernel},
               {"global_work_size", t.program.global_work_size},
               {"local_work_size", t.program.local_work_size},
               {"total_work_groups", t.program.total_work_groups},
               {"out_pattern",
                {{"out_indices", t.program.out_pattern.out_indices},
                 {"work_items", t.program.out_pattern.work_items}}}};
  json devices = json::array();
  for (const auto& d : t.devices) devices.push_back(to_json(d));
  json packages = json::array();
  for (const auto& p : t.packages) packages.push_back(to_json(p));
  return json{{"schema", t.schema},
              {"program", std::move(program)},
              {"devices", std::move(devices)},
              {"scheduler", t.scheduler},
              {"clock_mode", std::string(clock_mode_name(t.clock_mode))},
              {"seed", t.seed},
              {"init_ms", t.init_ms},
              {"init_in_total", t.init_in_total},
              {"packages", std::move(packages)},
              {"t_total_ms", t.t_total_ms},
              {"per_device_time_ms", t.per_device_time_ms}};
}

inline ExecutionTrace trace_from_json(const json& j) {
  try {
    ExecutionTrace t;
    t.schema = j.at("schema").get<std::uint32_t>();
    const auto& prog = j.at("program");
    t.program.kernel = prog.at("kernel").get<std::string>();
    t.program.global_work_size = prog.at("global_work_size").get<std::uint64_t>();
    t.program.local_work_size = prog.at("local_work_size").get<std::uint64_t>();
    t.program.total_work_groups = prog.at("total_work_groups").get<std::uint64_t>();
    t.program.out_pattern.out_indices = prog.at("out_pattern").at("out_indices").get<std::uint64_t>();
    t.program.out_pattern.work_items = prog.at("out_pattern").at("work_items").get<std::uint64_t>();
    for (const auto& d : j.at("devices")) t.devices.push_back(device_from_json(d));
    t.scheduler = j.at("scheduler").get<std::string>();
    t.clock_mode = j.at("clock_mode").get<std::string>() == "wall" ? ClockMode::Wall : ClockMode::Virtual;
    t.seed = j.at("seed").get<std::uint64_t>();
    t.init_ms = j.at("init_ms").get<double>();
    t.init_in_total = j.at("init_in_total").get<bool>();
    for (const auto& p : j.at("packages")) t.packages.push_back(package_from_json(p));
    t.t_total_ms = j.at("t_total_ms").get<double>();
    t.per_device_time_ms = j.at("per_device_time_ms").get<std::map<std::string, double>>();
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedTrace, e.what());
  }
}

inline std::string trace_to_json_string(const ExecutionTrace& t) {
  return to_json(t).dump(2) + "\n";
}

inline void save_trace_json(const ExecutionTrace& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << trace_to_json_string(t);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

inline ExecutionTrace load_trace_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedTrace, std::string(e.what()) + " in '" + path.string() + "'");
  }
  return trace_from_json(j);
}

inline std::string trace_to_csv(const ExecutionTrace& t) {
  std::ostringstream out;
  out << "seq,device_id,offset_wg,size_wg,t_enqueue_ms,t_start_ms,t_end_ms\n";
  for (const auto& p : t.packages) {
    out << p.seq << ',' << p.device_id << ',' << p.offset_wg << ',' << p.size_wg << ','
        << format_double(p.t_enqueue_ms) << ',' << format_double(p.t_start_ms) << ','
        << format_double(p.t_end_ms) << '\n';
  }
  return out.str();
}

inline void save_trace_csv(const ExecutionTrace& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << trace_to_csv(t);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace coexec
