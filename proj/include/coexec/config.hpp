#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coexec/core.hpp"
#include "coexec/error.hpp"
#include "coexec/schedulers.hpp"
#include "coexec/trace_io.hpp"

namespace coexec {

struct ExperimentConfig {
  ProgramSpec program;
  std::vector<DeviceProfile> devices;
  std::vector<SchedulerConfig> schedulers;
  std::uint32_t repetitions = 1;
  std::uint32_t warmup_discard = 0;
  ClockMode clock_mode = ClockMode::Virtual;
  std::uint64_t seed = 0;
  bool exclude_init = false;
  std::filesystem::path output_dir = "out";
};

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(e.what()) + " in '" + path.string() + "'");
  }
  return j;
}

inline SchedulerConfig scheduler_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "static") {
    StaticConfig cfg;
    if (j.contains("proportions")) cfg.proportions = j.at("proportions").get<std::vector<double>>();
    if (j.contains("device_order")) cfg.device_order = j.at("device_order").get<std::vector<std::string>>();
    return cfg;
  }
  if (type == "dynamic") {
    DynamicConfig cfg;
    cfg.num_packages = j.at("num_packages").get<std::uint64_t>();
    return cfg;
  }
  if (type == "hguided") {
    HGuidedConfig cfg;
    cfg.k = j.value("k", 2.0);
    if (j.contains("powers")) cfg.powers = j.at("powers").get<std::vector<double>>();
    cfg.include_device_count = j.value("include_device_count", true);
    return cfg;
  }
  throw Error(ErrorCode::ConfigError, "unknown scheduler type '" + type + "'");
}

inline json to_json(const SchedulerConfig& cfg) {
  if (const auto* s = std::get_if<StaticConfig>(&cfg)) {
    json j{{"type", "static"}};
    if (!s->proportions.empty()) j["proportions"] = s->proportions;
    if (!s->device_order.empty()) j["device_order"] = s->device_order;
    return j;
  }
  if (const auto* d = std::get_if<DynamicConfig>(&cfg))
    return json{{"type", "dynamic"}, {"num_packages", d->num_packages}};
  const auto& h = std::get<HGuidedConfig>(cfg);
  json j{{"type", "hguided"}, {"k", h.k}, {"include_device_count", h.include_device_count}};
  if (!h.powers.empty()) j["powers"] = h.powers;
  return j;
}

inline ProgramSpec program_from_json(const json& j) {
  ProgramSpec spec;
  spec.kernel = j.at("kernel").get<std::string>();
  spec.global_work_size = j.at("global_work_size").get<std::uint64_t>();
  spec.local_work_size = j.at("local_work_size").get<std::uint64_t>();
  if (j.contains("out_pattern")) {
    spec.out_pattern.out_indices = j.at("out_pattern").at("out_indices").get<std::uint64_t>();
    spec.out_pattern.work_items = j.at("out_pattern").at("work_items").get<std::uint64_t>();
  }
  auto buffer_from = [](const json& b, BufferRole role) {
    BufferDesc desc;
    desc.name = b.at("name").get<std::string>();
    desc.element_size_bytes = b.at("element_size_bytes").get<std::uint64_t>();
    desc.element_count = b.at("element_count").get<std::uint64_t>();
    desc.role = role;
    return desc;
  };
  if (j.contains("in_buffers"))
    for (const auto& b : j.at("in_buffers")) spec.in_buffers.push_back(buffer_from(b, BufferRole::Input));
  if (j.contains("out_buffers"))
    for (const auto& b : j.at("out_buffers")) spec.out_buffers.push_back(buffer_from(b, BufferRole::Output));
  if (j.contains("args")) {
    for (const auto& a : j.at("args")) {
      if (a.is_number_integer())
        spec.args.emplace_back(a.get<std::int64_t>());
      else if (a.is_number())
        spec.args.emplace_back(a.get<double>());
      else
        throw Error(ErrorCode::ConfigError, "kernel args must be scalars");
    }
  }
  return spec;
}

inline json to_json(const ProgramSpec& spec) {
  json args = json::array();
  for (const auto& a : spec.args) {
    if (const auto* i = std::get_if<std::int64_t>(&a))
      args.push_back(*i);
    else
      args.push_back(std::get<double>(a));
  }
  auto buffers_to = [](const std::vector<BufferDesc>& bufs) {
    json arr = json::array();
    for (const auto& b : bufs)
      arr.push_back({{"name", b.name},
                     {"element_size_bytes", b.element_size_bytes},
                     {"element_count", b.element_count}});
    return arr;
  };
  return json{{"kernel", spec.kernel},
              {"global_work_size", spec.global_work_size},
              {"local_work_size", spec.local_work_size},
              {"out_pattern",
               {{"out_indices", spec.out_pattern.out_indices}, {"work_items", spec.out_pattern.work_items}}},
              {"in_buffers", buffers_to(spec.in_buffers)},
              {"out_buffers", buffers_to(spec.out_buffers)},
              {"args", std::move(args)}};
}

/// Device list from a profile file: {"schema":1, "devices":[...]}. Profiles
/// may omit min_package_work_groups; the power-ratio heuristic fills it in.
inline std::vector<DeviceProfile> load_device_profiles(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  std::vector<DeviceProfile> devices;
  try {
    for (const auto& d : j.at("devices")) devices.push_back(device_from_json(d));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(e.what()) + " in '" + path.string() + "'");
  }
  if (devices.empty()) throw Error(ErrorCode::ConfigError, "profile '" + path.string() + "' lists no devices");
  apply_default_min_package(devices);
  for (const auto& d : devices) validate_device(d);
  return devices;
}

/// Experiment file: program, devices (inline or via "devices_file"), the
/// scheduler matrix and the repetition protocol. Throws ConfigError with the
/// offending detail; the program is validated here so broken work sizes fail
/// at load time.
inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  const json j = load_json_file(path);
  ExperimentConfig cfg;
  try {
    if (j.value("schema", 1) != 1)
      throw Error(ErrorCode::ConfigError, "unsupported config schema version");
    cfg.program = program_from_json(j.at("program"));
    if (j.contains("devices_file")) {
      const std::filesystem::path ref = j.at("devices_file").get<std::string>();
      cfg.devices = load_device_profiles(ref.is_relative() ? path.parent_path() / ref : ref);
    } else {
      for (const auto& d : j.at("devices")) cfg.devices.push_back(device_from_json(d));
      apply_default_min_package(cfg.devices);
    }
    for (const auto& s : j.at("schedulers")) cfg.schedulers.push_back(scheduler_from_json(s));
    cfg.repetitions = j.value("repetitions", 1u);
    cfg.warmup_discard = j.value("warmup_discard", 0u);
    cfg.clock_mode = j.value("clock_mode", std::string("virtual")) == "wall" ? ClockMode::Wall
                                                                             : ClockMode::Virtual;
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.exclude_init = j.value("exclude_init", false);
    cfg.output_dir = j.value("output_dir", std::string("out"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string(e.what()) + " in '" + path.string() + "'");
  }

  for (const auto& d : cfg.devices) validate_device(d);
  if (cfg.devices.empty()) throw Error(ErrorCode::ConfigError, "no devices configured");
  if (cfg.schedulers.empty()) throw Error(ErrorCode::ConfigError, "no schedulers configured");
  if (cfg.repetitions < 1) throw Error(ErrorCode::ConfigError, "repetitions must be >= 1");
  if (cfg.warmup_discard >= cfg.repetitions)
    throw Error(ErrorCode::ConfigError, "warmup_discard must be smaller than repetitions");
  validate_program(cfg.program);  // surfaces NonDivisibleWorkSize and friends at load
  for (auto& s : cfg.schedulers)
    if (auto* st = std::get_if<StaticConfig>(&s)) *st = resolve_static(*st, cfg.devices);
  return cfg;
}

}  // namespace coexec
