#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "coexec/error.hpp"

namespace coexec {

enum class BackendKind { Simulated, NativePool };

struct Backend {
  BackendKind kind = BackendKind::Simulated;
  std::uint32_t worker_count = 1;  // NativePool only

  bool operator==(const Backend&) const = default;
};

/// A device's identity and cost model. computing_power is work-items per
/// millisecond of pure compute throughput; bandwidth applies to the
/// simulated backend only.
struct DeviceProfile {
  std::string id;
  std::string name;
  double computing_power = 1.0;
  double launch_overhead_ms = 0.0;
  double bandwidth_bytes_per_ms = 1.0;
  Backend backend;
  std::uint64_t min_package_work_groups = 1;

  bool operator==(const DeviceProfile&) const = default;
};

inline void validate_device(const DeviceProfile& dev) {
  if (dev.id.empty())
    throw Error(ErrorCode::ConfigError, "device id must not be empty");
  if (!(dev.computing_power > 0.0))
    throw Error(ErrorCode::ConfigError, "device '" + dev.id + "': computing_power must be > 0");
  if (!(dev.bandwidth_bytes_per_ms > 0.0))
    throw Error(ErrorCode::ConfigError, "device '" + dev.id + "': bandwidth_bytes_per_ms must be > 0");
  if (dev.launch_overhead_ms < 0.0)
    throw Error(ErrorCode::ConfigError, "device '" + dev.id + "': launch_overhead_ms must be >= 0");
  if (dev.min_package_work_groups < 1)
    throw Error(ErrorCode::ConfigError, "device '" + dev.id + "': min_package_work_groups must be >= 1");
  if (dev.backend.kind == BackendKind::NativePool && dev.backend.worker_count < 1)
    throw Error(ErrorCode::ConfigError, "device '" + dev.id + "': worker_count must be >= 1");
}

enum class BufferRole { Input, Output };

struct BufferDesc {
  std::string name;
  std::uint64_t element_size_bytes = 1;
  std::uint64_t element_count = 1;
  BufferRole role = BufferRole::Input;

  std::uint64_t size_bytes() const { return element_size_bytes * element_count; }

  bool operator==(const BufferDesc&) const = default;
};

/// Ratio of output elements written per work-items executed, e.g. 1:1
/// (every item writes one element), 1:255, 4:1.
struct OutPattern {
  std::uint64_t out_indices = 1;
  std::uint64_t work_items = 1;

  bool operator==(const OutPattern&) const = default;
};

using ArgValue = std::variant<std::int64_t, double>;

struct ProgramSpec {
  std::uint64_t global_work_size = 0;
  std::uint64_t local_work_size = 1;
  std::vector<BufferDesc> in_buffers;
  std::vector<BufferDesc> out_buffers;
  OutPattern out_pattern;
  std::string kernel;
  std::vector<ArgValue> args;

  bool operator==(const ProgramSpec&) const = default;
};

/// A ProgramSpec whose invariants were checked; carries the derived
/// work-group count. Obtainable only through validate_program.
class ValidatedProgram {
 public:
  const ProgramSpec& spec() const { return spec_; }
  std::uint64_t total_work_groups() const { return total_work_groups_; }
  std::uint64_t global_work_size() const { return spec_.global_work_size; }
  std::uint64_t local_work_size() const { return spec_.local_work_size; }

 private:
  friend ValidatedProgram validate_program(ProgramSpec spec);
  ValidatedProgram(ProgramSpec spec, std::uint64_t total_wg)
      : spec_(std::move(spec)), total_work_groups_(total_wg) {}

  ProgramSpec spec_;
  std::uint64_t total_work_groups_ = 0;
};

inline ValidatedProgram validate_program(ProgramSpec spec) {
  if (spec.global_work_size == 0 || spec.local_work_size == 0)
    throw Error(ErrorCode::ConfigError, "global/local work size must be positive");
  if (spec.global_work_size % spec.local_work_size != 0)
    throw Error(ErrorCode::NonDivisibleWorkSize,
                "local_work_size " + std::to_string(spec.local_work_size) +
                    " does not divide global_work_size " + std::to_string(spec.global_work_size));
  if (spec.out_buffers.empty())
    throw Error(ErrorCode::EmptyProgram, "program has no output buffers");

  const auto& pat = spec.out_pattern;
  if (pat.out_indices == 0 || pat.work_items == 0)
    throw Error(ErrorCode::BadOutPattern, "out_pattern components must be positive");
  const std::uint64_t lws = spec.local_work_size;
  if (lws % pat.work_items != 0 && pat.work_items % lws != 0)
    throw Error(ErrorCode::BadOutPattern,
                "out_pattern work_items " + std::to_string(pat.work_items) +
                    " incompatible with local_work_size " + std::to_string(lws));
  if ((spec.global_work_size * pat.out_indices) % pat.work_items != 0)
    throw Error(ErrorCode::BadOutPattern, "out_pattern does not divide the global work size");
  const std::uint64_t out_elems = spec.global_work_size * pat.out_indices / pat.work_items;
  for (const auto& buf : spec.out_buffers) {
    if (buf.element_size_bytes < 1 || buf.element_count < 1)
      throw Error(ErrorCode::ConfigError, "buffer '" + buf.name + "' has empty geometry");
    if (buf.element_count != out_elems)
      throw Error(ErrorCode::BadOutPattern,
                  "out buffer '" + buf.name + "' has " + std::to_string(buf.element_count) +
                      " elements, out_pattern implies " + std::to_string(out_elems));
  }
  for (const auto& buf : spec.in_buffers) {
    if (buf.element_size_bytes < 1 || buf.element_count < 1)
      throw Error(ErrorCode::ConfigError, "buffer '" + buf.name + "' has empty geometry");
  }

  const std::uint64_t total_wg = spec.global_work_size / spec.local_work_size;
  return ValidatedProgram(std::move(spec), total_wg);
}

/// A contiguous work-group range assigned to one device, with lifecycle
/// timestamps on the engine clock (milliseconds).
struct Package {
  std::uint64_t seq = 0;
  std::uint32_t device_index = 0;
  std::string device_id;
  std::uint64_t offset_wg = 0;
  std::uint64_t size_wg = 0;
  double t_enqueue_ms = 0.0;
  double t_start_ms = 0.0;
  double t_end_ms = 0.0;

  std::uint64_t end_wg() const { return offset_wg + size_wg; }
  std::uint64_t work_items(std::uint64_t lws) const { return size_wg * lws; }

  bool operator==(const Package&) const = default;
};

struct OutRange {
  std::uint64_t offset = 0;
  std::uint64_t count = 0;

  bool operator==(const OutRange&) const = default;
};

/// Maps a package's work-group range to the output-element range it owns.
/// Distinct packages of one tiling get disjoint ranges in package order.
inline OutRange out_range_for(const Package& pkg, const ValidatedProgram& prog) {
  const auto& pat = prog.spec().out_pattern;
  const std::uint64_t lws = prog.local_work_size();
  const std::uint64_t items = pkg.size_wg * lws;
  const std::uint64_t first_item = pkg.offset_wg * lws;
  if ((items * pat.out_indices) % pat.work_items != 0 ||
      (first_item * pat.out_indices) % pat.work_items != 0)
    throw Error(ErrorCode::IndivisiblePackage,
                "package of " + std::to_string(items) + " work-items at offset " +
                    std::to_string(first_item) + " is not divisible by out pattern " +
                    std::to_string(pat.out_indices) + ":" + std::to_string(pat.work_items));
  return OutRange{first_item * pat.out_indices / pat.work_items,
                  items * pat.out_indices / pat.work_items};
}

/// True when the packages cover [0, total_wg) exactly once.
inline bool tiles_exactly(std::vector<Package> packages, std::uint64_t total_wg) {
  if (packages.empty()) return total_wg == 0;
  std::sort(packages.begin(), packages.end(),
            [](const Package& a, const Package& b) { return a.offset_wg < b.offset_wg; });
  std::uint64_t next = 0;
  for (const auto& pkg : packages) {
    if (pkg.size_wg == 0 || pkg.offset_wg != next) return false;
    next = pkg.end_wg();
  }
  return next == total_wg;
}

enum class ClockMode { Virtual, Wall };

constexpr std::string_view clock_mode_name(ClockMode mode) {
  return mode == ClockMode::Virtual ? "virtual" : "wall";
}

struct ProgramSummary {
  std::string kernel;
  std::uint64_t global_work_size = 0;
  std::uint64_t local_work_size = 1;
  std::uint64_t total_work_groups = 0;
  OutPattern out_pattern;

  bool operator==(const ProgramSummary&) const = default;
};

inline ProgramSummary summarize(const ValidatedProgram& prog) {
  return ProgramSummary{prog.spec().kernel, prog.global_work_size(), prog.local_work_size(),
                        prog.total_work_groups(), prog.spec().out_pattern};
}

/// Ordered per-package events of one run plus the header needed to
/// interpret them; everything metrics and charts consume.
struct ExecutionTrace {
  std::uint32_t schema = 1;
  ProgramSummary program;
  std::vector<DeviceProfile> devices;
  std::string scheduler;  // description string, includes all parameters
  ClockMode clock_mode = ClockMode::Virtual;
  std::uint64_t seed = 0;
  double init_ms = 0.0;
  bool init_in_total = true;
  std::vector<Package> packages;
  double t_total_ms = 0.0;
  std::map<std::string, double> per_device_time_ms;

  bool operator==(const ExecutionTrace&) const = default;
};

}  // namespace coexec
