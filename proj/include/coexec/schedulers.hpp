#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "coexec/core.hpp"
#include "coexec/error.hpp"

namespace coexec {

struct StaticConfig {
  // Proportions in delivery order. May hold device_count entries (normalized
  // on load), device_count - 1 entries (last device receives 1 - sum), or be
  // empty (proportional to computing_power).
  std::vector<double> proportions;
  // Permutation of device ids; delivery order. Empty = profile order.
  std::vector<std::string> device_order;

  bool operator==(const StaticConfig&) const = default;
};

struct DynamicConfig {
  std::uint64_t num_packages = 1;

  bool operator==(const DynamicConfig&) const = default;
};

struct HGuidedConfig {
  double k = 2.0;
  // Overrides DeviceProfile.computing_power for the packet-size equation.
  std::vector<double> powers;
  // Keep the device count n in the denominator (the printed equation form).
  bool include_device_count = true;

  bool operator==(const HGuidedConfig&) const = default;
};

using SchedulerConfig = std::variant<StaticConfig, DynamicConfig, HGuidedConfig>;

inline std::string describe(const SchedulerConfig& cfg) {
  std::ostringstream out;
  if (const auto* s = std::get_if<StaticConfig>(&cfg)) {
    out << "static(props=";
    if (s->proportions.empty()) {
      out << "power";
    } else {
      for (std::size_t i = 0; i < s->proportions.size(); ++i)
        out << (i ? "," : "") << s->proportions[i];
    }
    if (!s->device_order.empty()) {
      out << ";order=";
      for (std::size_t i = 0; i < s->device_order.size(); ++i)
        out << (i ? "," : "") << s->device_order[i];
    }
    out << ")";
  } else if (const auto* d = std::get_if<DynamicConfig>(&cfg)) {
    out << "dynamic(packages=" << d->num_packages << ")";
  } else {
    const auto& h = std::get<HGuidedConfig>(cfg);
    out << "hguided(k=" << h.k;
    if (!h.powers.empty()) {
      out << ";powers=";
      for (std::size_t i = 0; i < h.powers.size(); ++i) out << (i ? "," : "") << h.powers[i];
    }
    if (!h.include_device_count) out << ";no-n";
    out << ")";
  }
  return out.str();
}

inline std::string scheduler_kind(const SchedulerConfig& cfg) {
  if (std::holds_alternative<StaticConfig>(cfg)) return "static";
  if (std::holds_alternative<DynamicConfig>(cfg)) return "dynamic";
  return "hguided";
}

/// Fills in defaults and normalizes a Static config against the device set:
/// empty proportions become computing_power shares, a device_count-1 list
/// gets its remainder appended, and the result is scaled to sum to 1.
inline StaticConfig resolve_static(StaticConfig cfg, const std::vector<DeviceProfile>& devices) {
  const std::size_t n = devices.size();
  if (n == 0) throw Error(ErrorCode::BadSchedulerConfig, "static scheduler needs devices");
  if (cfg.device_order.empty()) {
    for (const auto& d : devices) cfg.device_order.push_back(d.id);
  }
  if (cfg.device_order.size() != n)
    throw Error(ErrorCode::BadSchedulerConfig, "device_order must list every device exactly once");
  for (const auto& dev : devices) {
    const auto hits = std::count(cfg.device_order.begin(), cfg.device_order.end(), dev.id);
    if (hits != 1)
      throw Error(ErrorCode::BadSchedulerConfig,
                  "device_order must be a permutation of the device ids; '" + dev.id + "' appears " +
                      std::to_string(hits) + " times");
  }

  if (cfg.proportions.empty()) {
    double total = 0.0;
    for (const auto& d : devices) total += d.computing_power;
    for (const auto& id : cfg.device_order) {
      const auto it = std::find_if(devices.begin(), devices.end(),
                                   [&](const DeviceProfile& d) { return d.id == id; });
      cfg.proportions.push_back(it->computing_power / total);
    }
  } else if (cfg.proportions.size() == n - 1) {
    const double partial = std::accumulate(cfg.proportions.begin(), cfg.proportions.end(), 0.0);
    cfg.proportions.push_back(1.0 - partial);
  }
  if (cfg.proportions.size() != n)
    throw Error(ErrorCode::BadSchedulerConfig,
                "expected " + std::to_string(n) + " proportions, got " +
                    std::to_string(cfg.proportions.size()));
  const double sum = std::accumulate(cfg.proportions.begin(), cfg.proportions.end(), 0.0);
  if (!(sum > 0.0)) throw Error(ErrorCode::BadSchedulerConfig, "proportions must sum to a positive value");
  for (auto& p : cfg.proportions) p /= sum;
  for (double p : cfg.proportions)
    if (!(p > 0.0) || p > 1.0)
      throw Error(ErrorCode::BadSchedulerConfig, "every proportion must lie in (0,1] after normalization");
  return cfg;
}

/// One proportional package per device, delivered in device_order. Sizes are
/// floor(total * proportion) with the final device absorbing the remainder;
/// zero-size packages are bumped to one work-group.
inline std::vector<Package> static_partition(std::uint64_t total_wg, const StaticConfig& resolved,
                                             const std::vector<DeviceProfile>& devices) {
  const std::size_t n = devices.size();
  if (total_wg < n)
    throw Error(ErrorCode::TooFewWorkGroups,
                std::to_string(total_wg) + " work-groups for " + std::to_string(n) + " devices");

  std::vector<Package> packages;
  packages.reserve(n);
  std::uint64_t offset = 0;
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = resolved.device_order[i];
    const auto it = std::find_if(devices.begin(), devices.end(),
                                 [&](const DeviceProfile& d) { return d.id == id; });
    std::uint64_t size;
    if (i + 1 == n) {
      if (assigned >= total_wg)
        throw Error(ErrorCode::TooFewWorkGroups, "rounding left no work for the final device");
      size = total_wg - assigned;
    } else {
      size = static_cast<std::uint64_t>(std::floor(static_cast<double>(total_wg) * resolved.proportions[i]));
      if (size == 0) size = 1;
      if (assigned + size >= total_wg)
        throw Error(ErrorCode::TooFewWorkGroups, "proportions exhaust the work-groups before the final device");
    }
    Package pkg;
    pkg.seq = i;
    pkg.device_index = static_cast<std::uint32_t>(it - devices.begin());
    pkg.device_id = id;
    pkg.offset_wg = offset;
    pkg.size_wg = size;
    packages.push_back(pkg);
    offset += size;
    assigned += size;
  }
  return packages;
}

struct PackageRange {
  std::uint64_t offset_wg = 0;
  std::uint64_t size_wg = 0;
};

/// Strategy interface. The coordinator serializes access, so implementations
/// need no locking. next() hands the device its new contiguous range or
/// nullopt once the device has nothing further to do.
class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::optional<PackageRange> next(std::uint32_t device_index) = 0;
  virtual std::uint64_t remaining_work_groups() const = 0;
};

class StaticScheduler final : public Scheduler {
 public:
  StaticScheduler(std::uint64_t total_wg, const StaticConfig& cfg,
                  const std::vector<DeviceProfile>& devices) {
    auto packages = static_partition(total_wg, resolve_static(cfg, devices), devices);
    ranges_.resize(devices.size());
    for (const auto& pkg : packages) {
      ranges_[pkg.device_index] = PackageRange{pkg.offset_wg, pkg.size_wg};
      remaining_ += pkg.size_wg;
    }
  }

  std::optional<PackageRange> next(std::uint32_t device_index) override {
    auto& slot = ranges_.at(device_index);
    if (!slot) return std::nullopt;
    auto range = *slot;
    slot.reset();
    remaining_ -= range.size_wg;
    return range;
  }

  std::uint64_t remaining_work_groups() const override { return remaining_; }

 private:
  std::vector<std::optional<PackageRange>> ranges_;
  std::uint64_t remaining_ = 0;
};

class DynamicScheduler final : public Scheduler {
 public:
  DynamicScheduler(std::uint64_t total_wg, const DynamicConfig& cfg, std::size_t device_count)
      : remaining_(total_wg) {
    if (cfg.num_packages < device_count)
      throw Error(ErrorCode::BadSchedulerConfig,
                  "num_packages must be at least the device count (" +
                      std::to_string(device_count) + ")");
    package_size_ = (total_wg + cfg.num_packages - 1) / cfg.num_packages;  // ceil
    if (package_size_ == 0) package_size_ = 1;
  }

  std::optional<PackageRange> next(std::uint32_t) override {
    if (remaining_ == 0) return std::nullopt;
    const std::uint64_t size = std::min(package_size_, remaining_);
    PackageRange range{next_offset_, size};
    next_offset_ += size;
    remaining_ -= size;
    return range;
  }

  std::uint64_t remaining_work_groups() const override { return remaining_; }

 private:
  std::uint64_t package_size_ = 1;
  std::uint64_t next_offset_ = 0;
  std::uint64_t remaining_ = 0;
};

/// Decreasing packet sizes proportional to device power:
///   size_i = floor(G_r * P_i / (k * n * sum_j P_j))
/// clamped below by the device's minimum package size and above by G_r,
/// where G_r counts the still-unassigned work-groups.
class HGuidedScheduler final : public Scheduler {
 public:
  HGuidedScheduler(std::uint64_t total_wg, const HGuidedConfig& cfg,
                   const std::vector<DeviceProfile>& devices)
      : remaining_(total_wg), k_(cfg.k) {
    if (!(cfg.k > 0.0)) throw Error(ErrorCode::BadSchedulerConfig, "k must be > 0");
    if (!cfg.powers.empty() && cfg.powers.size() != devices.size())
      throw Error(ErrorCode::BadSchedulerConfig, "powers must list one value per device");
    for (std::size_t i = 0; i < devices.size(); ++i) {
      const double p = cfg.powers.empty() ? devices[i].computing_power : cfg.powers[i];
      if (!(p > 0.0)) throw Error(ErrorCode::BadSchedulerConfig, "powers must all be > 0");
      powers_.push_back(p);
      min_size_.push_back(devices[i].min_package_work_groups);
    }
    power_sum_ = std::accumulate(powers_.begin(), powers_.end(), 0.0);
    denominator_ = k_ * power_sum_ * (cfg.include_device_count ? static_cast<double>(devices.size()) : 1.0);
  }

  std::optional<PackageRange> next(std::uint32_t device_index) override {
    if (remaining_ == 0) return std::nullopt;
    std::uint64_t size = unclamped_size(remaining_, device_index);
    size = std::max(size, min_size_.at(device_index));
    size = std::min(size, remaining_);
    PackageRange range{next_offset_, size};
    next_offset_ += size;
    remaining_ -= size;
    return range;
  }

  /// The floor of the packet-size equation before min/remaining clamping.
  std::uint64_t unclamped_size(std::uint64_t pending_wg, std::uint32_t device_index) const {
    const double raw = static_cast<double>(pending_wg) * powers_.at(device_index) / denominator_;
    return static_cast<std::uint64_t>(std::floor(raw));
  }

  std::uint64_t remaining_work_groups() const override { return remaining_; }
  double k() const { return k_; }

 private:
  std::vector<double> powers_;
  std::vector<std::uint64_t> min_size_;
  double power_sum_ = 0.0;
  double denominator_ = 1.0;
  std::uint64_t next_offset_ = 0;
  std::uint64_t remaining_ = 0;
  double k_ = 2.0;
};

inline std::unique_ptr<Scheduler> make_scheduler(const SchedulerConfig& cfg, std::uint64_t total_wg,
                                                 const std::vector<DeviceProfile>& devices) {
  if (const auto* s = std::get_if<StaticConfig>(&cfg))
    return std::make_unique<StaticScheduler>(total_wg, *s, devices);
  if (const auto* d = std::get_if<DynamicConfig>(&cfg))
    return std::make_unique<DynamicScheduler>(total_wg, *d, devices.size());
  return std::make_unique<HGuidedScheduler>(total_wg, std::get<HGuidedConfig>(cfg), devices);
}

/// Heuristic HGuided floor when a profile leaves it unset:
/// max(1, floor(P_i / min_j P_j)) work-groups.
inline void apply_default_min_package(std::vector<DeviceProfile>& devices) {
  double min_power = 0.0;
  for (const auto& d : devices)
    if (min_power == 0.0 || d.computing_power < min_power) min_power = d.computing_power;
  for (auto& d : devices) {
    if (d.min_package_work_groups == 0) {
      const auto ratio = static_cast<std::uint64_t>(std::floor(d.computing_power / min_power));
      d.min_package_work_groups = std::max<std::uint64_t>(1, ratio);
    }
  }
}

}  // namespace coexec
