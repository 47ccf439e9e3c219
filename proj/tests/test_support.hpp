#pragma once

#include <cstdint>
#include <vector>

#include "coexec/core.hpp"

namespace test_support {

// Deterministic generator for hand-rolled property tests.
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::uint64_t below(std::uint64_t bound) { return bound ? next() % bound : 0; }
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

inline coexec::DeviceProfile simulated_device(std::string id, double power,
                                              double overhead_ms = 0.0,
                                              double bandwidth = 1 << 20,
                                              std::uint64_t min_wg = 1) {
  coexec::DeviceProfile dev;
  dev.id = id;
  dev.name = id;
  dev.computing_power = power;
  dev.launch_overhead_ms = overhead_ms;
  dev.bandwidth_bytes_per_ms = bandwidth;
  dev.backend = {coexec::BackendKind::Simulated, 1};
  dev.min_package_work_groups = min_wg;
  return dev;
}

inline coexec::DeviceProfile native_device(std::string id, std::uint32_t workers) {
  coexec::DeviceProfile dev;
  dev.id = id;
  dev.name = id;
  dev.computing_power = 1.0;
  dev.backend = {coexec::BackendKind::NativePool, workers};
  return dev;
}

// Random contiguous tiling of [0, total_wg) across `devices` device indices.
inline std::vector<coexec::Package> random_tiling(Rng& rng, std::uint64_t total_wg,
                                                  std::uint32_t devices) {
  std::vector<coexec::Package> packages;
  std::uint64_t offset = 0, seq = 0;
  while (offset < total_wg) {
    coexec::Package pkg;
    pkg.seq = seq++;
    pkg.device_index = static_cast<std::uint32_t>(rng.below(devices));
    pkg.device_id = "d" + std::to_string(pkg.device_index);
    pkg.offset_wg = offset;
    pkg.size_wg = 1 + rng.below(total_wg - offset);
    offset = pkg.offset_wg + pkg.size_wg;
    packages.push_back(pkg);
  }
  return packages;
}

}  // namespace test_support
