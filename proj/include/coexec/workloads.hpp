#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coexec/core.hpp"
#include "coexec/error.hpp"

namespace coexec {

/// Type-punned views over the host buffers a kernel reads and writes.
/// Kernels address whole buffers; package disjointness comes from each
/// work-item writing only the output elements its index owns.
class KernelBuffers {
 public:
  KernelBuffers(std::span<const std::vector<std::byte>> inputs, std::span<std::vector<std::byte>> outputs)
      : inputs_(inputs), outputs_(outputs) {}

  template <typename T>
  std::span<const T> input(std::size_t buffer) const {
    const auto& bytes = inputs_[buffer];
    return {reinterpret_cast<const T*>(bytes.data()), bytes.size() / sizeof(T)};
  }

  template <typename T>
  std::span<T> output(std::size_t buffer) const {
    auto& bytes = outputs_[buffer];
    return {reinterpret_cast<T*>(bytes.data()), bytes.size() / sizeof(T)};
  }

 private:
  std::span<const std::vector<std::byte>> inputs_;
  std::span<std::vector<std::byte>> outputs_;
};

/// A pure per-work-item function: same (index, args, buffers) in, same
/// writes out, callable concurrently from any number of workers.
using KernelFn = std::function<void(std::uint64_t index, std::span<const ArgValue> args, const KernelBuffers& io)>;

/// Per-work-item cost in abstract work units for the simulated backend.
using CostFn = std::function<double(std::uint64_t index)>;

inline double arg_as_double(std::span<const ArgValue> args, std::size_t i, const char* kernel) {
  if (i >= args.size())
    throw Error(ErrorCode::BadKernelArgs, std::string(kernel) + ": missing argument " + std::to_string(i));
  if (const auto* d = std::get_if<double>(&args[i])) return *d;
  return static_cast<double>(std::get<std::int64_t>(args[i]));
}

inline std::uint64_t arg_as_u64(std::span<const ArgValue> args, std::size_t i, const char* kernel) {
  if (i >= args.size())
    throw Error(ErrorCode::BadKernelArgs, std::string(kernel) + ": missing argument " + std::to_string(i));
  const auto* v = std::get_if<std::int64_t>(&args[i]);
  if (!v || *v < 0)
    throw Error(ErrorCode::BadKernelArgs,
                std::string(kernel) + ": argument " + std::to_string(i) + " must be a non-negative integer");
  return static_cast<std::uint64_t>(*v);
}

// ---------------------------------------------------------------------------
// Mandelbrot

struct MandelParams {
  std::uint64_t width = 0;
  std::uint64_t height = 0;
  std::uint32_t max_iterations = 1;
  double x0 = -2.5, y0 = -1.25, x1 = 1.0, y1 = 1.25;
};

/// Escape-time count: z <- z^2 + c in double precision, escape radius 2,
/// capped at max_iterations. Shared by the kernel and its cost model.
inline std::uint32_t mandel_escape_count(double cx, double cy, std::uint32_t max_iterations) {
  double zx = 0.0, zy = 0.0;
  std::uint32_t count = 0;
  while (count < max_iterations) {
    const double xx = zx * zx;
    const double yy = zy * zy;
    if (xx + yy > 4.0) break;
    zy = 2.0 * zx * zy + cy;
    zx = xx - yy + cx;
    ++count;
  }
  return count;
}

/// Pixel index -> complex plane point. Pixel (px, py) maps to
/// (x0 + px*(x1-x0)/width, y0 + py*(y1-y0)/height).
inline std::uint32_t mandel_count_for_index(std::uint64_t index, const MandelParams& p) {
  const std::uint64_t px = index % p.width;
  const std::uint64_t py = index / p.width;
  const double cx = p.x0 + static_cast<double>(px) * (p.x1 - p.x0) / static_cast<double>(p.width);
  const double cy = p.y0 + static_cast<double>(py) * (p.y1 - p.y0) / static_cast<double>(p.height);
  return mandel_escape_count(cx, cy, p.max_iterations);
}

/// Args: width, height, max_iterations, x0, y0, x1, y1.
inline MandelParams mandel_params_from(const ValidatedProgram& prog) {
  const auto args = std::span<const ArgValue>(prog.spec().args);
  MandelParams p;
  p.width = arg_as_u64(args, 0, "mandelbrot");
  p.height = arg_as_u64(args, 1, "mandelbrot");
  p.max_iterations = static_cast<std::uint32_t>(arg_as_u64(args, 2, "mandelbrot"));
  if (args.size() >= 7) {
    p.x0 = arg_as_double(args, 3, "mandelbrot");
    p.y0 = arg_as_double(args, 4, "mandelbrot");
    p.x1 = arg_as_double(args, 5, "mandelbrot");
    p.y1 = arg_as_double(args, 6, "mandelbrot");
  }
  if (p.width == 0 || p.height == 0 || p.max_iterations == 0)
    throw Error(ErrorCode::BadKernelArgs, "mandelbrot: width, height and max_iterations must be positive");
  if (p.width * p.height != prog.global_work_size())
    throw Error(ErrorCode::BadKernelArgs, "mandelbrot: width*height must equal global_work_size");
  return p;
}

// ---------------------------------------------------------------------------
// Synthetic cost profiles

enum class SyntheticProfile { Constant, Ramp, Step };

inline SyntheticProfile parse_synthetic_profile(const std::string& name) {
  if (name == "constant") return SyntheticProfile::Constant;
  if (name == "ramp") return SyntheticProfile::Ramp;
  if (name == "step") return SyntheticProfile::Step;
  throw Error(ErrorCode::UnknownProfile, "no synthetic cost profile named '" + name + "'");
}

/// constant: c (arg 0, default 1). ramp: 1 + i/gws. step: 1 for the first
/// half of the index space, `high` (arg 0, default 10) for the second.
inline double synthetic_cost(SyntheticProfile profile, std::uint64_t index, std::uint64_t gws,
                             std::span<const ArgValue> args) {
  switch (profile) {
    case SyntheticProfile::Constant:
      return args.empty() ? 1.0 : arg_as_double(args, 0, "synthetic");
    case SyntheticProfile::Ramp:
      return 1.0 + static_cast<double>(index) / static_cast<double>(gws);
    case SyntheticProfile::Step: {
      const double high = args.empty() ? 10.0 : arg_as_double(args, 0, "synthetic");
      return index < gws / 2 ? 1.0 : high;
    }
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Registry

enum class KernelKind { VecScale, Mandelbrot, Synthetic };

struct KernelInfo {
  KernelKind kind = KernelKind::VecScale;
  SyntheticProfile profile = SyntheticProfile::Constant;
};

/// Kernel ids: "vecscale", "mandelbrot", "synthetic:<profile>".
inline KernelInfo parse_kernel_id(const std::string& id) {
  if (id == "vecscale") return {KernelKind::VecScale, {}};
  if (id == "mandelbrot") return {KernelKind::Mandelbrot, {}};
  if (id.rfind("synthetic:", 0) == 0) return {KernelKind::Synthetic, parse_synthetic_profile(id.substr(10))};
  if (id == "synthetic") return {KernelKind::Synthetic, SyntheticProfile::Constant};
  throw Error(ErrorCode::UnknownKernel, "no kernel registered as '" + id + "'");
}

inline void check_buffer_shapes(const ValidatedProgram& prog, KernelKind kind) {
  const auto& spec = prog.spec();
  switch (kind) {
    case KernelKind::VecScale:
      if (spec.in_buffers.size() != 1 || spec.in_buffers[0].element_size_bytes != sizeof(double) ||
          spec.in_buffers[0].element_count != spec.global_work_size)
        throw Error(ErrorCode::BadKernelArgs, "vecscale expects one double input buffer of global_work_size elements");
      if (spec.out_buffers.size() != 1 || spec.out_buffers[0].element_size_bytes != sizeof(double))
        throw Error(ErrorCode::BadKernelArgs, "vecscale expects one double output buffer");
      if (spec.out_pattern != OutPattern{1, 1})
        throw Error(ErrorCode::BadKernelArgs, "vecscale writes with a 1:1 out pattern");
      break;
    case KernelKind::Mandelbrot:
      if (!spec.in_buffers.empty())
        throw Error(ErrorCode::BadKernelArgs, "mandelbrot reads no input buffers");
      if (spec.out_buffers.size() != 1 || spec.out_buffers[0].element_size_bytes != sizeof(std::uint32_t))
        throw Error(ErrorCode::BadKernelArgs, "mandelbrot expects one uint32 output buffer");
      if (spec.out_pattern != OutPattern{4, 1})
        throw Error(ErrorCode::BadKernelArgs, "mandelbrot writes with a 4:1 out pattern");
      break;
    case KernelKind::Synthetic:
      if (!spec.in_buffers.empty())
        throw Error(ErrorCode::BadKernelArgs, "synthetic kernels read no input buffers");
      if (spec.out_buffers.size() != 1 || spec.out_buffers[0].element_size_bytes != sizeof(double))
        throw Error(ErrorCode::BadKernelArgs, "synthetic kernels expect one double output buffer");
      if (spec.out_pattern != OutPattern{1, 1})
        throw Error(ErrorCode::BadKernelArgs, "synthetic kernels write with a 1:1 out pattern");
      break;
  }
}

/// Resolves the registered kernel function. Validates argument and buffer
/// shapes once; the returned callable is pure and lock-free.
inline KernelFn kernel_for(const ValidatedProgram& prog) {
  const KernelInfo info = parse_kernel_id(prog.spec().kernel);
  check_buffer_shapes(prog, info.kind);
  switch (info.kind) {
    case KernelKind::VecScale: {
      // out[i] = a*in[i] + b
      const double a = arg_as_double(prog.spec().args, 0, "vecscale");
      const double b = arg_as_double(prog.spec().args, 1, "vecscale");
      return [a, b](std::uint64_t i, std::span<const ArgValue>, const KernelBuffers& io) {
        io.output<double>(0)[i] = a * io.input<double>(0)[i] + b;
      };
    }
    case KernelKind::Mandelbrot: {
      const MandelParams params = mandel_params_from(prog);
      // Four identical count components per work-item (4:1 pattern).
      return [params](std::uint64_t i, std::span<const ArgValue>, const KernelBuffers& io) {
        const std::uint32_t count = mandel_count_for_index(i, params);
        auto out = io.output<std::uint32_t>(0);
        for (std::uint64_t c = 0; c < 4; ++c) out[4 * i + c] = count;
      };
    }
    case KernelKind::Synthetic: {
      const auto profile = info.profile;
      const std::uint64_t gws = prog.global_work_size();
      return [profile, gws](std::uint64_t i, std::span<const ArgValue> args, const KernelBuffers& io) {
        io.output<double>(0)[i] = synthetic_cost(profile, i, gws, args);
      };
    }
  }
  throw Error(ErrorCode::UnknownKernel, prog.spec().kernel);
}

/// Per-item simulated cost. Mandelbrot charges the exact escape count the
/// kernel itself computes; vecscale is unit cost; synthetic follows its
/// named profile.
inline CostFn cost_model_for(const ValidatedProgram& prog) {
  const KernelInfo info = parse_kernel_id(prog.spec().kernel);
  switch (info.kind) {
    case KernelKind::VecScale:
      return [](std::uint64_t) { return 1.0; };
    case KernelKind::Mandelbrot: {
      const MandelParams params = mandel_params_from(prog);
      return [params](std::uint64_t i) { return static_cast<double>(mandel_count_for_index(i, params)); };
    }
    case KernelKind::Synthetic: {
      const auto profile = info.profile;
      const std::uint64_t gws = prog.global_work_size();
      std::vector<ArgValue> args = prog.spec().args;
      return [profile, gws, args = std::move(args)](std::uint64_t i) {
        return synthetic_cost(profile, i, gws, args);
      };
    }
  }
  throw Error(ErrorCode::UnknownKernel, prog.spec().kernel);
}

/// Deterministic input data for a program, derived from the seed. vecscale
/// inputs are doubles in [0,1); kernels without inputs get nothing.
inline std::vector<std::vector<std::byte>> fill_default_inputs(const ValidatedProgram& prog, std::uint64_t seed) {
  auto splitmix = [](std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  std::vector<std::vector<std::byte>> inputs;
  std::uint64_t state = seed;
  for (const auto& buf : prog.spec().in_buffers) {
    std::vector<std::byte> bytes(buf.size_bytes());
    if (buf.element_size_bytes == sizeof(double)) {
      auto* values = reinterpret_cast<double*>(bytes.data());
      for (std::uint64_t i = 0; i < buf.element_count; ++i)
        values[i] = static_cast<double>(splitmix(state) >> 11) * 0x1.0p-53;
    } else {
      for (auto& b : bytes) b = static_cast<std::byte>(splitmix(state) & 0xff);
    }
    inputs.push_back(std::move(bytes));
  }
  return inputs;
}

/// Binary PGM of per-pixel iteration counts, scaled to 0..255.
inline void write_pgm(const std::filesystem::path& path, std::span<const std::uint32_t> counts_4to1,
                      std::uint64_t width, std::uint64_t height, std::uint32_t max_iterations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  out << "P5\n" << width << " " << height << "\n255\n";
  for (std::uint64_t i = 0; i < width * height; ++i) {
    const std::uint32_t count = counts_4to1[4 * i];
    const auto gray = static_cast<unsigned char>(count >= max_iterations ? 0 : 255 - (count * 255) / max_iterations);
    out.put(static_cast<char>(gray));
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

}  // namespace coexec
