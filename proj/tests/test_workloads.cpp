#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <filesystem>
#include <fstream>

#include "coexec/workloads.hpp"
#include "test_support.hpp"

using namespace coexec;

namespace {

ProgramSpec vecscale_spec(std::uint64_t gws, std::uint64_t lws, double a, double b) {
  ProgramSpec spec;
  spec.kernel = "vecscale";
  spec.global_work_size = gws;
  spec.local_work_size = lws;
  spec.args = {a, b};
  spec.in_buffers.push_back({"in", 8, gws, BufferRole::Input});
  spec.out_buffers.push_back({"out", 8, gws, BufferRole::Output});
  return spec;
}

ProgramSpec mandelbrot_spec(std::uint64_t width, std::uint64_t height, std::int64_t max_iter,
                            std::uint64_t lws = 64) {
  ProgramSpec spec;
  spec.kernel = "mandelbrot";
  spec.global_work_size = width * height;
  spec.local_work_size = lws;
  spec.out_pattern = {4, 1};
  spec.args = {static_cast<std::int64_t>(width), static_cast<std::int64_t>(height), max_iter,
               -2.5, -1.25, 1.0, 1.25};
  spec.out_buffers.push_back({"counts", 4, width * height * 4, BufferRole::Output});
  return spec;
}

ProgramSpec synthetic_spec(const std::string& profile, std::uint64_t gws, std::uint64_t lws) {
  ProgramSpec spec;
  spec.kernel = "synthetic:" + profile;
  spec.global_work_size = gws;
  spec.local_work_size = lws;
  spec.out_buffers.push_back({"out", 8, gws, BufferRole::Output});
  return spec;
}

std::vector<std::vector<std::byte>> output_storage(const ValidatedProgram& prog) {
  std::vector<std::vector<std::byte>> outputs;
  for (const auto& buf : prog.spec().out_buffers) outputs.emplace_back(buf.size_bytes());
  return outputs;
}

void run_all_items(const ValidatedProgram& prog, const KernelFn& kernel,
                   std::span<const std::vector<std::byte>> inputs,
                   std::span<std::vector<std::byte>> outputs) {
  KernelBuffers io(inputs, outputs);
  for (std::uint64_t i = 0; i < prog.global_work_size(); ++i)
    kernel(i, prog.spec().args, io);
}

}  // namespace

TEST_CASE("vecscale computes a*x + b") {
  const auto prog = validate_program(vecscale_spec(128, 128, 2.0, 1.0));
  const auto kernel = kernel_for(prog);
  std::vector<std::vector<std::byte>> inputs(1, std::vector<std::byte>(128 * 8));
  auto outputs = output_storage(prog);
  reinterpret_cast<double*>(inputs[0].data())[5] = 3.0;
  run_all_items(prog, kernel, inputs, outputs);
  CHECK(reinterpret_cast<const double*>(outputs[0].data())[5] == 7.0);
}

TEST_CASE("vecscale with a=1 b=0 is the identity") {
  const auto prog = validate_program(vecscale_spec(256, 64, 1.0, 0.0));
  const auto kernel = kernel_for(prog);
  const auto inputs = fill_default_inputs(prog, 99);
  auto outputs = output_storage(prog);
  run_all_items(prog, kernel, inputs, outputs);
  CHECK(outputs[0] == inputs[0]);
}

TEST_CASE("vecscale full range equals a scalar loop") {
  const auto prog = validate_program(vecscale_spec(4096, 128, 1.5, -0.25));
  const auto kernel = kernel_for(prog);
  const auto inputs = fill_default_inputs(prog, 7);
  auto outputs = output_storage(prog);
  run_all_items(prog, kernel, inputs, outputs);

  const auto* in = reinterpret_cast<const double*>(inputs[0].data());
  const auto* out = reinterpret_cast<const double*>(outputs[0].data());
  for (std::uint64_t i = 0; i < 4096; ++i) REQUIRE(out[i] == 1.5 * in[i] + -0.25);
}

TEST_CASE("mandelbrot never escapes at the origin") {
  CHECK(mandel_escape_count(0.0, 0.0, 500) == 500);
}

TEST_CASE("mandelbrot escapes immediately outside the radius") {
  CHECK(mandel_escape_count(2.0, 2.0, 500) == 1);
}

TEST_CASE("mandelbrot matches an independent escape-time loop on a 64x64 grid") {
  const MandelParams p{64, 64, 100, -2.5, -1.25, 1.0, 1.25};
  for (std::uint64_t py = 0; py < p.height; ++py) {
    for (std::uint64_t px = 0; px < p.width; ++px) {
      // brute-force reference via std::complex
      const std::complex<double> c(p.x0 + static_cast<double>(px) * (p.x1 - p.x0) / static_cast<double>(p.width),
                                   p.y0 + static_cast<double>(py) * (p.y1 - p.y0) / static_cast<double>(p.height));
      std::complex<double> z(0.0, 0.0);
      std::uint32_t reference = 0;
      while (reference < p.max_iterations && z.real() * z.real() + z.imag() * z.imag() <= 4.0) {
        z = z * z + c;
        ++reference;
      }
      const std::uint32_t count = mandel_count_for_index(py * p.width + px, p);
      REQUIRE(count == reference);
      REQUIRE((count == p.max_iterations) == (reference == p.max_iterations));
    }
  }
}

TEST_CASE("mandelbrot kernel writes four count components per item") {
  const auto prog = validate_program(mandelbrot_spec(16, 16, 64, 16));
  const auto kernel = kernel_for(prog);
  auto outputs = output_storage(prog);
  run_all_items(prog, kernel, {}, outputs);
  const auto* counts = reinterpret_cast<const std::uint32_t*>(outputs[0].data());
  const MandelParams p = mandel_params_from(prog);
  for (std::uint64_t i = 0; i < 256; ++i) {
    const std::uint32_t expected = mandel_count_for_index(i, p);
    for (int c = 0; c < 4; ++c) REQUIRE(counts[4 * i + c] == expected);
  }
}

TEST_CASE("kernels are pure: repeated evaluation is identical") {
  const auto prog = validate_program(mandelbrot_spec(32, 32, 128, 32));
  const auto kernel = kernel_for(prog);
  auto first = output_storage(prog);
  auto second = output_storage(prog);
  run_all_items(prog, kernel, {}, first);
  run_all_items(prog, kernel, {}, second);
  CHECK(first == second);
}

TEST_CASE("cost model: vecscale is unit cost") {
  const auto prog = validate_program(vecscale_spec(128, 128, 1.0, 0.0));
  const auto cost = cost_model_for(prog);
  CHECK(cost(0) == 1.0);
  CHECK(cost(127) == 1.0);
}

TEST_CASE("cost model: mandelbrot charges the exact escape count") {
  const auto prog = validate_program(mandelbrot_spec(32, 32, 77, 32));
  const auto cost = cost_model_for(prog);
  const MandelParams p = mandel_params_from(prog);
  for (std::uint64_t i = 0; i < 1024; i += 13)
    REQUIRE(cost(i) == static_cast<double>(mandel_count_for_index(i, p)));
  // the index at c=0 pays the full cap
  // (origin lies at px = width*2.5/3.5, py = height/2 for this viewport)
  CHECK(cost_model_for(prog)(0) == static_cast<double>(mandel_count_for_index(0, p)));
}

TEST_CASE("cost model: ramp profile is 1 + i/gws") {
  const auto prog = validate_program(synthetic_spec("ramp", 1000, 10));
  const auto cost = cost_model_for(prog);
  CHECK(cost(0) == 1.0);
  CHECK(cost(500) == 1.0 + 500.0 / 1000.0);
  CHECK(cost(999) == 1.0 + 999.0 / 1000.0);
}

TEST_CASE("cost model: constant and step profiles") {
  const auto constant = cost_model_for(validate_program(synthetic_spec("constant", 100, 10)));
  CHECK(constant(42) == 1.0);
  const auto step = cost_model_for(validate_program(synthetic_spec("step", 100, 10)));
  CHECK(step(0) == 1.0);
  CHECK(step(49) == 1.0);
  CHECK(step(50) == 10.0);
  CHECK(step(99) == 10.0);
}

TEST_CASE("synthetic kernel writes its own cost") {
  const auto prog = validate_program(synthetic_spec("ramp", 100, 10));
  const auto kernel = kernel_for(prog);
  const auto cost = cost_model_for(prog);
  auto outputs = output_storage(prog);
  run_all_items(prog, kernel, {}, outputs);
  const auto* out = reinterpret_cast<const double*>(outputs[0].data());
  for (std::uint64_t i = 0; i < 100; ++i) REQUIRE(out[i] == cost(i));
}

TEST_CASE("unknown kernels and profiles are rejected") {
  REQUIRE_THROWS_MATCHES(parse_kernel_id("warp-drive"), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == ErrorCode::UnknownKernel; }));
  REQUIRE_THROWS_MATCHES(parse_kernel_id("synthetic:spiky"), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == ErrorCode::UnknownProfile; }));
}

TEST_CASE("kernel buffer shapes are validated") {
  auto bad = vecscale_spec(128, 128, 1.0, 0.0);
  bad.in_buffers.clear();
  REQUIRE_THROWS_MATCHES(kernel_for(validate_program(bad)), Error,
                         Catch::Matchers::Predicate<Error>(
                             [](const Error& e) { return e.code() == ErrorCode::BadKernelArgs; }));

  auto wrong_pattern = mandelbrot_spec(16, 16, 10, 16);
  wrong_pattern.out_pattern = {1, 1};
  wrong_pattern.out_buffers[0].element_count = 256;
  REQUIRE_THROWS_AS(kernel_for(validate_program(wrong_pattern)), Error);

  auto wrong_geometry = mandelbrot_spec(16, 16, 10, 16);
  wrong_geometry.args[0] = std::int64_t{8};  // width*height != gws
  REQUIRE_THROWS_AS(kernel_for(validate_program(wrong_geometry)), Error);
}

TEST_CASE("default input fill is deterministic in the seed") {
  const auto prog = validate_program(vecscale_spec(512, 64, 1.0, 0.0));
  const auto a = fill_default_inputs(prog, 42);
  const auto b = fill_default_inputs(prog, 42);
  const auto c = fill_default_inputs(prog, 43);
  REQUIRE(a == b);
  REQUIRE(a != c);
  const auto* values = reinterpret_cast<const double*>(a[0].data());
  for (std::uint64_t i = 0; i < 512; ++i) {
    REQUIRE(values[i] >= 0.0);
    REQUIRE(values[i] < 1.0);
  }
}

TEST_CASE("pgm dump has the expected header and size") {
  const std::uint64_t w = 8, h = 4;
  std::vector<std::uint32_t> counts(4 * w * h, 3);
  const auto path = std::filesystem::temp_directory_path() / "coexec_test.pgm";
  write_pgm(path, counts, w, h, 10);
  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "P5");
  std::string dims;
  std::getline(in, dims);
  CHECK(dims == "8 4");
  std::getline(in, dims);
  CHECK(dims == "255");
  std::vector<char> pixels(w * h + 1);
  in.read(pixels.data(), static_cast<std::streamsize>(pixels.size()));
  CHECK(in.gcount() == static_cast<std::streamsize>(w * h));
  std::filesystem::remove(path);
}
