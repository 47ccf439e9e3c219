#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "coexec/coexec.hpp"
#include "test_support.hpp"

using namespace coexec;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code;
  std::string output;  // stdout + stderr
};

CliResult run_cli(const std::string& args) {
  const std::string command = std::string(COEXEC_CLI) + " " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string output;
  char buffer[512];
  while (std::size_t n = std::fread(buffer, 1, sizeof(buffer), pipe)) output.append(buffer, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, output};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("coexec_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json sample_config(const fs::path& out_dir) {
  return json{
      {"schema", 1},
      {"program",
       {{"kernel", "synthetic:ramp"},
        {"global_work_size", 4000},
        {"local_work_size", 10},
        {"out_buffers", json::array({{{"name", "out"}, {"element_size_bytes", 8}, {"element_count", 4000}}})}}},
      {"devices",
       json::array({{{"id", "fast"}, {"computing_power", 32.0}, {"launch_overhead_ms", 0.25},
                     {"bandwidth_bytes_per_ms", 1048576.0}, {"backend", {{"kind", "simulated"}}}},
                    {{"id", "slow"}, {"computing_power", 8.0}, {"launch_overhead_ms", 0.5},
                     {"bandwidth_bytes_per_ms", 1048576.0}, {"backend", {{"kind", "simulated"}}}}})},
      {"schedulers", json::array({{{"type", "hguided"}, {"k", 2.0}},
                                  {{"type", "dynamic"}, {"num_packages", 8}}})},
      {"repetitions", 3},
      {"warmup_discard", 1},
      {"clock_mode", "virtual"},
      {"seed", 11},
      {"output_dir", out_dir.string()}};
}

fs::path write_config(const fs::path& dir, const json& config) {
  const fs::path path = dir / "experiment.json";
  std::ofstream out(path);
  out << config.dump(2);
  return path;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace

TEST_CASE("experiment config parses devices, schedulers and the protocol") {
  const auto dir = fresh_dir("cfg_parse");
  const auto path = write_config(dir, sample_config(dir / "out"));
  const auto cfg = load_experiment(path);
  CHECK(cfg.devices.size() == 2);
  CHECK(cfg.devices[0].id == "fast");
  CHECK(cfg.devices[0].min_package_work_groups == 4);  // heuristic 32/8
  CHECK(cfg.devices[1].min_package_work_groups == 1);
  CHECK(cfg.schedulers.size() == 2);
  CHECK(scheduler_kind(cfg.schedulers[0]) == "hguided");
  CHECK(cfg.repetitions == 3);
  CHECK(cfg.warmup_discard == 1);
  CHECK(cfg.clock_mode == ClockMode::Virtual);
  fs::remove_all(dir);
}

TEST_CASE("static scheduler configs resolve the n-1 proportion rule at load") {
  const auto dir = fresh_dir("cfg_static");
  auto config = sample_config(dir / "out");
  config["devices"].push_back({{"id", "third"}, {"computing_power", 2.0},
                               {"backend", {{"kind", "simulated"}}}});
  config["schedulers"] = json::array({{{"type", "static"}, {"proportions", {0.08, 0.3}}}});
  const auto cfg = load_experiment(write_config(dir, config));
  const auto& st = std::get<StaticConfig>(cfg.schedulers[0]);
  REQUIRE(st.proportions.size() == 3);
  CHECK_THAT(st.proportions[2], Catch::Matchers::WithinAbs(0.62, 1e-9));
  CHECK(st.device_order == std::vector<std::string>{"fast", "slow", "third"});
  fs::remove_all(dir);
}

TEST_CASE("experiment config rejects a non-dividing work size at load") {
  const auto dir = fresh_dir("cfg_bad_lws");
  auto config = sample_config(dir / "out");
  config["program"]["local_work_size"] = 7;
  REQUIRE_THROWS_MATCHES(load_experiment(write_config(dir, config)), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::NonDivisibleWorkSize;
                         }));
  fs::remove_all(dir);
}

TEST_CASE("experiment config rejects bad protocols and schemas") {
  const auto dir = fresh_dir("cfg_bad_proto");
  auto config = sample_config(dir / "out");
  config["warmup_discard"] = 3;
  REQUIRE_THROWS_AS(load_experiment(write_config(dir, config)), Error);
  config = sample_config(dir / "out");
  config["schema"] = 999;
  REQUIRE_THROWS_AS(load_experiment(write_config(dir, config)), Error);
  config = sample_config(dir / "out");
  config["schedulers"] = json::array();
  REQUIRE_THROWS_AS(load_experiment(write_config(dir, config)), Error);
  REQUIRE_THROWS_AS(load_experiment(dir / "missing.json"), Error);
  fs::remove_all(dir);
}

TEST_CASE("device profiles load from a referenced file") {
  const auto dir = fresh_dir("cfg_devfile");
  json profile{{"schema", 1},
               {"devices", json::array({{{"id", "gpu"}, {"computing_power", 2048.0},
                                         {"backend", {{"kind", "simulated"}}}},
                                        {{"id", "cpu"}, {"computing_power", 256.0},
                                         {"backend", {{"kind", "simulated"}}}}})}};
  {
    std::ofstream out(dir / "devices.json");
    out << profile.dump(2);
  }
  auto config = sample_config(dir / "out");
  config.erase("devices");
  config["devices_file"] = "devices.json";
  const auto cfg = load_experiment(write_config(dir, config));
  REQUIRE(cfg.devices.size() == 2);
  CHECK(cfg.devices[0].id == "gpu");
  CHECK(cfg.devices[0].min_package_work_groups == 8);  // 2048/256
  fs::remove_all(dir);
}

TEST_CASE("harness retains repetitions minus warm-up runs") {
  const auto dir = fresh_dir("harness_reps");
  auto config = sample_config(dir / "out");
  config["repetitions"] = 20;
  config["warmup_discard"] = 1;
  config["schedulers"] = json::array({{{"type", "dynamic"}, {"num_packages", 8}}});
  const auto cfg = load_experiment(write_config(dir, config));
  const auto result = run_experiment(cfg, {.write_charts = false});
  REQUIRE(result.outcomes.size() == 1);
  CHECK(result.outcomes[0].t_totals_ms.size() == 19);
  CHECK(result.outcomes[0].trace_files.size() == 19);
  fs::remove_all(dir);
}

TEST_CASE("single-device experiment reports balance 1") {
  const auto dir = fresh_dir("harness_single");
  auto config = sample_config(dir / "out");
  config["devices"] = json::array({{{"id", "solo"}, {"computing_power", 16.0},
                                    {"backend", {{"kind", "simulated"}}}}});
  config["schedulers"] = json::array({{{"type", "dynamic"}, {"num_packages", 4}}});
  const auto cfg = load_experiment(write_config(dir, config));
  const auto result = run_experiment(cfg);
  CHECK(result.outcomes[0].report.balance == 1.0);
  CHECK(fs::exists(result.summary_file));
  CHECK(fs::exists(dir / "out" / "s0-dynamic-median.svg"));
  fs::remove_all(dir);
}

TEST_CASE("virtual experiments rerun byte-identically") {
  const auto dir = fresh_dir("harness_determinism");
  auto config = sample_config(dir / "out_a");
  auto cfg = load_experiment(write_config(dir, config));
  run_experiment(cfg, {.write_charts = false});
  cfg.output_dir = dir / "out_b";
  run_experiment(cfg, {.write_charts = false});

  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(dir / "out_a")) {
    const auto other = dir / "out_b" / entry.path().filename();
    REQUIRE(fs::exists(other));
    REQUIRE(slurp(entry.path()) == slurp(other));
    ++compared;
  }
  CHECK(compared > 2);
  fs::remove_all(dir);
}

TEST_CASE("summary metrics recompute exactly from the emitted median trace") {
  const auto dir = fresh_dir("harness_recompute");
  const auto cfg = load_experiment(write_config(dir, sample_config(dir / "out")));
  const auto result = run_experiment(cfg, {.write_charts = false});

  const json summary = load_json_file(result.summary_file);
  const auto solo_map = summary.at("solo_ms").get<std::map<std::string, double>>();
  std::vector<double> solo_times;
  for (const auto& [id, t] : solo_map) solo_times.push_back(t);

  for (const auto& outcome : summary.at("outcomes")) {
    const auto trace = load_trace_json(dir / "out" / outcome.at("median_trace").get<std::string>());
    const auto recomputed = make_report(trace, solo_times);
    CHECK(recomputed == report_from_json(outcome.at("metrics")));
    CHECK(trace.t_total_ms == outcome.at("median_t_total_ms").get<double>());
  }
  fs::remove_all(dir);
}

TEST_CASE("csv traces are written on request") {
  const auto dir = fresh_dir("harness_csv");
  auto config = sample_config(dir / "out");
  config["repetitions"] = 1;
  config["warmup_discard"] = 0;
  config["schedulers"] = json::array({{{"type", "dynamic"}, {"num_packages", 8}}});
  const auto cfg = load_experiment(write_config(dir, config));
  run_experiment(cfg, {.write_csv = true, .write_charts = false});
  const auto csv = slurp(dir / "out" / "s0-dynamic-rep0.trace.csv");
  CHECK(csv.rfind("seq,device_id,", 0) == 0);
  CHECK(csv.find("fast") != std::string::npos);
  fs::remove_all(dir);
}

// ---------------------------------------------------------------------------
// CLI end-to-end

TEST_CASE("cli model reports the worked example values") {
  const auto result = run_cli("model --devices 3 --buffers 3");
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("135") != std::string::npos);
  const auto with_programs = run_cli("model --devices 3 --buffers 3 --programs 1");
  CHECK(with_programs.output.find("18") != std::string::npos);
}

TEST_CASE("cli model defaults print every constant row") {
  const auto result = run_cli("model");
  CHECK(result.exit_code == 0);
  for (const char* fragment : {"Device", "Context", "CommandQueue", "Buffer", "Program", "Kernel", "Arg"})
    CHECK(result.output.find(fragment) != std::string::npos);
  const auto zero = run_cli("model --devices 0 --format json");
  CHECK(zero.output.find("\"total_loc\": 3") != std::string::npos);  // only the Device row survives
}

TEST_CASE("cli validate accepts a good config and rejects a broken one") {
  const auto dir = fresh_dir("cli_validate");
  const auto good = write_config(dir, sample_config(dir / "out"));
  const auto ok = run_cli("validate " + good.string());
  CHECK(ok.exit_code == 0);
  CHECK(ok.output.rfind("ok:", 0) == 0);

  auto broken = sample_config(dir / "out");
  broken["program"]["local_work_size"] = 7;
  const auto bad_path = dir / "broken.json";
  {
    std::ofstream out(bad_path);
    out << broken.dump(2);
  }
  const auto bad = run_cli("validate " + bad_path.string());
  CHECK(bad.exit_code == 1);
  CHECK(bad.output.find("NonDivisibleWorkSize") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("cli run emits traces, summary and charts") {
  const auto dir = fresh_dir("cli_run");
  const auto path = write_config(dir, sample_config(dir / "out"));
  const auto result = run_cli("run " + path.string());
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("solo baselines") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "summary.json"));
  CHECK(fs::exists(dir / "out" / "s0-hguided-rep0.trace.json"));
  CHECK(fs::exists(dir / "out" / "s0-hguided-median.svg"));

  // scheduler override narrows the matrix to one entry
  const auto only = run_cli("run " + path.string() + " --scheduler dynamic --num-packages 5 --out-dir " +
                            (dir / "out2").string());
  CHECK(only.exit_code == 0);
  CHECK(fs::exists(dir / "out2" / "s0-dynamic-rep0.trace.json"));
  CHECK_FALSE(fs::exists(dir / "out2" / "s1-dynamic-rep0.trace.json"));
  fs::remove_all(dir);
}

TEST_CASE("cli chart renders an emitted trace") {
  const auto dir = fresh_dir("cli_chart");
  const auto path = write_config(dir, sample_config(dir / "out"));
  REQUIRE(run_cli("run " + path.string() + " --format json").exit_code == 0);
  const auto trace_path = dir / "out" / "s1-dynamic-rep0.trace.json";
  const auto svg_path = dir / "chart.svg";
  const auto result = run_cli("chart " + trace_path.string() + " -o " + svg_path.string());
  CHECK(result.exit_code == 0);
  const auto svg = slurp(svg_path);
  CHECK(svg.rfind("<svg", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("cli run exits 2 on runtime failures") {
  const auto dir = fresh_dir("cli_exit2");
  auto config = sample_config(dir / "blocked");
  const auto path = write_config(dir, config);
  {
    std::ofstream out(dir / "blocked");  // output_dir path occupied by a file
    out << "in the way";
  }
  const auto result = run_cli("run " + path.string());
  CHECK(result.exit_code == 2);
  fs::remove_all(dir);
}

TEST_CASE("cli rejects an unknown scheduler override") {
  const auto dir = fresh_dir("cli_bad_sched");
  const auto path = write_config(dir, sample_config(dir / "out"));
  const auto result = run_cli("run " + path.string() + " --scheduler roulette");
  CHECK(result.exit_code == 1);
  fs::remove_all(dir);
}
