#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "coexec/chart.hpp"
#include "coexec/config.hpp"
#include "coexec/engine.hpp"
#include "coexec/metrics.hpp"
#include "coexec/trace_io.hpp"
#include "coexec/workloads.hpp"

namespace coexec {

struct RunOptions {
  bool write_traces = true;
  bool write_csv = false;
  bool write_charts = true;
  bool dump_pgm = false;
  bool quiet = true;
};

struct SchedulerOutcome {
  std::string name;  // file-name stem, e.g. "s0-hguided"
  SchedulerConfig config;
  std::vector<double> t_totals_ms;  // retained repetitions, run order
  std::size_t median_index = 0;     // into t_totals_ms
  ExecutionTrace median_trace;
  MetricsReport report;
  std::vector<std::filesystem::path> trace_files;
};

struct ExperimentResult {
  std::map<std::string, double> solo_ms;  // device id -> median solo t_total
  std::vector<SchedulerOutcome> outcomes;
  std::filesystem::path summary_file;
};

namespace experiment_detail {

/// Index of the median element by (t_total, run order); lower median for
/// even counts.
inline std::size_t median_index(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] < values[b];
    return a < b;
  });
  return order[(order.size() - 1) / 2];
}

inline std::string outcome_name(std::size_t index, const SchedulerConfig& cfg) {
  return "s" + std::to_string(index) + "-" + scheduler_kind(cfg);
}

}  // namespace experiment_detail

/// Repetition protocol for one engine configuration: runs `repetitions`
/// times, discards the first `warmup_discard`, and returns the retained
/// results (run order preserved).
inline std::vector<RunResult> run_repetitions(const EngineConfig& cfg, const ValidatedProgram& prog,
                                              std::span<const std::vector<std::byte>> inputs,
                                              std::uint32_t repetitions, std::uint32_t warmup_discard) {
  std::vector<RunResult> retained;
  retained.reserve(repetitions - warmup_discard);
  for (std::uint32_t rep = 0; rep < repetitions; ++rep) {
    Engine engine(cfg, prog);
    RunResult result = engine.run(inputs);
    if (rep >= warmup_discard) retained.push_back(std::move(result));
  }
  return retained;
}

/// The full harness behind `run`: every scheduler in the matrix plus one
/// solo baseline per device, traces and charts written under output_dir,
/// summary.json describing everything emitted.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  const ValidatedProgram prog = validate_program(cfg.program);
  const auto inputs = fill_default_inputs(prog, cfg.seed);
  std::filesystem::create_directories(cfg.output_dir);

  ExperimentResult result;

  // Solo baselines, one device at a time, same repetition protocol.
  for (const auto& dev : cfg.devices) {
    EngineConfig engine_cfg;
    engine_cfg.devices = {dev};
    engine_cfg.scheduler = StaticConfig{{1.0}, {dev.id}};
    engine_cfg.clock_mode = cfg.clock_mode;
    engine_cfg.seed = cfg.seed;
    engine_cfg.exclude_init_from_total = cfg.exclude_init;
    auto runs = run_repetitions(engine_cfg, prog, inputs, cfg.repetitions, cfg.warmup_discard);
    std::vector<double> totals;
    for (const auto& r : runs) totals.push_back(r.trace.t_total_ms);
    result.solo_ms[dev.id] = totals[experiment_detail::median_index(totals)];
  }
  std::vector<double> solo_times;
  for (const auto& [id, t] : result.solo_ms) solo_times.push_back(t);

  for (std::size_t s = 0; s < cfg.schedulers.size(); ++s) {
    SchedulerOutcome outcome;
    outcome.config = cfg.schedulers[s];
    outcome.name = experiment_detail::outcome_name(s, outcome.config);

    EngineConfig engine_cfg;
    engine_cfg.devices = cfg.devices;
    engine_cfg.scheduler = outcome.config;
    engine_cfg.clock_mode = cfg.clock_mode;
    engine_cfg.seed = cfg.seed;
    engine_cfg.exclude_init_from_total = cfg.exclude_init;

    auto runs = run_repetitions(engine_cfg, prog, inputs, cfg.repetitions, cfg.warmup_discard);
    for (std::size_t r = 0; r < runs.size(); ++r) {
      outcome.t_totals_ms.push_back(runs[r].trace.t_total_ms);
      if (opts.write_traces) {
        const auto stem = cfg.output_dir / (outcome.name + "-rep" + std::to_string(r));
        const auto json_path = stem.string() + ".trace.json";
        save_trace_json(runs[r].trace, json_path);
        outcome.trace_files.push_back(json_path);
        if (opts.write_csv) save_trace_csv(runs[r].trace, stem.string() + ".trace.csv");
      }
    }
    outcome.median_index = experiment_detail::median_index(outcome.t_totals_ms);
    outcome.median_trace = runs[outcome.median_index].trace;
    outcome.report = make_report(outcome.median_trace, solo_times);

    if (opts.write_charts)
      save_svg(outcome.median_trace, cfg.output_dir / (outcome.name + "-median.svg"));
    if (opts.dump_pgm && parse_kernel_id(cfg.program.kernel).kind == KernelKind::Mandelbrot) {
      const MandelParams params = mandel_params_from(prog);
      const auto& bytes = runs[outcome.median_index].outputs.at(0);
      write_pgm(cfg.output_dir / (outcome.name + ".pgm"),
                {reinterpret_cast<const std::uint32_t*>(bytes.data()), bytes.size() / 4},
                params.width, params.height, params.max_iterations);
    }
    if (!opts.quiet) {
      std::cout << outcome.name << "  " << describe(outcome.config) << "\n"
                << "  t_total (median): " << format_double(outcome.t_totals_ms[outcome.median_index])
                << " ms over " << outcome.t_totals_ms.size() << " retained runs\n"
                << render_table(outcome.report);
    }
    result.outcomes.push_back(std::move(outcome));
  }

  // summary.json: solo baselines plus one entry per scheduler.
  json summary{{"schema", 1},
               {"clock_mode", std::string(clock_mode_name(cfg.clock_mode))},
               {"seed", cfg.seed},
               {"repetitions", cfg.repetitions},
               {"warmup_discard", cfg.warmup_discard},
               {"program", to_json(cfg.program)},
               {"solo_ms", result.solo_ms}};
  json outcomes = json::array();
  for (const auto& outcome : result.outcomes) {
    json files = json::array();
    for (const auto& f : outcome.trace_files) files.push_back(f.filename().string());
    outcomes.push_back({{"name", outcome.name},
                        {"scheduler", to_json(outcome.config)},
                        {"description", describe(outcome.config)},
                        {"t_totals_ms", outcome.t_totals_ms},
                        {"median_t_total_ms", outcome.t_totals_ms[outcome.median_index]},
                        {"median_trace", outcome.trace_files.empty()
                                             ? json(nullptr)
                                             : json(outcome.trace_files[outcome.median_index].filename().string())},
                        {"metrics", to_json(outcome.report)},
                        {"trace_files", std::move(files)}});
  }
  summary["outcomes"] = std::move(outcomes);
  result.summary_file = cfg.output_dir / "summary.json";
  std::ofstream out(result.summary_file);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + result.summary_file.string() + "' for writing");
  out << summary.dump(2) << "\n";
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + result.summary_file.string() + "'");
  return result;
}

}  // namespace coexec
