#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "coexec/coexec.hpp"

namespace {

std::vector<double> parse_props(const std::string& csv) {
  std::vector<double> props;
  std::stringstream in(csv);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      props.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw coexec::Error(coexec::ErrorCode::ConfigError, "--props expects comma-separated reals");
    }
  }
  return props;
}

struct RunFlags {
  std::string config_path;
  std::string scheduler;
  std::string props;
  std::uint64_t num_packages = 50;
  double k = 2.0;
  bool exclude_init = false;
  std::string out_dir;
  std::string format = "table";
  bool dump_pgm = false;
};

int cmd_run(const RunFlags& flags) {
  coexec::ExperimentConfig cfg = coexec::load_experiment(flags.config_path);
  if (!flags.scheduler.empty()) {
    coexec::SchedulerConfig override_cfg;
    if (flags.scheduler == "static") {
      coexec::StaticConfig s;
      if (!flags.props.empty()) s.proportions = parse_props(flags.props);
      override_cfg = coexec::resolve_static(s, cfg.devices);
    } else if (flags.scheduler == "dynamic") {
      override_cfg = coexec::DynamicConfig{flags.num_packages};
    } else if (flags.scheduler == "hguided") {
      coexec::HGuidedConfig h;
      h.k = flags.k;
      override_cfg = h;
    } else {
      throw coexec::Error(coexec::ErrorCode::ConfigError,
                          "--scheduler must be static, dynamic or hguided");
    }
    cfg.schedulers = {override_cfg};
  }
  if (flags.exclude_init) cfg.exclude_init = true;
  if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;

  coexec::RunOptions opts;
  opts.write_csv = flags.format == "csv";
  opts.dump_pgm = flags.dump_pgm;
  opts.quiet = flags.format == "json";
  const auto result = coexec::run_experiment(cfg, opts);

  if (flags.format == "json") {
    std::ifstream summary(result.summary_file);
    std::cout << summary.rdbuf();
  } else {
    std::cout << "solo baselines (median t_total):\n";
    for (const auto& [id, ms] : result.solo_ms)
      std::cout << "  " << id << ": " << coexec::format_double(ms) << " ms\n";
    std::cout << "summary: " << result.summary_file.string() << "\n";
  }
  return 0;
}

int cmd_chart(const std::string& trace_path, std::string out_path) {
  const auto trace = coexec::load_trace_json(trace_path);
  if (out_path.empty())
    out_path = std::filesystem::path(trace_path).replace_extension(".svg").string();
  coexec::save_svg(trace, out_path);
  std::cout << out_path << "\n";
  return 0;
}

int cmd_model(const coexec::CodeCostQuery& query, const std::string& format) {
  const auto table = coexec::code_cost(query);
  if (format == "json")
    std::cout << coexec::to_json(table).dump(2) << "\n";
  else
    std::cout << coexec::render_table(table);
  return 0;
}

int cmd_validate(const std::string& config_path) {
  const auto cfg = coexec::load_experiment(config_path);
  const auto prog = coexec::validate_program(cfg.program);
  std::cout << "ok: " << cfg.program.kernel << ", gws " << prog.global_work_size() << ", lws "
            << prog.local_work_size() << ", " << prog.total_work_groups() << " work-groups, "
            << cfg.devices.size() << " devices, " << cfg.schedulers.size() << " schedulers, "
            << cfg.repetitions << " repetitions (" << cfg.warmup_discard << " warm-up)\n";
  for (const auto& s : cfg.schedulers) std::cout << "  " << coexec::describe(s) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"co-execution runtime: partition one data-parallel kernel across unequal devices"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run an experiment config (scheduler matrix + solo baselines)");
  run->add_option("config", run_flags.config_path, "experiment JSON file")->required();
  run->add_option("--scheduler", run_flags.scheduler, "override the matrix: static|dynamic|hguided");
  run->add_option("--props", run_flags.props, "static proportions, comma-separated");
  run->add_option("--num-packages", run_flags.num_packages, "dynamic package count");
  run->add_option("--k", run_flags.k, "hguided k constant");
  run->add_flag("--exclude-init", run_flags.exclude_init, "exclude engine construction from t_total");
  run->add_option("--out-dir", run_flags.out_dir, "override the config's output directory");
  run->add_option("--format", run_flags.format, "table|json|csv")
      ->check(CLI::IsMember({"table", "json", "csv"}));
  run->add_flag("--dump-pgm", run_flags.dump_pgm, "dump mandelbrot iteration counts as PGM");

  std::string trace_path, svg_path;
  auto* chart = app.add_subcommand("chart", "render a trace file as an SVG package chart");
  chart->add_option("trace", trace_path, "trace JSON file")->required();
  chart->add_option("-o,--output", svg_path, "output SVG path (default: trace path with .svg)");

  coexec::CodeCostQuery query;
  std::string model_format = "table";
  auto* model = app.add_subcommand("model", "analytical code-cost model per runtime primitive");
  model->add_option("--platforms", query.platforms, "platform count");
  model->add_option("--devices", query.devices, "device count");
  model->add_option("--programs", query.programs, "program count");
  model->add_option("--kernels", query.kernels, "kernels per program");
  model->add_option("--args", query.args, "arguments per kernel");
  model->add_option("--buffers", query.buffers, "buffers per program");
  model->add_option("--format", model_format, "table|json")->check(CLI::IsMember({"table", "json"}));

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "parse and validate an experiment config");
  validate->add_option("config", validate_path, "experiment JSON file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (chart->parsed()) return cmd_chart(trace_path, svg_path);
    if (model->parsed()) return cmd_model(query, model_format);
    if (validate->parsed()) return cmd_validate(validate_path);
  } catch (const coexec::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool config_error = e.code() == coexec::ErrorCode::ConfigError ||
                              e.code() == coexec::ErrorCode::NonDivisibleWorkSize ||
                              e.code() == coexec::ErrorCode::BadOutPattern ||
                              e.code() == coexec::ErrorCode::EmptyProgram ||
                              e.code() == coexec::ErrorCode::BadSchedulerConfig ||
                              e.code() == coexec::ErrorCode::UnknownKernel ||
                              e.code() == coexec::ErrorCode::UnknownProfile ||
                              e.code() == coexec::ErrorCode::BadKernelArgs ||
                              e.code() == coexec::ErrorCode::MalformedTrace;
    return config_error ? 1 : 2;
  } catch (const coexec::EngineFailure& e) {
    std::cerr << "error: engine failed with " << e.errors().size() << " error(s):\n";
    for (const auto& err : e.errors()) std::cerr << "  " << err.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
