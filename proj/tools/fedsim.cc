// fedsim: run, sweep and validate federated-learning simulations.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fedsim/config.h"
#include "fedsim/error.h"
#include "fedsim/orchestrator.h"
#include "fedsim/report.h"

namespace {

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kParseError = 2,
  kValidationError = 3,
  kStarvation = 4,
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::string> out;
  std::optional<std::string> formats;
  std::optional<std::uint64_t> seed;
};

void AddCommon(CLI::App* cmd, CommonOptions& opts, bool with_output) {
  cmd->add_option("--config", opts.config_path, "run-config JSON file")
      ->required();
  cmd->add_option("--seed", opts.seed, "override the config seed");
  if (with_output) {
    cmd->add_option("--out", opts.out,
                    "output directory (else config, else $FEDSIM_OUT)");
    cmd->add_option("--format", opts.formats, "comma list of csv,json");
  }
}

fedsim::RunConfig LoadWithOverrides(const CommonOptions& opts) {
  fedsim::RunConfig config = fedsim::LoadRunConfig(opts.config_path);
  if (opts.seed) config.seed = *opts.seed;
  if (opts.formats) {
    config.report_formats.clear();
    std::stringstream ss(*opts.formats);
    std::string f;
    while (std::getline(ss, f, ',')) {
      if (f == "csv") {
        config.report_formats.push_back(fedsim::ReportFormat::kCsv);
      } else if (f == "json") {
        config.report_formats.push_back(fedsim::ReportFormat::kJson);
      } else {
        throw fedsim::ConfigError(fedsim::ConfigError::Kind::kParse,
                                  fmt::format("--format: unknown format '{}'", f));
      }
    }
  }
  return config;
}

std::string OutputDir(const CommonOptions& opts,
                      const fedsim::RunConfig& config) {
  if (opts.out) return *opts.out;
  if (config.output_directory) return *config.output_directory;
  if (const char* env = std::getenv("FEDSIM_OUT"); env && *env) return env;
  return "fedsim_out";
}

int CmdRun(const CommonOptions& opts) {
  const auto config = LoadWithOverrides(opts);
  const auto prepared = fedsim::Prepare(config);
  const auto report = fedsim::Run(prepared.plan);
  const std::string dir = OutputDir(opts, config);
  fedsim::WriteRunFiles(dir, config, prepared, report);
  const auto& last = report.rounds.back().global_metrics;
  std::cout << fmt::format(
      "{} rounds, sim-time {} s, final loss {:.6f} accuracy {:.4f}; wrote {}\n",
      report.rounds.size(), fedsim::FormatSeconds(report.total_sim_time),
      last.loss, last.accuracy, dir);
  return kOk;
}

int CmdSweep(const CommonOptions& opts, const std::string& variable,
             const std::vector<std::string>& values) {
  fedsim::SweepVariable var;
  try {
    var = fedsim::ParseSweepVariable(variable);
  } catch (const fedsim::InvalidArgument& e) {
    throw fedsim::ConfigError(fedsim::ConfigError::Kind::kValidation, e.what());
  }
  if (values.empty()) {
    throw fedsim::ConfigError(fedsim::ConfigError::Kind::kValidation,
                              "sweep: --values must list at least one value");
  }
  const auto config = LoadWithOverrides(opts);
  const std::string dir = OutputDir(opts, config);
  const auto runs = fedsim::RunSweep(config, var, values, dir);
  for (const auto& run : runs) {
    std::cout << fmt::format("{}={}: sim-time {} s, final accuracy {:.4f}\n",
                             variable, run.value,
                             fedsim::FormatSeconds(run.report.total_sim_time),
                             run.report.rounds.back().global_metrics.accuracy);
  }
  std::cout << "wrote " << dir << "/comparison.csv\n";
  return kOk;
}

int CmdValidate(const CommonOptions& opts) {
  const auto config = LoadWithOverrides(opts);
  const auto prepared = fedsim::Prepare(config);
  std::cout << fmt::format("config ok: {}\n", opts.config_path);
  std::cout << fmt::format("parameter count: {}\n", config.model.ParameterCount());
  std::cout << fmt::format("clients: {} initial, {} events\n",
                           prepared.plan.clients.size(),
                           prepared.plan.events.size());
  std::cout << fmt::format("static sim-time: {} s\n",
                           fedsim::FormatSeconds(prepared.static_sim_time));
  if (prepared.centralized_time) {
    std::cout << fmt::format(
        "centralized time: {} s (reduction {:.2f}%)\n",
        fedsim::FormatSeconds(*prepared.centralized_time),
        100.0 * (1.0 - prepared.static_sim_time / *prepared.centralized_time));
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic federated-learning simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts, sweep_opts, validate_opts;
  auto* run = app.add_subcommand("run", "execute one simulation");
  AddCommon(run, run_opts, true);

  std::string variable;
  std::vector<std::string> values;
  auto* sweep = app.add_subcommand("sweep", "run one simulation per value");
  AddCommon(sweep, sweep_opts, true);
  sweep->add_option("--variable", variable, "client-count | N_r | policy")
      ->required();
  sweep->add_option("--values", values, "comma-separated values")
      ->delimiter(',');

  auto* validate = app.add_subcommand("validate", "check a config without running");
  AddCommon(validate, validate_opts, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return CmdRun(run_opts);
    if (sweep->parsed()) return CmdSweep(sweep_opts, variable, values);
    if (validate->parsed()) return CmdValidate(validate_opts);
  } catch (const fedsim::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == fedsim::ConfigError::Kind::kParse ? kParseError
                                                         : kValidationError;
  } catch (const fedsim::PolicyStarvation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kStarvation;
  } catch (const fedsim::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kRuntimeError;
}
