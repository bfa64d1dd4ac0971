// qemc: command-line driver for the Monte Carlo campaigns.

#include <cstdint>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "qemc/campaign.hpp"
#include "qemc/common.hpp"

namespace cmp = qemc::campaign;

int main(int argc, char** argv) {
  CLI::App app{"Quantum-enhanced Markov chain Monte Carlo experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(qemc::code_version()));

  std::string config, out;
  bool quick = false, verbose = false;
  int jobs = -1;
  std::uint64_t seed = 0;
  app.add_option("--config", config, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--out", out, "Output directory (resumes if it holds a matching manifest)");
  app.add_flag("--quick", quick, "Reduced sizes and ensembles for a fast run");
  app.add_option("--jobs", jobs, "Worker threads; 0 uses all hardware threads")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", seed, "Base seed; instance k of every size uses seed + k");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  for (const auto& e : cmp::experiments()) app.add_subcommand(e.name, "Run the " + e.name + " campaign");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cmp::kExitOk : cmp::kExitConfig;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  cmp::RunOptions options;
  if (!config.empty()) options.config_path = config;
  if (!out.empty()) options.out = out;
  options.quick = quick;
  if (app.count("--jobs")) options.jobs = jobs;
  if (app.count("--seed")) options.seed = seed;
  return cmp::run_command(app.get_subcommands().front()->get_name(), options);
}
