// eitsim command line: spectrum, stirap, oracle, sweep, validate.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "eitsim/cloud.hpp"
#include "eitsim/parallel.hpp"
#include "runners.hpp"

using namespace eitsim;

int main(int argc, char** argv) {
  CLI::App app{"Coupled-dipole simulator for EIT and STIRAP in cold Lambda-atom clouds"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
  int threads = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", overrides, "Override a key, e.g. --set lambda.omega1=0.2")
        ->take_all();
    sub->add_option("-o,--output", output_dir, "Output directory (overrides output_dir)");
    sub->add_option("-j,--threads", threads,
                    std::string("Worker threads (0: ") + kThreadsEnv + " or hardware)");
  };

  CLI::App* spectrum = app.add_subcommand("spectrum", "Disorder-averaged transmission spectrum");
  CLI::App* stirap = app.add_subcommand("stirap", "Population transfer under the pulse schedule");
  CLI::App* oracle = app.add_subcommand("oracle", "Single-atom closed-form table");
  CLI::App* sweep = app.add_subcommand("sweep", "Window width and depth over density or thickness");
  CLI::App* validate = app.add_subcommand("validate", "Run the quick invariant checks");
  bool print_config = false;
  for (CLI::App* sub : {spectrum, stirap, oracle, sweep, validate}) add_common(sub);
  app.add_flag("--print-defaults", print_config, "Print the default configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kConfigError;
  }
  if (print_config) {
    std::cout << cli::default_config().dump(2) << '\n';
    return cli::kOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return cli::kConfigError;
  }

  if (!output_dir.empty()) overrides.push_back("output_dir=\"" + output_dir + "\"");
  if (threads >= 0) overrides.push_back("threads=" + std::to_string(threads));

  cli::RunConfig config;
  try {
    config = cli::parse_config(cli::load_config(config_path, overrides));
  } catch (const cli::ConfigError& e) {
    std::cerr << e.what() << '\n';
    return cli::kConfigError;
  }

  try {
    if (spectrum->parsed()) return cli::run_spectrum(config);
    if (stirap->parsed()) return cli::run_stirap(config);
    if (oracle->parsed()) return cli::run_oracle(config);
    if (sweep->parsed()) return cli::run_sweep(config);
    return cli::run_validate(config);
  } catch (const PlacementError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kCheckFailed;
  }
}
