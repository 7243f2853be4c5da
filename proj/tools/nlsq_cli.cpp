// nlsq: command-line driver for nonlinear-squeezing readout experiments.
//
//   nlsq sweep       --config PATH [--out DIR] [--seed U64] [--mode full|quick] [--threads N]
//   nlsq certify     --config PATH ...
//   nlsq reconstruct --config PATH ...
//   nlsq state-info  [--config PATH]
//
// Exit codes: 0 success, 2 configuration error, 3 numerical error.

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "nlsq/config.hpp"
#include "nlsq/errors.hpp"
#include "nlsq/runner.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  unsigned threads = 0;
};

void add_common(CLI::App* cmd, Options& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config, "experiment configuration file");
  if (config_required) c->required();
  cmd->add_option("--out", o.out, "output directory (overrides output.dir)");
  cmd->add_option("--seed", o.seed, "base seed (overrides ensemble.base_seed)");
  cmd->add_option("--mode", o.mode, "full or quick (overrides mode)")->check(CLI::IsMember({"full", "quick"}));
  cmd->add_option("--threads", o.threads, "worker threads, 0 = all cores");
}

nlsq::ExperimentConfig resolve(const Options& o) {
  nlsq::ExperimentConfig cfg = o.config.empty() ? nlsq::ExperimentConfig{} : nlsq::load_config(o.config);
  if (o.out) cfg.out_dir = *o.out;
  if (o.seed) cfg.base_seed = *o.seed;
  if (o.mode) cfg.mode = nlsq::parse_run_mode(*o.mode);
  cfg.validate();
  return cfg;
}

void print_outputs(const nlsq::OutputPaths& p) {
  std::cout << "wrote " << p.csv.string() << "\n"
            << "wrote " << p.json.string() << "\n"
            << "wrote " << p.timing.string() << "\n";
}

int run(const std::string& command, const Options& o) {
  const auto cfg = resolve(o);
  if (command == "state-info") {
    const auto info = nlsq::state_info(cfg);
    std::cout << info.dump(2) << "\n";
    if (o.out) {
      const auto dir = nlsq::prepare_output_dir(cfg.out_dir);
      nlsq::write_text(dir / (cfg.name + ".state.json"), info.dump(2) + "\n");
    }
    return 0;
  }
  if (command == "sweep") {
    const auto report = nlsq::run_sweep(cfg, o.threads);
    print_outputs(nlsq::write_report(report, command));
    return 0;
  }
  const auto report = nlsq::run_single(cfg, o.threads);
  if (command == "reconstruct") {
    print_outputs(nlsq::write_report(report, command));
    return 0;
  }
  const auto cert = nlsq::certify(cfg, report);
  const auto j = nlsq::to_json(cert);
  print_outputs(nlsq::write_report(report, command, {{"certificate", j}}));
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear squeezing readout simulator"};
  app.require_subcommand(1);
  Options opts;
  add_common(app.add_subcommand("sweep", "ensemble reconstructions along a parameter sweep"), opts, true);
  add_common(app.add_subcommand("certify", "nonclassicality certificate from one ensemble"), opts, true);
  add_common(app.add_subcommand("reconstruct", "one ensemble at the configured channel"), opts, true);
  add_common(app.add_subcommand("state-info", "exact moments and squeezing curve of a state"), opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    return run(app.get_subcommands().front()->get_name(), opts);
  } catch (const nlsq::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlsq::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
