#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "trotter24/errors.hpp"
#include "trotter24/experiments.hpp"
#include "trotter24/version.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool dense_oracle = false;
};

trotter24::ExperimentConfig resolve(const GlobalFlags& flags) {
  trotter24::ExperimentConfig cfg = trotter24::load_experiment_config(flags.config);
  if (flags.out) cfg.out_dir = *flags.out;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.threads) cfg.threads = *flags.threads;
  if (flags.dense_oracle) cfg.dense_oracle = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive-stepsize Trotter24 experiments"};
  app.set_version_flag("--version", std::string(trotter24::kVersion));
  app.require_subcommand(1);

  GlobalFlags flags;
  app.add_option("--config", flags.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
  app.add_option("--out", flags.out, "output directory (overrides output_dir)");
  app.add_option("--seed", flags.seed, "seed for Lanczos start vectors and random states");
  app.add_option("--threads", flags.threads, "worker threads for parameter sweeps")->check(CLI::PositiveNumber);
  app.add_flag("--dense-oracle", flags.dense_oracle, "replay runs against exact dense evolution");

  using Command = int (*)(const trotter24::ExperimentConfig&, std::ostream&);
  const std::pair<const char*, Command> commands[] = {
      {"run", trotter24::cmd_run},
      {"bounds", trotter24::cmd_bounds},
      {"scaling", trotter24::cmd_scaling},
      {"compare-extrapolation", trotter24::cmd_compare_extrapolation},
      {"sweep-c", trotter24::cmd_sweep_c},
  };
  const char* help[] = {
      "run the adaptive controller and write a JSON-lines trace",
      "tabulate W norms and a priori step bounds over an L range",
      "tabulate one-step errors and estimators over a step-size grid",
      "compare fixed-step extrapolation with the adaptive controller",
      "sweep the safety constant C",
  };
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].first, help[i]);
    sub->fallthrough();
    subs.push_back(sub);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const trotter24::ExperimentConfig cfg = resolve(flags);
    for (std::size_t i = 0; i < subs.size(); ++i) {
      if (subs[i]->parsed()) return commands[i].second(cfg, std::cout);
    }
  } catch (const trotter24::ConfigError& e) {
    std::cerr << flags.config << ": " << e.what() << '\n';
    return 2;
  } catch (const trotter24::ControllerAbort& e) {
    std::cerr << "controller aborted at step " << e.step_index() << ": " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
