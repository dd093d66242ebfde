#include "epcag/errors.hpp"
#include "epcag/harness.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Simulation and integral-manifold analysis of equations with piecewise constant argument"};
  app.set_version_flag("--version", epcag::version_string());
  app.require_subcommand(1);

  std::string config_file;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> step;
  std::optional<double> tol;

  for (const auto& name : epcag::recipe_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " recipe");
    sub->add_option("--config", config_file, "experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--step", step, "override solver.step")->check(CLI::PositiveNumber);
    sub->add_option("--tol", tol, "override solver.tol")->check(CLI::PositiveNumber);
  }
  app.add_subcommand("catalog", "list the built-in nonlinearities");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : epcag::kStatusConfig;
  }

  auto* sub = app.get_subcommands().front();
  if (sub->get_name() == "catalog") {
    std::cout << epcag::catalog_text();
    return 0;
  }

  epcag::Overrides overrides;
  overrides.recipe = sub->get_name();
  overrides.seed = seed;
  overrides.step = step;
  overrides.tol = tol;

  epcag::ExperimentConfig config;
  try {
    config = config_file.empty() ? epcag::parse_config("{}", overrides)
                                 : epcag::load_config(config_file, overrides);
  } catch (const epcag::Error& e) {
    epcag::write_error_record(out_dir, epcag::kStatusConfig, e, std::cerr);
    return epcag::kStatusConfig;
  }
  return epcag::run(config, out_dir, std::cout);
}
