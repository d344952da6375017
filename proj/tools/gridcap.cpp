#include <iostream>

#include <CLI11.hpp>

#include "gridcap/cli.hpp"

using namespace gridcap;

namespace {

void add_solve_options(CLI::App& sub, cli::RunConfig& cfg, std::string& direction, std::vector<std::string>& scenarios,
                       std::vector<std::string>& formulations) {
  sub.add_option("--network", cfg.network, "Network JSON file");
  sub.add_option("--profiles", cfg.profiles, "Demand profile CSV");
  sub.add_option("--direction", direction, "export or import")->capture_default_str();
  sub.add_option("--scenario", scenarios, "Scenarios S1..S5 (repeat or comma separated)")->delimiter(',');
  sub.add_option("--formulation", formulations, "lin or slp (repeat or comma separated)")->delimiter(',');
  sub.add_option("--gap", cfg.gap, "Relative MILP optimality gap")->capture_default_str();
  sub.add_option("--seed", cfg.seed, "Seed of the random phase scenarios (GRIDCAP_SEED overrides)")
      ->capture_default_str();
  sub.add_option("--workers", cfg.workers, "Worker threads")->capture_default_str();
  sub.add_option("--output", cfg.output, "Output directory")->capture_default_str();
  sub.add_option("--demand-scale", cfg.demand_scale, "Multiply every load by this factor")->capture_default_str();
  sub.add_flag("--dump-lp", cfg.dump_lp, "Write the linear programs as MPS files");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hosting capacity and dynamic operating envelopes of unbalanced LV feeders"};
  app.require_subcommand(1);
  cli::RunConfig cfg;
  std::string direction = "export";
  std::vector<std::string> scenarios, formulations;

  struct Sub {
    cli::Command command;
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {cli::Command::Hc, "hc", "Static hosting capacity on the worst-case snapshot"},
      {cli::Command::Doe, "doe", "Per-period operating envelope over the profile horizon"},
      {cli::Command::Validate, "validate", "Hosting capacity plus linear versus exact voltage comparison"},
      {cli::Command::Compare, "compare", "Scenario by formulation comparison table"},
  };
  for (const auto& s : subs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    add_solve_options(*sub, cfg, direction, scenarios, formulations);
    sub->callback([&cfg, c = s.command] { cfg.command = c; });
  }
  auto* gen = app.add_subcommand("gen-network", "Write a built-in feeder and its profile");
  gen->add_option("kind", cfg.network_kind, "cigre or synthetic64")->required();
  gen->add_option("--seed", cfg.seed, "Profile seed (GRIDCAP_SEED overrides)")->capture_default_str();
  gen->add_option("--output", cfg.output, "Output directory")->capture_default_str();
  gen->callback([&cfg] { cfg.command = cli::Command::GenNetwork; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return cli::kExitError;
  }

  try {
    const auto dir = parse_direction(direction);
    if (!dir) throw cli::UsageError("--direction", "--direction must be export or import, got '" + direction + "'");
    cfg.direction = *dir;
    for (const auto& s : scenarios) {
      try {
        cfg.scenarios.push_back(parse_scenario_kind(s));
      } catch (const ParseError& e) {
        throw cli::UsageError("--scenario", e.what());
      }
    }
    for (const auto& f : formulations) {
      try {
        cfg.formulations.push_back(parse_formulation(f));
      } catch (const ParseError& e) {
        throw cli::UsageError("--formulation", e.what());
      }
    }
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error (" << e.flag() << "): " << e.what() << '\n';
    return cli::kExitError;
  }
  return cli::run(cfg, std::cout, std::cerr);
}
