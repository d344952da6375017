// Static hosting capacity and a day of operating envelopes on the CIGRE LV residential feeder.
#include <cstdio>
#include <iostream>
#include <string>

#include "gridcap/feeders.hpp"
#include "gridcap/scenarios.hpp"

using namespace gridcap;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
  auto [net, profile] = build_cigre_lv(seed);
  std::printf("CIGRE LV feeder: %zu nodes, %zu DER nodes, %zu periods\n\n", net.node_count(), net.der_nodes().size(),
              profile.horizon());

  std::vector<Scenario> scenarios;
  for (ScenarioKind k : kScenarioKinds) scenarios.push_back(Scenario::make(k, seed));
  for (Direction dir : {Direction::Export, Direction::Import}) {
    const auto table = compare_scenarios(net, profile, dir,
                                         {Formulation::LinDist3Flow, Formulation::CurrentVoltageSLP}, scenarios);
    std::printf("%s hosting capacity (kW)\n  scenario      lin      slp  lin violation\n",
                std::string(to_string(dir)).c_str());
    for (const auto& sc : scenarios) {
      const auto* lin = table.find(sc.kind, Formulation::LinDist3Flow);
      const auto* slp = table.find(sc.kind, Formulation::CurrentVoltageSLP);
      std::printf("  %-8s %8.1f %8.1f %14.4f\n", sc.name().c_str(), lin->objective_kw, slp->objective_kw,
                  lin->certified_violation);
    }
    std::printf("\n");
  }

  const auto doe = doe_solve(net, profile, Direction::Export, Scenario::make(ScenarioKind::S5_LoadedFixed),
                             Formulation::CurrentVoltageSLP);
  std::printf("export envelope, S5 slp: %zu failed periods\n  hour  total kW\n", doe.failed_periods());
  for (std::size_t t = 0; t < profile.horizon(); t += 8)
    std::printf("  %5.1f %9.1f\n", static_cast<double>(t * profile.step_minutes()) / 60.0,
                doe.schedule.period_objective_kw[t]);
  return 0;
}
