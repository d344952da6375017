#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gridcap/feeders.hpp"
#include "gridcap/netmodel_io.hpp"
#include "gridcap/report.hpp"

namespace gridcap::cli {

enum class Command { Hc, Doe, Validate, Compare, GenNetwork };

constexpr std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::Hc: return "hc";
    case Command::Doe: return "doe";
    case Command::Validate: return "validate";
    case Command::Compare: return "compare";
    case Command::GenNetwork: return "gen-network";
  }
  return "?";
}

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitInfeasible = 2;

/// A bad command line. `flag()` names the offending option.
class UsageError : public Error {
 public:
  UsageError(std::string flag, const std::string& reason) : Error(reason), flag_(std::move(flag)) {}
  const std::string& flag() const noexcept { return flag_; }

 private:
  std::string flag_;
};

struct RunConfig {
  Command command = Command::Hc;
  std::filesystem::path network;
  std::filesystem::path profiles;
  std::filesystem::path output = ".";
  Direction direction = Direction::Export;
  std::vector<ScenarioKind> scenarios;      // empty: command default
  std::vector<Formulation> formulations;    // empty: command default
  double gap = 0.0;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
  bool dump_lp = false;
  double demand_scale = 1.0;
  std::string network_kind;                 // gen-network: cigre or synthetic64
};

/// Fills command defaults, applies GRIDCAP_SEED and checks ranges. Returns warnings.
inline std::vector<std::string> prepare(RunConfig& cfg) {
  std::vector<std::string> warnings;
  if (const char* env = std::getenv("GRIDCAP_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      cfg.seed = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
    } catch (const std::exception&) {
      throw UsageError("GRIDCAP_SEED", "GRIDCAP_SEED is not an unsigned integer: '" + std::string(env) + "'");
    }
  }
  if (cfg.workers < 1) throw UsageError("--workers", "--workers must be at least 1");
  if (!(cfg.gap >= 0.0 && cfg.gap < 1.0)) throw UsageError("--gap", "--gap must lie in [0, 1)");
  if (cfg.gap > 0.05)
    warnings.push_back("--gap " + std::to_string(cfg.gap) + " is above 0.05; the MILP result may be far from optimal");
  if (!(cfg.demand_scale > 0.0)) throw UsageError("--demand-scale", "--demand-scale must be positive");

  if (cfg.command == Command::GenNetwork) {
    if (cfg.network_kind != "cigre" && cfg.network_kind != "synthetic64")
      throw UsageError("kind", "gen-network kind must be cigre or synthetic64, got '" + cfg.network_kind + "'");
    return warnings;
  }
  if (cfg.network.empty()) throw UsageError("--network", "--network is required");
  if (cfg.profiles.empty()) throw UsageError("--profiles", "--profiles is required");

  if (cfg.scenarios.empty()) {
    if (cfg.command == Command::Compare)
      cfg.scenarios.assign(kScenarioKinds.begin(), kScenarioKinds.end());
    else
      cfg.scenarios = {cfg.command == Command::Validate ? ScenarioKind::S5_LoadedFixed : ScenarioKind::S1_Binaries};
  }
  if (cfg.formulations.empty()) {
    if (cfg.command == Command::Compare)
      cfg.formulations = {Formulation::LinDist3Flow, Formulation::CurrentVoltageSLP};
    else
      cfg.formulations = {cfg.command == Command::Validate ? Formulation::CurrentVoltageSLP : Formulation::LinDist3Flow};
  }
  if (cfg.command == Command::Doe && (cfg.scenarios.size() != 1 || cfg.formulations.size() != 1))
    throw UsageError("--scenario", "doe takes exactly one scenario and one formulation");
  return warnings;
}

namespace detail {

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

// Worker count and output location are left out so reports compare equal across runs.
inline nlohmann::json meta(const RunConfig& cfg) {
  nlohmann::json j{{"command", to_string(cfg.command)},
                   {"network", cfg.network.generic_string()},
                   {"profiles", cfg.profiles.generic_string()},
                   {"direction", to_string(cfg.direction)},
                   {"gap", cfg.gap},
                   {"seed", cfg.seed},
                   {"demand_scale", cfg.demand_scale},
                   {"dump_lp", cfg.dump_lp}};
  for (ScenarioKind k : cfg.scenarios) j["scenarios"].push_back(Scenario::make(k).name());
  for (Formulation f : cfg.formulations) j["formulations"].push_back(to_string(f));
  return j;
}

inline std::vector<Scenario> scenarios(const RunConfig& cfg) {
  std::vector<Scenario> out;
  for (ScenarioKind k : cfg.scenarios) out.push_back(Scenario::make(k, cfg.seed));
  return out;
}

inline void dump_lp(const RunConfig& cfg, const NetworkModel& net, const LoadProfile& profile,
                    const LoadProfile& demand, const Scenario& sc, const std::string& suffix, std::ostream& log) {
  const auto phases = snapshot_phases(net, profile, demand, sc, cfg.direction);
  const auto f = build_lin_problem(net, demand, cfg.direction, phases);
  const auto path = cfg.output / ("lp_" + sc.name() + suffix + ".mps");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_mps(f.problem.lp, out, "GRIDCAP_" + sc.name());
  log << "wrote " << path.generic_string() << '\n';
}

inline int gen_network(const RunConfig& cfg, std::ostream& log) {
  auto [net, profile] = cfg.network_kind == "cigre" ? build_cigre_lv(cfg.seed) : build_synthetic_feeder(cfg.seed);
  std::filesystem::create_directories(cfg.output);
  const auto net_path = cfg.output / "network.json";
  const auto prof_path = cfg.output / "profile.csv";
  write_network(net, net_path);
  write_profile(profile, net, prof_path);
  log << "wrote " << net_path.generic_string() << " (" << net.node_count() << " nodes) and "
      << prof_path.generic_string() << " (" << profile.horizon() << " periods)\n";
  return kExitOk;
}

inline int doe(const RunConfig& cfg, const NetworkModel& net, const LoadProfile& profile, nlohmann::json& report,
               std::ostream& log) {
  const auto sc = Scenario::make(cfg.scenarios.front(), cfg.seed);
  SolveOptions opt;
  opt.gap = cfg.gap;
  if (cfg.dump_lp) dump_lp(cfg, net, profile, profile.slice(0), sc, "_t0", log);
  const auto d = doe_solve(net, profile, cfg.direction, sc, cfg.formulations.front(), opt, cfg.workers);

  ComparisonTable table;
  table.direction = cfg.direction;
  ComparisonCell cell{sc, d.formulation, d.failed_periods() == 0 ? HcStatus::Optimal : HcStatus::Failed,
                      d.objective_kw};
  for (std::size_t t = 0; t < d.schedule.horizon; ++t) {
    cell.time_s += d.period_time_s[t];
    cell.gap = std::max(cell.gap, d.period_gap[t]);
  }
  if (d.failed_periods() > 0) cell.message = std::to_string(d.failed_periods()) + " period(s) failed";
  table.cells.push_back(cell);

  std::ostringstream csv, sched;
  table.write_csv(csv);
  d.write_schedule_csv(sched, net);
  write_text(cfg.output / "table.csv", csv.str());
  write_text(cfg.output / "schedule.csv", sched.str());
  report["results"] = to_json(table);
  report["per_period"] = to_json(d, net);
  report["diagnostics"] = nlohmann::json::array();
  log << "doe " << sc.name() << ' ' << to_string(d.formulation) << ": " << d.objective_kw << " kW x period over "
      << d.schedule.horizon << " periods, " << d.failed_periods() << " failed\n";
  return kExitOk;
}

inline int static_hc(const RunConfig& cfg, const NetworkModel& net, const LoadProfile& profile,
                     nlohmann::json& report, std::ostream& log) {
  SolveOptions opt;
  opt.gap = cfg.gap;
  const auto scs = scenarios(cfg);
  if (cfg.dump_lp) {
    const auto snap = worst_case_snapshot(profile, cfg.direction);
    for (const auto& sc : scs) dump_lp(cfg, net, profile, snap, sc, "", log);
  }
  std::vector<HcResult> results;
  const auto table = compare_scenarios(net, profile, cfg.direction, cfg.formulations, scs, opt, cfg.workers, &results);

  std::ostringstream csv;
  table.write_csv(csv);
  write_text(cfg.output / "table.csv", csv.str());
  report["results"] = to_json(table);
  report["diagnostics"] = nlohmann::json::array();
  report["schedules"] = nlohmann::json::array();

  bool base_infeasible = false, failed = false, voltages_written = false;
  for (const auto& r : results) {
    base_infeasible = base_infeasible || r.base_infeasible;
    failed = failed || !has_solution(r.status);
    const std::string tag = r.scenario.name() + "_" + std::string(to_string(r.formulation));
    nlohmann::json d{{"scenario", r.scenario.name()},
                     {"formulation", to_string(r.formulation)},
                     {"status", to_string(r.status)},
                     {"base_infeasible", r.base_infeasible}};
    d["report"] = to_json(r.base_infeasible ? r.diagnostic : r.certified, net);
    report["diagnostics"].push_back(std::move(d));
    report["schedules"].push_back(to_json(r, net));
    log << r.scenario.name() << ' ' << to_string(r.formulation) << ": " << to_string(r.status);
    if (has_solution(r.status)) log << ", " << r.objective_kw << " kW, certified violation " << r.certified_violation();
    if (!r.message.empty()) log << " (" << r.message << ')';
    log << '\n';

    if (!has_solution(r.status)) continue;
    try {
      const auto cmp = compare_voltages(net, r.snapshot, cfg.direction, r.schedule);
      std::ostringstream v;
      cmp.write_csv(v, net);
      if (!voltages_written) write_text(cfg.output / "voltages.csv", v.str());
      if (results.size() > 1) write_text(cfg.output / ("voltages_" + tag + ".csv"), v.str());
      voltages_written = true;
      if (cfg.command == Command::Validate) {
        auto acc = to_json(cmp, net);
        acc["scenario"] = r.scenario.name();
        acc["formulation"] = to_string(r.formulation);
        report["accuracy"].push_back(acc);
        if (const auto* w = cmp.worst())
          log << "  linear vs exact voltage: " << 100.0 * cmp.fraction_within(0.01)
              << "% of node-phases within 1%, worst " << 100.0 * w->deviation() << "% at " << net.node_name(w->node)
              << ' ' << to_string(w->phase) << '\n';
      }
    } catch (const Error& e) {
      log << "  voltage comparison unavailable: " << e.what() << '\n';
    }
  }
  if (base_infeasible) {
    for (const auto& r : results)
      if (r.base_infeasible) {
        log << "infeasible base case: " << r.message << '\n';
        break;
      }
    return kExitInfeasible;
  }
  // Compare tables mark failed cells; a plain hc run reports them as errors.
  return failed && cfg.command == Command::Hc ? kExitError : kExitOk;
}

}  // namespace detail

/// Executes one command. Errors in inputs are reported on `err` and mapped to exit 1.
inline int run(RunConfig cfg, std::ostream& log, std::ostream& err) {
  try {
    for (const auto& w : prepare(cfg)) err << "warning: " << w << '\n';
    if (cfg.command == Command::GenNetwork) return detail::gen_network(cfg, log);

    const auto net = load_network(cfg.network);
    auto profile = load_profile(cfg.profiles, net);
    if (cfg.demand_scale != 1.0) profile = profile.scaled(cfg.demand_scale);
    std::filesystem::create_directories(cfg.output);

    nlohmann::json report;
    report["meta"] = detail::meta(cfg);
    const int code = cfg.command == Command::Doe ? detail::doe(cfg, net, profile, report, log)
                                                 : detail::static_hc(cfg, net, profile, report, log);
    detail::write_text(cfg.output / "report.json", report.dump(2) + "\n");
    return code;
  } catch (const UsageError& e) {
    err << "usage error (" << e.flag() << "): " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace gridcap::cli
