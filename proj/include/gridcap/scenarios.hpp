#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <memory>
#include <cstdint>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "gridcap/lindist.hpp"
#include "gridcap/slp.hpp"

namespace gridcap {

enum class ScenarioKind { S1_Binaries, S2_RandomPerPeriod, S3_RandomFixed, S4_LoadedPerPeriod, S5_LoadedFixed };

inline constexpr std::array<ScenarioKind, 5> kScenarioKinds{ScenarioKind::S1_Binaries, ScenarioKind::S2_RandomPerPeriod,
                                                            ScenarioKind::S3_RandomFixed, ScenarioKind::S4_LoadedPerPeriod,
                                                            ScenarioKind::S5_LoadedFixed};

struct Scenario {
  ScenarioKind kind = ScenarioKind::S1_Binaries;
  std::optional<std::uint64_t> seed;  // S2 and S3 only

  static Scenario make(ScenarioKind kind, std::uint64_t seed = 1) {
    const bool random = kind == ScenarioKind::S2_RandomPerPeriod || kind == ScenarioKind::S3_RandomFixed;
    return {kind, random ? std::optional<std::uint64_t>(seed) : std::nullopt};
  }

  bool is_random() const noexcept {
    return kind == ScenarioKind::S2_RandomPerPeriod || kind == ScenarioKind::S3_RandomFixed;
  }

  void validate() const {
    if (is_random() != seed.has_value()) throw ModelError("a seed is required exactly for random scenarios");
  }

  std::string name() const {
    return "S" + std::to_string(static_cast<int>(kind) + 1);
  }

  bool operator==(const Scenario&) const = default;
};

/// Parses "S1".."S5" (case-insensitive).
inline ScenarioKind parse_scenario_kind(const std::string& text) {
  if (text.size() == 2 && (text[0] == 'S' || text[0] == 's') && text[1] >= '1' && text[1] <= '5')
    return static_cast<ScenarioKind>(text[1] - '1');
  throw ParseError("unknown scenario '" + text + "' (expected S1..S5)");
}

enum class Formulation { CurrentVoltageSLP, LinDist3Flow };

constexpr std::string_view to_string(Formulation f) noexcept {
  return f == Formulation::LinDist3Flow ? "lin" : "slp";
}

inline Formulation parse_formulation(const std::string& text) {
  if (text == "lin" || text == "lindist" || text == "LinDist3Flow") return Formulation::LinDist3Flow;
  if (text == "slp" || text == "exact" || text == "CurrentVoltageSLP") return Formulation::CurrentVoltageSLP;
  throw ParseError("unknown formulation '" + text + "' (expected lin or slp)");
}

namespace scenario_detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Phase random_phase(std::uint64_t seed, NodeId node, std::size_t period) {
  const std::uint64_t h = splitmix64(splitmix64(splitmix64(seed) ^ node) ^ period);
  return phase_from_index(static_cast<std::size_t>(h % 3));
}

// Most loaded (export) or least loaded (import) phase; ties resolve to the earlier phase.
inline Phase extreme_phase(const std::array<double, 3>& load, Direction direction) {
  std::size_t best = 0;
  for (std::size_t p = 1; p < 3; ++p)
    if (direction == Direction::Export ? load[p] > load[best] : load[p] < load[best]) best = p;
  return phase_from_index(best);
}

}  // namespace scenario_detail

/// DER connection phases of every DER node and period. S1 leaves every entry free;
/// single-phase end users always get their own connection phase.
inline PhaseAssignment assign_phases(const NetworkModel& net, const LoadProfile& profile, const Scenario& scenario,
                                     Direction direction) {
  using namespace scenario_detail;
  scenario.validate();
  if (profile.node_count() != net.node_count()) throw ModelError("profile does not match the network node count");
  const std::size_t T = profile.horizon();
  PhaseAssignment out(net.node_count(), T);
  for (NodeId n : net.der_nodes()) {
    if (const auto pinned = profile.single_phase_connection(n)) {
      out.set_all_periods(n, *pinned);
      continue;
    }
    switch (scenario.kind) {
      case ScenarioKind::S1_Binaries:
        break;
      case ScenarioKind::S2_RandomPerPeriod:
        for (std::size_t t = 0; t < T; ++t) out.set(n, t, random_phase(*scenario.seed, n, t));
        break;
      case ScenarioKind::S3_RandomFixed:
        out.set_all_periods(n, random_phase(*scenario.seed, n, 0));
        break;
      case ScenarioKind::S4_LoadedPerPeriod:
        for (std::size_t t = 0; t < T; ++t)
          out.set(n, t, extreme_phase({profile.p(n, Phase::A, t), profile.p(n, Phase::B, t), profile.p(n, Phase::C, t)},
                                      direction));
        break;
      case ScenarioKind::S5_LoadedFixed: {
        std::array<double, 3> sum{};
        for (Phase ph : kPhases)
          for (std::size_t t = 0; t < T; ++t) sum[index(ph)] += profile.p(n, ph, t);
        out.set_all_periods(n, extreme_phase(sum, direction));
        break;
      }
    }
  }
  return out;
}

struct SolveOptions {
  double gap = 0.0;
  std::size_t node_limit = 5000;    // branch and bound nodes per MILP
  std::size_t slp_milp_binaries = 48;  // above this, SLP takes its phases from fixed-phase starts
  double certify_tolerance = 1e-4;
  SlpConfig slp;
  PowerFlowOptions pf;
};

enum class HcStatus { Optimal, GapReached, NodeLimit, IterationLimit, Infeasible, Failed };

constexpr std::string_view to_string(HcStatus s) noexcept {
  switch (s) {
    case HcStatus::Optimal: return "optimal";
    case HcStatus::GapReached: return "gap_reached";
    case HcStatus::NodeLimit: return "node_limit";
    case HcStatus::IterationLimit: return "iteration_limit";
    case HcStatus::Infeasible: return "infeasible";
    case HcStatus::Failed: return "failed";
  }
  return "?";
}

inline bool has_solution(HcStatus s) noexcept {
  return s != HcStatus::Infeasible && s != HcStatus::Failed;
}

struct SolveStats {
  double time_s = 0.0;
  std::size_t iterations = 0;  // simplex pivots (lin) or SLP iterations (slp)
  std::size_t nodes = 0;       // branch and bound nodes, summed over SLP steps
  double gap = 0.0;
};

/// Outcome of one single-period solve.
struct SnapshotOutcome {
  HcStatus status = HcStatus::Failed;
  SolveResult schedule;
  SolveStats stats;
  std::string message;
  std::shared_ptr<const Basis> basis;  // final basis of a fixed-phase linear solve
};

/// Solves one single-period problem on `demand` with the given phases.
inline SnapshotOutcome solve_snapshot(const NetworkModel& net, const LoadProfile& demand, Direction direction,
                                      const PhaseAssignment& phases, Formulation formulation,
                                      const SolveOptions& opt = {}, const Basis* warm = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  SnapshotOutcome out;
  // Free nodes connected to their most (export) or least (import) loaded phase.
  auto loaded_rule = [&] {
    auto fixed = phases;
    const auto rule = assign_phases(net, demand, Scenario::make(ScenarioKind::S4_LoadedPerPeriod), direction);
    for (NodeId n : net.der_nodes())
      if (!fixed.at(n, 0)) fixed.set(n, 0, *rule.at(n, 0));
    return fixed;
  };
  std::size_t free_binaries = 0;
  for (NodeId n : net.der_nodes()) free_binaries += phases.at(n, 0) ? 0 : 3;

  auto lin_solve = [&](SnapshotOutcome& o) {
    const auto f = build_lin_problem(net, demand, direction, phases);
    if (f.has_binaries()) {
      // The loaded-phase rule seeds the incumbent.
      const auto rule = loaded_rule();
      std::vector<double> on(f.problem.lp.variables.size(), 0.0), start;
      for (NodeId n : net.der_nodes())
        if (const auto bv = f.binary(n, *rule.at(n, 0), 0); bv != LinFormulation::kNone) on[bv] = 1.0;
      for (std::size_t j : f.problem.binaries) start.push_back(on[j]);
      const auto ms = solve_milp(f.problem, opt.gap, opt.node_limit, {}, start);
      o.stats.iterations += ms.incumbent.iterations;
      o.stats.nodes += ms.nodes_explored;
      o.stats.gap = ms.gap;
      switch (ms.status) {
        case MilpStatus::Optimal: o.status = HcStatus::Optimal; break;
        case MilpStatus::GapReached: o.status = HcStatus::GapReached; break;
        case MilpStatus::NodeLimit:
          o.status = ms.incumbent.status == LpStatus::Optimal ? HcStatus::NodeLimit : HcStatus::Failed;
          break;
        case MilpStatus::Infeasible: o.status = HcStatus::Infeasible; break;
      }
      if (!has_solution(o.status)) {
        o.message = ms.incumbent.certificate;
        return;
      }
      o.schedule = extract_solution(f, ms, net.bases());
    } else {
      auto sol = SimplexEngine(f.problem.lp).solve(warm);
      o.stats.iterations += sol.iterations;
      if (sol.status != LpStatus::Optimal) {
        o.status = sol.status == LpStatus::Infeasible ? HcStatus::Infeasible : HcStatus::Failed;
        o.message = sol.certificate;
        return;
      }
      o.status = HcStatus::Optimal;
      o.schedule = extract_solution(f, sol, net.bases());
      o.basis = std::make_shared<const Basis>(std::move(sol.basis));
    }
  };

  auto slp_run = [&](const PhaseAssignment& ph) {
    SnapshotOutcome o;
    auto cfg = opt.slp;
    cfg.milp_gap = opt.gap;
    cfg.milp_node_limit = opt.node_limit;
    auto [res, trace] = slp_solve(net, demand, direction, ph, cfg, opt.pf);
    o.schedule = std::move(res);
    o.stats.iterations = trace.iterations.size();
    o.stats.gap = trace.milp_gap;
    o.status = trace.status == SlpStatus::Converged ? HcStatus::Optimal : HcStatus::IterationLimit;
    return o;
  };

  try {
    if (formulation == Formulation::LinDist3Flow) {
      lin_solve(out);
    } else if (free_binaries == 0) {
      out = slp_run(phases);
    } else {
      // Free phases: starts from the linear model's phases and from the loaded-phase rule, plus
      // MILP steps over the free phases when the binary count is small. The best result is kept.
      std::vector<PhaseAssignment> starts;
      SnapshotOutcome seed;
      lin_solve(seed);
      if (has_solution(seed.status)) {
        PhaseAssignment fixed = phases;
        for (NodeId n : net.der_nodes())
          if (!fixed.at(n, 0)) fixed.set(n, 0, seed.schedule.phase_at(n, 0).value_or(Phase::A));
        starts.push_back(std::move(fixed));
      }
      if (const auto rule = loaded_rule(); starts.empty() || !(rule == starts.front())) starts.push_back(rule);
      if (free_binaries <= opt.slp_milp_binaries) starts.push_back(phases);
      bool first = true;
      std::size_t iterations = 0;
      double gap = 0.0;
      std::string last_error;
      for (const auto& ph : starts) {
        SnapshotOutcome cand;
        try {
          cand = slp_run(ph);
        } catch (const Error& e) {
          last_error = e.what();
          continue;
        }
        iterations += cand.stats.iterations;
        gap = std::max(gap, cand.stats.gap);
        if (first || cand.schedule.objective_kw > out.schedule.objective_kw) out = std::move(cand);
        first = false;
      }
      if (first) throw NoProgress("no SLP start succeeded: " + last_error);
      out.stats.iterations = iterations;
      out.stats.gap = gap;
    }
  } catch (const Error& e) {
    out.status = HcStatus::Failed;
    out.message = e.what();
  }
  out.stats.time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

/// Phases used for a static solve: S4 ranks the snapshot's own demand, the other
/// rules use the whole profile and take their first period.
inline PhaseAssignment snapshot_phases(const NetworkModel& net, const LoadProfile& profile,
                                       const LoadProfile& snapshot, const Scenario& scenario, Direction direction) {
  return scenario.kind == ScenarioKind::S4_LoadedPerPeriod ? assign_phases(net, snapshot, scenario, direction)
                                                           : assign_phases(net, profile, scenario, direction).slice(0);
}

struct VoltageComparison {
  struct Row {
    NodeId node;
    Phase phase;
    double exact;
    double lin;
    double deviation() const { return std::abs(lin - exact) / exact; }
  };
  std::vector<Row> rows;  // non-slack nodes

  /// Share of node-phases whose relative deviation is at most `tol`.
  double fraction_within(double tol) const {
    if (rows.empty()) return 1.0;
    const auto n = std::count_if(rows.begin(), rows.end(), [&](const Row& r) { return r.deviation() <= tol; });
    return static_cast<double>(n) / static_cast<double>(rows.size());
  }

  const Row* worst() const {
    const Row* w = nullptr;
    for (const auto& r : rows)
      if (!w || r.deviation() > w->deviation()) w = &r;
    return w;
  }

  void write_csv(std::ostream& out, const NetworkModel& net) const {
    out << "node,phase,u_pu_exact,u_pu_lin\n";
    out.precision(10);
    for (const auto& r : rows) out << net.node_name(r.node) << ',' << to_string(r.phase) << ',' << r.exact << ',' << r.lin << '\n';
  }
};

/// Exact and linearised voltage magnitudes of period `t` of a schedule.
inline VoltageComparison compare_voltages(const NetworkModel& net, const LoadProfile& demand, Direction direction,
                                          const SolveResult& schedule, std::size_t t = 0,
                                          const PowerFlowOptions& pf = {}) {
  auto inj = InjectionSet::from_demand(net, demand, t, direction);
  for (NodeId n : net.der_nodes())
    for (Phase ph : kPhases) inj.set_der(n, ph, schedule.der_at(n, ph, t));
  const auto st = run_power_flow(net, inj, pf);
  const auto lin = lindist_voltages(net, demand, direction, schedule, t);
  VoltageComparison out;
  for (NodeId n = 0; n < net.node_count(); ++n) {
    if (n == net.slack()) continue;
    for (Phase ph : kPhases) out.rows.push_back({n, ph, st.u_abs(n, ph), lin[n * 3 + index(ph)]});
  }
  return out;
}

struct HcResult {
  Scenario scenario;
  Formulation formulation = Formulation::LinDist3Flow;
  Direction direction = Direction::Export;
  HcStatus status = HcStatus::Failed;
  bool base_infeasible = false;     // the snapshot violates limits with no DER at all
  double objective_kw = 0.0;
  SolveResult schedule;             // per-unit DER powers of the worst-case snapshot
  LoadProfile snapshot;             // the worst-case demand the schedule was computed for
  std::vector<Violation> binding;   // constraints at their limit under exact power flow
  ConstraintReport certified;       // exact power-flow check of the schedule
  ConstraintReport diagnostic;      // base-case report when the snapshot itself is infeasible
  SolveStats stats;
  std::string message;

  double certified_violation() const { return certified.worst(); }
};

/// Static hosting capacity on the worst-case snapshot of `profile`.
inline HcResult hc_solve(const NetworkModel& net, const LoadProfile& profile, Direction direction,
                         const Scenario& scenario, Formulation formulation, const SolveOptions& opt = {}) {
  HcResult out;
  out.scenario = scenario;
  out.formulation = formulation;
  out.direction = direction;
  out.snapshot = worst_case_snapshot(profile, direction);
  out.schedule = SolveResult(net.node_count(), 1);

  try {
    const auto base = run_power_flow(net, InjectionSet::from_demand(net, out.snapshot, 0, direction), opt.pf);
    out.diagnostic = check_constraints(base, net);
  } catch (const Error& e) {
    out.status = HcStatus::Infeasible;
    out.base_infeasible = true;
    out.message = std::string("base case power flow failed: ") + e.what();
    return out;
  }
  if (!out.diagnostic.ok()) {
    const auto& v = out.diagnostic.min_voltage;
    out.status = HcStatus::Infeasible;
    out.base_infeasible = true;
    out.message = "worst-case base snapshot violates " + std::to_string(out.diagnostic.violations.size()) +
                  " constraint(s); minimum voltage " + std::to_string(v.value) + " p.u. at " + net.node_name(v.node) +
                  " phase " + std::string(to_string(v.phase));
    return out;
  }
  if (net.der_nodes().empty()) {
    out.status = HcStatus::Optimal;
    out.certified = out.diagnostic;
    return out;
  }

  const auto phases = snapshot_phases(net, profile, out.snapshot, scenario, direction);
  auto sol = solve_snapshot(net, out.snapshot, direction, phases, formulation, opt);
  out.status = sol.status;
  out.stats = sol.stats;
  out.message = std::move(sol.message);
  if (!has_solution(out.status)) return out;
  out.schedule = std::move(sol.schedule);
  out.objective_kw = out.schedule.objective_kw;
  try {
    out.certified = certify(net, out.snapshot, direction, out.schedule, opt.certify_tolerance, opt.pf);
    auto inj = InjectionSet::from_demand(net, out.snapshot, 0, direction);
    for (NodeId n : net.der_nodes())
      for (Phase ph : kPhases) inj.set_der(n, ph, out.schedule.der_at(n, ph, 0));
    out.binding = binding_constraints(run_power_flow(net, inj, opt.pf), net);
  } catch (const Error& e) {
    // The linear model can propose a schedule the exact model cannot carry.
    out.message = std::string("certification failed: ") + e.what();
    out.certified = {};
    out.certified.violations.push_back({ConstraintKind::UnderVoltage, "power flow", std::nullopt, 0.0,
                                        net.limits().u_min, net.limits().u_min});
  }
  return out;
}

/// Runs `count` independent jobs on `workers` threads; job i writes only slot i.
template <typename F>
void parallel_for(std::size_t count, std::size_t workers, F&& job) {
  workers = std::max<std::size_t>(1, std::min(workers, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  for (auto& th : pool) th.join();
}

struct DoeResult {
  Scenario scenario;
  Formulation formulation = Formulation::LinDist3Flow;
  Direction direction = Direction::Export;
  SolveResult schedule;                    // per-unit, all periods
  std::vector<HcStatus> period_status;
  std::vector<std::string> period_message;
  std::vector<double> period_time_s;
  std::vector<double> period_gap;
  double objective_kw = 0.0;               // sum of per-period objectives (kW x period)

  std::size_t failed_periods() const {
    return static_cast<std::size_t>(std::count_if(period_status.begin(), period_status.end(),
                                                  [](HcStatus s) { return !has_solution(s); }));
  }

  /// `period,node,phase,p_der_kw`, one row per DER node and period.
  void write_schedule_csv(std::ostream& out, const NetworkModel& net) const {
    out << "period,node,phase,p_der_kw\n";
    out.precision(10);
    for (std::size_t t = 0; t < schedule.horizon; ++t)
      for (NodeId n : net.der_nodes()) {
        const auto ph = schedule.phase_at(n, t);
        const double kw = ph ? net.bases().pu_to_kw(schedule.der_at(n, *ph, t)) : 0.0;
        out << t << ',' << net.node_name(n) << ',' << (ph ? std::string(to_string(*ph)) : std::string("-")) << ','
            << kw << '\n';
      }
  }
};

/// Dynamic operating envelope: every period solved on its own demand, concurrently.
inline DoeResult doe_solve(const NetworkModel& net, const LoadProfile& profile, Direction direction,
                           const Scenario& scenario, Formulation formulation, const SolveOptions& opt = {},
                           std::size_t workers = 1) {
  const std::size_t T = profile.horizon();
  DoeResult out;
  out.scenario = scenario;
  out.formulation = formulation;
  out.direction = direction;
  out.schedule = SolveResult(net.node_count(), T);
  out.period_status.assign(T, HcStatus::Failed);
  out.period_message.assign(T, {});
  out.period_time_s.assign(T, 0.0);
  out.period_gap.assign(T, 0.0);
  const auto phases = assign_phases(net, profile, scenario, direction);

  // Linear periods share their structure: every period restarts from the basis of
  // period 0, which keeps the result independent of the worker count.
  std::vector<SnapshotOutcome> results(T);
  std::size_t first = 0;
  std::shared_ptr<const Basis> reference;
  if (formulation == Formulation::LinDist3Flow && T > 0) {
    results[0] = solve_snapshot(net, profile.slice(0), direction, phases.slice(0), formulation, opt);
    reference = results[0].basis;
    first = 1;
  }
  parallel_for(T - first, workers, [&](std::size_t i) {
    const std::size_t t = first + i;
    results[t] = solve_snapshot(net, profile.slice(t), direction, phases.slice(t), formulation, opt, reference.get());
  });

  for (std::size_t t = 0; t < T; ++t) {
    auto& r = results[t];
    out.period_status[t] = r.status;
    out.period_message[t] = r.message;
    out.period_time_s[t] = r.stats.time_s;
    out.period_gap[t] = r.stats.gap;
    if (!has_solution(r.status)) continue;
    for (NodeId n = 0; n < net.node_count(); ++n) {
      for (Phase ph : kPhases) out.schedule.der_at(n, ph, t) = r.schedule.der_at(n, ph, 0);
      out.schedule.phase_at(n, t) = r.schedule.phase_at(n, 0);
    }
  }
  out.schedule.total(net.bases());
  out.objective_kw = out.schedule.objective_kw;
  return out;
}

struct ComparisonCell {
  Scenario scenario;
  Formulation formulation = Formulation::LinDist3Flow;
  HcStatus status = HcStatus::Failed;
  double objective_kw = 0.0;
  double time_s = 0.0;
  double gap = 0.0;
  double certified_violation = 0.0;
  std::string message;
};

struct ComparisonTable {
  Direction direction = Direction::Export;
  std::vector<ComparisonCell> cells;  // scenario-major, formulations in request order

  const ComparisonCell* find(ScenarioKind s, Formulation f) const {
    for (const auto& c : cells)
      if (c.scenario.kind == s && c.formulation == f) return &c;
    return nullptr;
  }

  void write_csv(std::ostream& out, bool with_time = true) const {
    out << "scenario,formulation,direction,status,objective_kw,gap,certified_violation";
    if (with_time) out << ",time_s";
    out << '\n';
    out.precision(10);
    for (const auto& c : cells) {
      out << c.scenario.name() << ',' << to_string(c.formulation) << ',' << to_string(direction) << ','
          << to_string(c.status) << ',' << c.objective_kw << ',' << c.gap << ',' << c.certified_violation;
      if (with_time) out << ',' << c.time_s;
      out << '\n';
    }
  }
};

inline ComparisonCell to_cell(const HcResult& r) {
  return {r.scenario, r.formulation, r.status, r.objective_kw, r.stats.time_s, r.stats.gap,
          has_solution(r.status) ? r.certified_violation() : 0.0, r.message};
}

/// Static hosting capacity for every (scenario, formulation) pair.
inline ComparisonTable compare_scenarios(const NetworkModel& net, const LoadProfile& profile, Direction direction,
                                         const std::vector<Formulation>& formulations,
                                         const std::vector<Scenario>& scenarios, const SolveOptions& opt = {},
                                         std::size_t workers = 1, std::vector<HcResult>* details = nullptr) {
  if (formulations.empty() || scenarios.empty()) throw ModelError("comparison needs scenarios and formulations");
  std::vector<HcResult> results(formulations.size() * scenarios.size());
  parallel_for(results.size(), workers, [&](std::size_t i) {
    results[i] = hc_solve(net, profile, direction, scenarios[i / formulations.size()],
                          formulations[i % formulations.size()], opt);
  });
  ComparisonTable table;
  table.direction = direction;
  for (const auto& r : results) table.cells.push_back(to_cell(r));
  if (details) *details = std::move(results);
  return table;
}

}  // namespace gridcap
