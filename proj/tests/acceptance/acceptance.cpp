#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "gridcap/feeders.hpp"
#include "gridcap/report.hpp"

using namespace gridcap;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PhaseAssignment all_on(const NetworkModel& net, std::size_t horizon, Phase ph) {
  PhaseAssignment a(net.node_count(), horizon);
  for (NodeId n : net.der_nodes()) a.set_all_periods(n, ph);
  return a;
}

// Brute-force phase selection on a 4-node feeder, two DER nodes and two periods.
Outcome c1_brute_force() {
  NetworkModel net(fixtures::four_node());
  const auto& b = net.bases();
  LoadProfile demand(net.node_count(), 2);
  const NodeId u1 = net.index_of("U1"), u2 = net.index_of("U2"), j = net.index_of("J");
  const double kw[3][2][3] = {{{8.0, 2.0, 5.0}, {3.0, 9.0, 1.0}}, {{1.0, 6.0, 4.0}, {7.0, 2.5, 6.0}},
                              {{2.0, 2.0, 4.0}, {5.0, 1.0, 1.0}}};
  const NodeId loaded[3] = {u1, u2, j};
  for (int i = 0; i < 3; ++i)
    for (std::size_t t = 0; t < 2; ++t)
      for (Phase ph : kPhases) {
        demand.p(loaded[i], ph, t) = b.kw_to_pu(kw[i][t][index(ph)]);
        demand.q(loaded[i], ph, t) = 0.3 * demand.p(loaded[i], ph, t);
      }

  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::string detail;
  for (Direction dir : {Direction::Export, Direction::Import}) {
    const auto f = build_lin_problem(net, demand, dir, PhaseAssignment(net.node_count(), 2));
    const auto ms = solve_milp(f.problem, 0.0);
    const double milp = ms.status == MilpStatus::Optimal ? ms.incumbent.objective : -kInf;
    double best = -kInf;
    std::size_t count = 0;
    for (std::size_t code = 0; code < 81; ++code) {
      PhaseAssignment a(net.node_count(), 2);
      std::size_t c = code;
      for (NodeId n : {u1, u2})
        for (std::size_t t = 0; t < 2; ++t, c /= 3) a.set(n, t, phase_from_index(c % 3));
      const auto sol = solve_lp(build_lin_problem(net, demand, dir, a).problem.lp);
      ++count;
      if (sol.status == LpStatus::Optimal) best = std::max(best, sol.objective);
    }
    const double rel = std::abs(milp - best) / std::max(std::abs(best), 1e-12);
    pass = pass && count == 81 && rel <= 1e-6;
    detail += fmt("%s MILP %.6f kW vs enumeration %.6f kW over %zu assignments (rel %.1e); ",
                  std::string(to_string(dir)).c_str(), b.pu_to_kw(milp), b.pu_to_kw(best), count, rel);
  }
  const double elapsed = seconds_since(t0);
  pass = pass && elapsed < 10.0;
  return {pass, detail + fmt("%.2f s (limit 10 s)", elapsed)};
}

// S1 at least as large as every fixed-phase scenario, both formulations and directions.
Outcome c2_s1_dominance() {
  std::vector<Scenario> scs;
  bool pass = true;
  std::size_t checks = 0;
  double worst_margin = kInf;
  SolveOptions opt;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto [net, profile] = build_cigre_lv(seed);
    scs.clear();
    for (ScenarioKind k : kScenarioKinds) scs.push_back(Scenario::make(k, seed));
    for (Direction dir : {Direction::Export, Direction::Import}) {
      const auto table = compare_scenarios(net, profile, dir,
                                           {Formulation::LinDist3Flow, Formulation::CurrentVoltageSLP}, scs, opt);
      for (Formulation f : {Formulation::LinDist3Flow, Formulation::CurrentVoltageSLP}) {
        const auto* s1 = table.find(ScenarioKind::S1_Binaries, f);
        if (!s1 || !has_solution(s1->status)) return {false, fmt("seed %llu: S1 %s has no solution",
                                                                 static_cast<unsigned long long>(seed),
                                                                 std::string(to_string(f)).c_str())};
        double best_fixed = 0.0;
        for (const auto& c : table.cells)
          if (c.formulation == f && c.scenario.kind != ScenarioKind::S1_Binaries && has_solution(c.status))
            best_fixed = std::max(best_fixed, c.objective_kw);
        const double allowance = s1->gap * s1->objective_kw + 1e-6 * std::max(1.0, s1->objective_kw);
        const double margin = s1->objective_kw - best_fixed;
        worst_margin = std::min(worst_margin, margin);
        pass = pass && margin >= -allowance;
        ++checks;
      }
    }
  }
  return {pass, fmt("%zu (seed, direction, formulation) checks over seeds 1-5, smallest S1 lead %.3f kW", checks,
                    worst_margin)};
}

// Two-node closed form and KCL at the import worst case on both feeders.
Outcome c3_power_flow() {
  double kcl = 0.0;
  for (int feeder = 0; feeder < 2; ++feeder) {
    auto [net, profile] = feeder == 0 ? build_cigre_lv(1) : build_synthetic_feeder(7);
    const auto snap = worst_case_snapshot(profile, Direction::Import);
    const auto inj = InjectionSet::from_demand(net, snap, 0, Direction::Import);
    const auto st = run_power_flow(net, inj);
    for (NodeId n = 0; n < net.node_count(); ++n) {
      const auto pb = net.parent_branch(n);
      if (!pb) continue;
      for (Phase ph : kPhases) {
        auto out = std::conj(inj.net_consumption(n, ph) / st.u(n, ph));
        for (BranchId c : net.child_branches(n)) out += st.i(c, ph);
        kcl = std::max(kcl, std::abs(st.i(*pb, ph) - out));
      }
    }
  }
  // |U|^2 solves v^2 + (2a - 1) v + a^2 + b^2 = 0 with conj(z) s = a + jb.
  NetworkModel net(fixtures::two_node(fixtures::coupled(0.4, 0.12), fixtures::coupled(0.25, 0.08), 0.2));
  const NodeId n = net.index_of("N");
  double closed = 0.0;
  for (Direction dir : {Direction::Import, Direction::Export}) {
    InjectionSet inj(net, dir);
    inj.set_der(n, Phase::A, 0.35);
    const auto st = run_power_flow(net, inj);
    const Branch& br = net.branch(0);
    const std::complex<double> z(br.r(0, 0), br.x(0, 0));
    const auto s = inj.net_consumption(n, Phase::A);
    const auto w = std::conj(z) * s;
    const double a = w.real(), bb = w.imag();
    const double v = 0.5 * ((1.0 - 2.0 * a) + std::sqrt((1.0 - 2.0 * a) * (1.0 - 2.0 * a) - 4.0 * (a * a + bb * bb)));
    const std::complex<double> ua(v + a, bb);
    closed = std::max(closed, std::abs(st.u(n, Phase::A) - ua));
    const auto ia = std::conj(s / ua);
    for (Phase ph : {Phase::B, Phase::C}) {
      const std::complex<double> zpa(br.r(index(ph), 0), br.x(index(ph), 0));
      closed = std::max(closed, std::abs(st.u(n, ph) - (slack_reference(ph) - zpa * ia)));
    }
  }
  return {kcl <= 1e-8 && closed <= 1e-10,
          fmt("max KCL residual %.2e p.u. (limit 1e-8), two-node closed-form error %.2e (limit 1e-10)", kcl, closed)};
}

// Linear versus exact voltages at certified fixed-phase operating points on CIGRE.
Outcome c4_linearisation_accuracy() {
  auto [net, profile] = build_cigre_lv(1);
  bool pass = true;
  std::string detail;
  for (Direction dir : {Direction::Export, Direction::Import})
    for (ScenarioKind k : {ScenarioKind::S3_RandomFixed, ScenarioKind::S5_LoadedFixed}) {
      const auto r = hc_solve(net, profile, dir, Scenario::make(k, 1), Formulation::CurrentVoltageSLP);
      if (!has_solution(r.status) || !r.certified.ok()) return {false, "no certified operating point"};
      const auto cmp = compare_voltages(net, r.snapshot, dir, r.schedule);
      const auto* w = cmp.worst();
      const double share = cmp.fraction_within(0.01);
      pass = pass && share >= 0.9;
      detail += fmt("%s %s %.1f%% within 1%%, worst %.3f%% at %s %s; ", std::string(to_string(dir)).c_str(),
                    Scenario::make(k, 1).name().c_str(), 100.0 * share, 100.0 * w->deviation(),
                    net.node_name(w->node).c_str(), std::string(to_string(w->phase)).c_str());
    }
  return {pass, detail + "required 90% of node-phases"};
}

// The linear model has no ampacity or unbalance rows; certification must catch what it misses.
Outcome c5_omission_detection() {
  auto [net, profile] = build_synthetic_feeder(7);
  const auto r = hc_solve(net, profile, Direction::Export, Scenario::make(ScenarioKind::S5_LoadedFixed),
                          Formulation::LinDist3Flow);
  if (!has_solution(r.status)) return {false, "linear solve failed: " + r.message};
  const auto rep = certify(net, r.snapshot, Direction::Export, r.schedule);
  const double amp = rep.worst(ConstraintKind::Ampacity), vuf = rep.worst(ConstraintKind::Vuf);
  return {amp > 0.0 || vuf > 0.0,
          fmt("synthetic feeder export S5: linear schedule %.1f kW, exact max loading %.3f, max VUF %.4f; "
              "ampacity exceedance %.3f, VUF exceedance %.4f",
              r.objective_kw, rep.max_loading.value, rep.max_vuf.value, amp, vuf)};
}

// Overloaded synthetic feeder: import HC is infeasible before any DER is added.
Outcome c6_import_infeasibility() {
  auto [net, profile] = build_synthetic_feeder(7);
  double k = 1.0;
  for (;; k += 0.05) {
    const auto snap = worst_case_snapshot(profile.scaled(k), Direction::Import);
    const auto st = run_power_flow(net, InjectionSet::from_demand(net, snap, 0, Direction::Import));
    if (check_constraints(st, net).min_voltage.value < 0.9) break;
  }
  bool pass = true;
  std::string detail = fmt("demand x%.2f: ", k);
  for (Formulation f : {Formulation::LinDist3Flow, Formulation::CurrentVoltageSLP}) {
    const auto r = hc_solve(net, profile.scaled(k), Direction::Import, Scenario::make(ScenarioKind::S5_LoadedFixed), f);
    const auto& mv = r.diagnostic.min_voltage;
    const bool names_node = r.message.find(net.node_name(mv.node)) != std::string::npos;
    pass = pass && r.status == HcStatus::Infeasible && r.base_infeasible && mv.value < 0.9 && names_node;
    detail += fmt("%s %s, min voltage %.4f p.u. at %s %s; ", std::string(to_string(f)).c_str(),
                  std::string(to_string(r.status)).c_str(), mv.value, net.node_name(mv.node).c_str(),
                  std::string(to_string(mv.phase)).c_str());
  }
  return {pass, detail};
}

// Diagonal impedances decouple the phases into single-phase LinDistFlow.
Outcome c7_balanced_reduction() {
  NetworkModel net(fixtures::diagonal_feeder());
  LoadProfile demand(net.node_count(), 1);
  for (NodeId n = 0; n < net.node_count(); ++n) {
    if (n == net.slack()) continue;
    for (Phase ph : kPhases) {
      demand.p(n, ph, 0) = 0.004;
      demand.q(n, ph, 0) = 0.0012;
    }
  }
  double err = 0.0;
  for (Direction dir : {Direction::Export, Direction::Import})
    for (Phase ph : kPhases) {
      // Single-phase program: W_j = W_i - 2 (r P + x Q) on the DER phase alone.
      LinearProgram lp;
      const auto& lim = net.limits();
      std::vector<std::size_t> w(net.node_count()), p(net.branch_count()), q(net.branch_count()),
          der(net.node_count(), SIZE_MAX);
      for (NodeId n = 0; n < net.node_count(); ++n)
        w[n] = lp.add_variable("w", lim.u_min * lim.u_min, lim.u_max * lim.u_max);
      for (BranchId b = 0; b < net.branch_count(); ++b) {
        p[b] = lp.add_variable("p", -kInf, kInf);
        q[b] = lp.add_variable("q", -kInf, kInf);
      }
      for (NodeId n : net.der_nodes()) der[n] = lp.add_variable("d", 0.0, kInf, 1.0);
      lp.add_constraint("slack", {{w[net.slack()], 1.0}}, Relation::Equal, 1.0);
      const int k = static_cast<int>(index(ph));
      for (NodeId n = 0; n < net.node_count(); ++n) {
        const auto pb = net.parent_branch(n);
        if (!pb) continue;
        std::vector<Term> pr{{p[*pb], 1.0}}, qr{{q[*pb], 1.0}};
        for (BranchId c : net.child_branches(n)) {
          pr.push_back({p[c], -1.0});
          qr.push_back({q[c], -1.0});
        }
        if (der[n] != SIZE_MAX) pr.push_back({der[n], dir == Direction::Export ? 1.0 : -1.0});
        lp.add_constraint("pb", pr, Relation::Equal, demand.p(n, ph, 0));
        lp.add_constraint("qb", qr, Relation::Equal, demand.q(n, ph, 0));
        const Branch& br = net.branch(*pb);
        lp.add_constraint("drop",
                          {{w[n], 1.0}, {w[br.from], -1.0}, {p[*pb], 2.0 * br.r(k, k)}, {q[*pb], 2.0 * br.x(k, k)}},
                          Relation::Equal, 0.0);
      }
      const auto single = solve_lp(lp);
      const auto f = build_lin_problem(net, demand, dir, all_on(net, 1, ph));
      const auto three = solve_lp(f.problem.lp);
      if (single.status != LpStatus::Optimal || three.status != LpStatus::Optimal) return {false, "LP not optimal"};
      err = std::max(err, std::abs(single.objective - three.objective));
      for (NodeId n = 0; n < net.node_count(); ++n)
        err = std::max(err, std::abs(single.primal[w[n]] - three.primal[f.w(n, ph, 0)]));
    }
  return {err <= 1e-8, fmt("max difference in objective and W over both directions and phases %.2e (limit 1e-8)", err)};
}

// Every converged SLP result certifies; a single DER matches bisection on the exact model.
Outcome c8_slp_certification() {
  std::size_t converged = 0, clean = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto [net, profile] = build_cigre_lv(seed);
    for (Direction dir : {Direction::Export, Direction::Import})
      for (ScenarioKind k : kScenarioKinds) {
        const auto r = hc_solve(net, profile, dir, Scenario::make(k, seed), Formulation::CurrentVoltageSLP);
        ++total;
        if (r.status != HcStatus::Optimal) continue;
        ++converged;
        clean += certify(net, r.snapshot, dir, r.schedule, 1e-4).ok();
      }
  }
  {
    auto [net, profile] = build_synthetic_feeder(7);
    for (ScenarioKind k : {ScenarioKind::S3_RandomFixed, ScenarioKind::S5_LoadedFixed}) {
      const auto r = hc_solve(net, profile, Direction::Export, Scenario::make(k, 7), Formulation::CurrentVoltageSLP);
      ++total;
      if (r.status != HcStatus::Optimal) continue;
      ++converged;
      clean += certify(net, r.snapshot, Direction::Export, r.schedule, 1e-4).ok();
    }
  }

  NetworkModel net(fixtures::two_node(fixtures::coupled(0.4, 0.12), fixtures::coupled(0.25, 0.08), 0.2, 300.0));
  LoadProfile demand(net.node_count(), 1);
  for (Phase ph : kPhases) {
    demand.p(1, ph, 0) = net.bases().kw_to_pu(4.0 + 2.0 * static_cast<double>(index(ph)));
    demand.q(1, ph, 0) = 0.3 * demand.p(1, ph, 0);
  }
  auto feasible = [&](double p) {
    auto inj = InjectionSet::from_demand(net, demand, 0, Direction::Export);
    inj.set_der(1, Phase::B, p);
    try {
      return check_constraints(run_power_flow(net, inj), net).ok();
    } catch (const Error&) {
      return false;
    }
  };
  double lo = 0.0, hi = 0.05;
  while (feasible(hi)) hi *= 2.0;
  for (int i = 0; i < 80; ++i) (feasible(0.5 * (lo + hi)) ? lo : hi) = 0.5 * (lo + hi);
  PhaseAssignment ph(net.node_count(), 1);
  ph.set(1, 0, Phase::B);
  const auto [res, trace] = slp_solve(net, demand, Direction::Export, ph);
  const double oracle = net.bases().pu_to_kw(lo);
  const double rel = std::abs(res.objective_kw - oracle) / oracle;
  const bool pass = converged > 0 && clean == converged && trace.status == SlpStatus::Converged && rel <= 1e-3;
  return {pass, fmt("%zu of %zu converged SLP results certify at 1e-4 (%zu runs); two-node SLP %.4f kW vs bisection "
                    "%.4f kW (rel %.1e, limit 1e-3)",
                    clean, converged, total, res.objective_kw, oracle, rel)};
}

// Worker count leaves the DOE unchanged; four workers cut wall-clock time.
Outcome c9_doe_determinism_scaling() {
  bool identical = true;
  auto [cnet, cprof] = build_cigre_lv(1);
  for (auto [k, f] : {std::pair{ScenarioKind::S1_Binaries, Formulation::LinDist3Flow},
                      std::pair{ScenarioKind::S2_RandomPerPeriod, Formulation::CurrentVoltageSLP}}) {
    std::string out[2];
    for (int i = 0; i < 2; ++i) {
      const auto d = doe_solve(cnet, cprof, Direction::Export, Scenario::make(k, 1), f, {}, i == 0 ? 1 : 8);
      std::ostringstream csv;
      d.write_schedule_csv(csv, cnet);
      out[i] = to_json(d, cnet).dump() + csv.str();
    }
    identical = identical && out[0] == out[1];
  }

  auto [snet, sprof] = build_synthetic_feeder(7);
  double t[2];
  for (int i = 0; i < 2; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    doe_solve(snet, sprof, Direction::Export, Scenario::make(ScenarioKind::S5_LoadedFixed),
              Formulation::CurrentVoltageSLP, {}, i == 0 ? 1 : 4);
    t[i] = seconds_since(t0);
  }
  const double ratio = t[1] / t[0];
  return {identical && ratio <= 0.6,
          fmt("CIGRE 96-period DOE 1 vs 8 workers %s; synthetic DOE 1 worker %.2f s, 4 workers %.2f s, ratio %.2f "
              "(limit 0.6) on %u hardware threads",
              identical ? "identical" : "DIFFERENT", t[0], t[1], ratio, std::thread::hardware_concurrency())};
}

// Gap termination on the CIGRE S1 export instance.
Outcome c10_gap_semantics() {
  auto [net, profile] = build_cigre_lv(1);
  const auto snap = worst_case_snapshot(profile, Direction::Export);
  const auto f = build_lin_problem(net, snap, Direction::Export, PhaseAssignment(net.node_count(), 1));
  const auto exact = solve_milp(f.problem, 0.0);
  const auto gapped = solve_milp(f.problem, 0.0015);
  const bool terminated = gapped.status == MilpStatus::Optimal || gapped.status == MilpStatus::GapReached;
  const bool pass = exact.status == MilpStatus::Optimal && terminated && gapped.gap <= 0.0015 &&
                    gapped.incumbent.objective >= (1.0 - 0.0015) * exact.incumbent.objective;
  return {pass, fmt("gap-0 %.4f kW (%zu nodes); gap 0.0015: %s, %.4f kW, reported gap %.2e (%zu nodes)",
                    net.bases().pu_to_kw(exact.incumbent.objective), exact.nodes_explored,
                    std::string(to_string(gapped.status)).c_str(), net.bases().pu_to_kw(gapped.incumbent.objective),
                    gapped.gap, gapped.nodes_explored)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"brute-force phase selection", c1_brute_force},
      {"S1 dominance", c2_s1_dominance},
      {"power-flow oracle", c3_power_flow},
      {"linearisation accuracy", c4_linearisation_accuracy},
      {"omitted-constraint detection", c5_omission_detection},
      {"import infeasibility", c6_import_infeasibility},
      {"balanced reduction", c7_balanced_reduction},
      {"SLP certification", c8_slp_certification},
      {"DOE determinism and scaling", c9_doe_determinism_scaling},
      {"gap semantics", c10_gap_semantics},
  };
  std::vector<std::size_t> selected;
  for (int i = 1; i < argc; ++i) {
    const auto id = std::stoul(argv[i]);
    if (id < 1 || id > criteria.size()) {
      std::fprintf(stderr, "unknown criterion %s\n", argv[i]);
      return 2;
    }
    selected.push_back(id - 1);
  }
  if (selected.empty())
    for (std::size_t i = 0; i < criteria.size(); ++i) selected.push_back(i);

  int failures = 0;
  for (std::size_t i : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  C%zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
