#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gridcap/milp.hpp"
#include "gridcap/powerflow.hpp"
#include "gridcap/schedule.hpp"

namespace gridcap {

struct SlpConfig {
  std::size_t max_iterations = 50;
  double step_tolerance = 1e-6;      // per-unit
  double gain_tolerance = 1e-5;      // per-unit predicted improvement that counts as stalled
  double trust_radius = 0.1;         // per-unit DER power per iteration
  double feasibility_shrink = 0.98;
  double trust_floor = 1e-4;
  double penalty = 1e4;              // elastic slack weight in the step LP
  double merit_penalty = 100.0;      // exact-penalty weight in the acceptance test
  double certify_tolerance = 1e-4;
  double milp_gap = 0.0;
  std::size_t milp_node_limit = 5000;

  void validate() const {
    if (max_iterations == 0 || !(step_tolerance > 0.0) || !(gain_tolerance > 0.0) || !(trust_radius > 0.0) || !(trust_floor > 0.0) ||
        !(penalty > 0.0) || !(merit_penalty > 0.0) || !(certify_tolerance > 0.0))
      throw ModelError("SLP settings must be positive");
    if (!(feasibility_shrink > 0.0 && feasibility_shrink < 1.0))
      throw ModelError("feasibility_shrink must lie in (0, 1)");
    if (!(milp_gap >= 0.0)) throw ModelError("MILP gap must be non-negative");
  }
};

enum class SlpStatus { Converged, IterationLimit };

constexpr std::string_view to_string(SlpStatus s) noexcept {
  return s == SlpStatus::Converged ? "converged" : "iteration_limit";
}

struct SlpIteration {
  std::size_t period = 0;
  std::size_t iteration = 0;
  double lp_obj = 0.0;         // kW, LP model value including slack penalties
  double exact_obj = 0.0;      // kW, DER total of the trial point
  double max_violation = 0.0;  // worst exceedance under exact power flow
  double step_norm = 0.0;      // per-unit, max DER change
  bool accepted = false;
};

struct SlpTrace {
  std::vector<SlpIteration> iterations;
  SlpStatus status = SlpStatus::Converged;
  std::size_t shrink_steps = 0;
  double milp_gap = 0.0;  // worst gap over S1 steps

  void write_csv(std::ostream& out) const {
    out << "iteration,lp_obj,exact_obj,max_violation,step_norm\n";
    out.precision(12);
    for (const auto& it : iterations)
      out << it.iteration << ',' << it.lp_obj << ',' << it.exact_obj << ',' << it.max_violation << ','
          << it.step_norm << '\n';
  }
};

/// Worst-case constraint report of a schedule under exact power flow, merged over all periods.
inline ConstraintReport certify(const NetworkModel& net, const LoadProfile& demand, Direction direction,
                                const SolveResult& result, double tolerance = 0.0,
                                const PowerFlowOptions& pf = {}) {
  if (result.node_count != net.node_count() || result.horizon != demand.horizon())
    throw ModelError("schedule does not match the demand profile");
  ConstraintReport out;
  for (std::size_t t = 0; t < demand.horizon(); ++t) {
    auto inj = InjectionSet::from_demand(net, demand, t, direction);
    for (NodeId n : net.der_nodes())
      for (Phase ph : kPhases) inj.set_der(n, ph, result.der_at(n, ph, t));
    const auto st = run_power_flow(net, inj, pf);
    auto rep = check_constraints(st, net, tolerance);
    if (t == 0) {
      out = rep;
      out.violations.clear();
    } else {
      if (rep.min_voltage.value < out.min_voltage.value) out.min_voltage = rep.min_voltage;
      if (rep.max_voltage.value > out.max_voltage.value) out.max_voltage = rep.max_voltage;
      if (rep.max_vuf.value > out.max_vuf.value) out.max_vuf = rep.max_vuf;
      if (rep.max_loading.value > out.max_loading.value) out.max_loading = rep.max_loading;
    }
    for (auto& v : rep.violations) {
      v.period = t;
      out.violations.push_back(std::move(v));
    }
  }
  return out;
}

namespace slp_detail {

// Linearised constraint g0 + grad . (d - d0) <= 0, normalised so that g is O(1).
struct LinearRow {
  double g0 = 0.0;
  std::vector<double> grad;
};

struct Point {
  std::vector<double> d;  // per DER variable
  PowerFlowState st;
  double total = 0.0;
  double merit = 0.0;
};

inline std::vector<double> row_values(const NetworkModel& net, const PowerFlowState& st) {
  const auto& lim = net.limits();
  const double umin2 = lim.u_min * lim.u_min, umax2 = lim.u_max * lim.u_max, v2 = lim.vuf_max * lim.vuf_max;
  std::vector<double> g;
  for (NodeId n = 0; n < net.node_count(); ++n) {
    if (n == net.slack()) continue;
    for (Phase ph : kPhases) {
      const double u2 = std::norm(st.u(n, ph));
      g.push_back(u2 - umax2);
      g.push_back(umin2 - u2);
    }
    const auto seq = to_sequence(st.u(n, Phase::A), st.u(n, Phase::B), st.u(n, Phase::C));
    g.push_back(std::norm(seq.negative) / v2 - std::norm(seq.positive));
  }
  for (BranchId b = 0; b < net.branch_count(); ++b) {
    const double a2 = net.branch(b).ampacity * net.branch(b).ampacity;
    for (Phase ph : kPhases) g.push_back(std::norm(st.i(b, ph)) / a2 - 1.0);
  }
  return g;
}

// Same ordering as row_values. Ampacity rows at near-zero current are left without gradient.
inline std::vector<LinearRow> linearise(const NetworkModel& net, const PowerFlowState& st,
                                        const std::vector<StateSensitivity>& sens) {
  const auto& lim = net.limits();
  const double v2 = lim.vuf_max * lim.vuf_max;
  const auto g = row_values(net, st);
  const std::size_t k = sens.size();
  std::vector<LinearRow> rows(g.size());
  const ComplexPhasor a = alpha(), a2 = a * a;
  std::size_t r = 0;
  for (NodeId n = 0; n < net.node_count(); ++n) {
    if (n == net.slack()) continue;
    for (Phase ph : kPhases) {
      const auto u = st.u(n, ph);
      auto& up = rows[r];
      auto& lo = rows[r + 1];
      up.g0 = g[r];
      lo.g0 = g[r + 1];
      up.grad.resize(k);
      lo.grad.resize(k);
      for (std::size_t j = 0; j < k; ++j) {
        const double du2 = 2.0 * std::real(std::conj(u) * sens[j].voltage[n * 3 + index(ph)]);
        up.grad[j] = du2;
        lo.grad[j] = -du2;
      }
      r += 2;
    }
    const auto ua = st.u(n, Phase::A), ub = st.u(n, Phase::B), uc = st.u(n, Phase::C);
    const auto seq = to_sequence(ua, ub, uc);
    auto& row = rows[r];
    row.g0 = g[r];
    row.grad.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
      const auto& dv = sens[j].voltage;
      const auto da = dv[n * 3], db = dv[n * 3 + 1], dc = dv[n * 3 + 2];
      const auto dpos = (da + a * db + a2 * dc) / 3.0;
      const auto dneg = (da + a2 * db + a * dc) / 3.0;
      row.grad[j] = 2.0 * std::real(std::conj(seq.negative) * dneg) / v2 -
                    2.0 * std::real(std::conj(seq.positive) * dpos);
    }
    ++r;
  }
  for (BranchId b = 0; b < net.branch_count(); ++b) {
    const double amp2 = net.branch(b).ampacity * net.branch(b).ampacity;
    for (Phase ph : kPhases) {
      auto& row = rows[r];
      row.g0 = g[r];
      row.grad.assign(k, 0.0);
      const auto i = st.i(b, ph);
      if (std::abs(i) >= 1e-6)
        for (std::size_t j = 0; j < k; ++j)
          row.grad[j] = 2.0 * std::real(std::conj(i) * sens[j].branch_current[b * 3 + index(ph)]) / amp2;
      ++r;
    }
  }
  return rows;
}

// Exceedances below `deadband` (normalised units) are not penalised, so steps that land
// marginally outside an active constraint are still accepted and corrected next iteration.
inline double penalty_sum(const std::vector<double>& g, double deadband = 1e-6) {
  double s = 0.0;
  for (double v : g) s += std::max(0.0, v - deadband);
  return s;
}

class PeriodSolver {
 public:
  PeriodSolver(const NetworkModel& net, const LoadProfile& demand, std::size_t t, Direction dir,
               const PhaseAssignment& phases, const SlpConfig& cfg, const PowerFlowOptions& pf)
      : net_(net), t_(t), cfg_(cfg), pf_(pf), base_(InjectionSet::from_demand(net, demand, t, dir)) {
    for (NodeId n : net.der_nodes()) {
      const auto fixed = phases.at(n, t);
      const std::size_t first = vars_.size();
      for (Phase ph : kPhases)
        if (!fixed || *fixed == ph) vars_.push_back({n, ph});
      if (!fixed) groups_.push_back({first, first + 1, first + 2});
    }
  }

  const std::vector<DerVariable>& vars() const noexcept { return vars_; }

  std::optional<Point> evaluate(const std::vector<double>& d) const {
    auto inj = base_;
    for (std::size_t j = 0; j < vars_.size(); ++j) inj.set_der(vars_[j].node, vars_[j].phase, d[j]);
    Point p;
    try {
      p.st = run_power_flow(net_, inj, pf_);
    } catch (const CollapseDetected&) {
      return std::nullopt;
    } catch (const NonConvergence&) {
      return std::nullopt;
    }
    p.d = d;
    for (double v : d) p.total += v;
    p.merit = p.total - cfg_.merit_penalty * penalty_sum(row_values(net_, p.st));
    return p;
  }

  bool feasible(const Point& p) const { return check_constraints(p.st, net_, cfg_.certify_tolerance).ok(); }

  struct Step {
    std::vector<double> d;
    double predicted = 0.0;  // LP objective, per-unit
    double gap = 0.0;
  };

  std::vector<LinearRow> model(const Point& p) const {
    auto inj = base_;
    for (std::size_t j = 0; j < vars_.size(); ++j) inj.set_der(vars_[j].node, vars_[j].phase, p.d[j]);
    return linearise(net_, p.st, der_sensitivities(net_, inj, p.st, vars_));
  }

  /// Curvature error of the model at a trial point: exact g minus its linear prediction.
  std::vector<double> correction(const Point& p, const std::vector<LinearRow>& rows, const Point& trial) const {
    const auto g = row_values(net_, trial.st);
    std::vector<double> shift(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      double lin = rows[r].g0;
      for (std::size_t j = 0; j < vars_.size(); ++j) lin += rows[r].grad[j] * (trial.d[j] - p.d[j]);
      shift[r] = g[r] - lin;
    }
    return shift;
  }

  std::optional<Step> step(const Point& p, const std::vector<LinearRow>& rows, double rho,
                           const std::vector<double>* shift = nullptr) const {
    const std::size_t k = vars_.size();

    MilpProblem m;
    auto& lp = m.lp;
    lp.sense = Sense::Maximize;
    std::vector<double> lo(k), hi(k);
    for (std::size_t j = 0; j < k; ++j) {
      lo[j] = std::max(0.0, p.d[j] - rho);
      hi[j] = p.d[j] + rho;
      lp.add_variable("d" + std::to_string(j), lo[j], hi[j], 1.0);
    }
    for (const auto& g : groups_) {
      std::vector<Term> sum;
      std::vector<std::size_t> members;
      for (std::size_t j : g) {
        const auto x = lp.add_variable("x" + std::to_string(j), 0.0, 1.0);
        lp.add_constraint("link", {{j, 1.0}, {x, -hi[j]}}, Relation::LessEqual, 0.0);
        if (lo[j] > 0.0) lp.add_constraint("floor", {{j, 1.0}, {x, -lo[j]}}, Relation::GreaterEqual, 0.0);
        m.binaries.push_back(x);
        members.push_back(x);
        sum.push_back({x, 1.0});
      }
      lp.add_constraint("group", std::move(sum), Relation::LessEqual, 1.0);
      m.sos_groups.push_back(std::move(members));
    }
    // Free phases keep their trust floor through the binary so the connection phase can still switch.
    for (const auto& g : groups_)
      for (std::size_t j : g) lp.variables[j].lower = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const double g0 = row.g0 + (shift ? (*shift)[r] : 0.0);
      // Rows that cannot become active inside the trust box are left out.
      double reach = g0;
      for (std::size_t j = 0; j < k; ++j)
        reach += std::max(row.grad[j] * (lp.variables[j].upper - p.d[j]), row.grad[j] * (lp.variables[j].lower - p.d[j]));
      if (reach <= 0.0) continue;
      std::vector<Term> terms;
      double rhs = -g0;
      for (std::size_t j = 0; j < k; ++j)
        if (row.grad[j] != 0.0) {
          terms.push_back({j, row.grad[j]});
          rhs += row.grad[j] * p.d[j];
        }
      if (g0 > 0.0) terms.push_back({lp.add_variable("s" + std::to_string(r), 0.0, kInf, -cfg_.penalty), -1.0});
      if (terms.empty()) continue;
      lp.add_constraint("g" + std::to_string(r), std::move(terms), Relation::LessEqual, rhs);
    }

    Step out;
    LpSolution sol;
    if (m.binaries.empty()) {
      sol = solve_lp(lp);
    } else {
      const auto ms = solve_milp(m, cfg_.milp_gap, cfg_.milp_node_limit);
      if (ms.incumbent.status != LpStatus::Optimal) return std::nullopt;
      out.gap = ms.gap;
      sol = ms.incumbent;
    }
    if (sol.status != LpStatus::Optimal) return std::nullopt;
    out.d.assign(sol.primal.begin(), sol.primal.begin() + static_cast<std::ptrdiff_t>(k));
    for (auto& v : out.d) v = std::max(0.0, v);
    // Keep one phase per free node even when the LP leaves round-off on the others.
    for (const auto& g : groups_) {
      std::size_t best = g[0];
      for (std::size_t j : g)
        if (out.d[j] > out.d[best]) best = j;
      for (std::size_t j : g)
        if (j != best) out.d[j] = 0.0;
    }
    out.predicted = sol.objective;
    return out;
  }

  std::size_t period() const noexcept { return t_; }

 private:
  const NetworkModel& net_;
  std::size_t t_;
  SlpConfig cfg_;
  PowerFlowOptions pf_;
  InjectionSet base_;
  std::vector<DerVariable> vars_;
  std::vector<std::array<std::size_t, 3>> groups_;
};

}  // namespace slp_detail

/// Scales a schedule by `factor` until exact power flow shows no violation beyond `tolerance`.
/// Returns the number of scaling steps; a schedule that cannot be repaired ends at zero.
inline std::size_t shrink_to_feasible(const NetworkModel& net, const LoadProfile& demand, Direction direction,
                                      SolveResult& result, double factor, double tolerance,
                                      const PowerFlowOptions& pf = {}) {
  std::size_t steps = 0;
  for (std::size_t t = 0; t < result.horizon; ++t) {
    auto inj = InjectionSet::from_demand(net, demand, t, direction);
    for (std::size_t s = 0;; ++s) {
      for (NodeId n : net.der_nodes())
        for (Phase ph : kPhases) inj.set_der(n, ph, result.der_at(n, ph, t));
      bool ok = false;
      try {
        ok = check_constraints(run_power_flow(net, inj, pf), net, tolerance).ok();
      } catch (const CollapseDetected&) {
      } catch (const NonConvergence&) {
      }
      double total = 0.0;
      for (NodeId n : net.der_nodes())
        for (Phase ph : kPhases) total += result.der_at(n, ph, t);
      if (ok || total == 0.0) break;
      const double f = s < 2000 ? factor : 0.0;
      for (NodeId n : net.der_nodes())
        for (Phase ph : kPhases) {
          auto& v = result.der_at(n, ph, t);
          v = v * f < 1e-12 ? 0.0 : v * f;
        }
      ++steps;
    }
  }
  return steps;
}

/// Successive linear programming on the exact current-voltage model.
///
/// Each period is solved independently over the DER powers: exact power flow at
/// the current schedule, first-order rows for voltage magnitude, VUF and ampacity,
/// an LP (a MILP where phases are free) inside a trust box, and a ratio test on an
/// exact penalty merit. The returned objective is the DER total of the certified schedule.
inline std::pair<SolveResult, SlpTrace> slp_solve(const NetworkModel& net, const LoadProfile& demand,
                                                  Direction direction, const PhaseAssignment& phases,
                                                  const SlpConfig& cfg = {}, const PowerFlowOptions& pf = {}) {
  cfg.validate();
  if (demand.node_count() != net.node_count() || phases.node_count() != net.node_count() ||
      phases.horizon() != demand.horizon())
    throw ModelError("phase assignment does not match the demand profile");
  const std::size_t T = demand.horizon();
  SolveResult result(net.node_count(), T);
  result.predicted_voltage.assign(net.node_count() * 3 * T, 0.0);
  SlpTrace trace;
  bool all_converged = true;

  for (std::size_t t = 0; t < T; ++t) {
    slp_detail::PeriodSolver solver(net, demand, t, direction, phases, cfg, pf);
    const std::size_t k = solver.vars().size();
    auto start = solver.evaluate(std::vector<double>(k, 0.0));
    if (!start) {
      auto inj = InjectionSet::from_demand(net, demand, t, direction);
      run_power_flow(net, inj, pf);  // rethrows the power-flow error
      throw NonConvergence("power flow failed at the zero-DER point", {});
    }
    slp_detail::Point cur = std::move(*start);
    double rho = cfg.trust_radius;
    bool converged = false;
    double last_gap = 0.0;

    for (std::size_t it = 1; it <= cfg.max_iterations && !converged; ++it) {
      SlpIteration rec;
      rec.period = t;
      rec.iteration = it;
      std::vector<slp_detail::LinearRow> rows;
      if (k > 0) rows = solver.model(cur);
      auto step = k == 0 ? std::nullopt : solver.step(cur, rows, rho);
      if (!step) {
        // Nothing to move (no DER) or an empty step model: the current point stands.
        converged = solver.feasible(cur) || k == 0;
        if (!converged) throw NoProgress("SLP step model infeasible at period " + std::to_string(t));
        rec.exact_obj = net.bases().pu_to_kw(cur.total);
        rec.lp_obj = rec.exact_obj;
        trace.iterations.push_back(rec);
        break;
      }
      last_gap = std::max(last_gap, step->gap);
      double norm = 0.0;
      for (std::size_t j = 0; j < k; ++j) norm = std::max(norm, std::abs(step->d[j] - cur.d[j]));
      rec.lp_obj = net.bases().pu_to_kw(step->predicted);
      rec.step_norm = norm;
      const double predicted_gain = step->predicted - cur.merit;

      const double scale = std::max(1.0, std::abs(cur.merit));
      const bool stalled = predicted_gain <= cfg.gain_tolerance * scale && solver.feasible(cur);
      if (norm < cfg.step_tolerance || predicted_gain <= 1e-12 * scale || stalled) {
        rec.exact_obj = net.bases().pu_to_kw(cur.total);
        rec.max_violation = check_constraints(cur.st, net).worst();
        rec.accepted = true;
        trace.iterations.push_back(rec);
        if (solver.feasible(cur)) {
          converged = true;
          break;
        }
        rho *= 0.5;
        if (rho < cfg.trust_floor) throw NoProgress("SLP stalled at an infeasible point in period " + std::to_string(t));
        continue;
      }

      auto trial = solver.evaluate(step->d);
      double ratio = trial ? (trial->merit - cur.merit) / predicted_gain : -kInf;
      if (trial && ratio < 0.1) {
        // Second-order correction: shift the model by its curvature error at the trial and re-solve.
        const auto shift = solver.correction(cur, rows, *trial);
        if (auto soc = solver.step(cur, rows, rho, &shift)) {
          auto second = solver.evaluate(soc->d);
          const double r2 = second ? (second->merit - cur.merit) / predicted_gain : -kInf;
          if (r2 > ratio) {
            ratio = r2;
            trial = std::move(second);
            step = std::move(soc);
            norm = 0.0;
            for (std::size_t j = 0; j < k; ++j) norm = std::max(norm, std::abs(step->d[j] - cur.d[j]));
          }
        }
      }
      rec.exact_obj = net.bases().pu_to_kw(std::accumulate(step->d.begin(), step->d.end(), 0.0));
      rec.max_violation = trial ? check_constraints(trial->st, net).worst() : kInf;
      if (ratio >= 0.1) {
        rec.accepted = true;
        double dv = 0.0;
        for (std::size_t i = 0; i < cur.st.voltage.size(); ++i)
          dv = std::max(dv, std::abs(std::abs(trial->st.voltage[i]) - std::abs(cur.st.voltage[i])));
        cur = std::move(*trial);
        if (ratio > 0.75 && norm >= 0.99 * rho) rho *= 2.0;
        else if (ratio < 0.25) rho *= 0.5;
        trace.iterations.push_back(rec);
        if ((dv < cfg.step_tolerance || norm < cfg.step_tolerance) && solver.feasible(cur)) converged = true;
      } else {
        trace.iterations.push_back(rec);
        rho = 0.5 * std::min(rho, norm);
        if (rho < cfg.trust_floor) {
          if (solver.feasible(cur)) {
            converged = true;
          } else {
            throw NoProgress("SLP trust radius fell below " + std::to_string(cfg.trust_floor) + " at period " +
                             std::to_string(t));
          }
        }
      }
    }

    trace.milp_gap = std::max(trace.milp_gap, last_gap);
    if (!converged) all_converged = false;
    const auto& vars = solver.vars();
    for (std::size_t j = 0; j < vars.size(); ++j) result.der_at(vars[j].node, vars[j].phase, t) = cur.d[j];
  }

  trace.status = all_converged ? SlpStatus::Converged : SlpStatus::IterationLimit;
  trace.shrink_steps =
      shrink_to_feasible(net, demand, direction, result, cfg.feasibility_shrink, cfg.certify_tolerance, pf);

  for (std::size_t t = 0; t < T; ++t) {
    auto inj = InjectionSet::from_demand(net, demand, t, direction);
    for (NodeId n : net.der_nodes())
      for (Phase ph : kPhases) inj.set_der(n, ph, result.der_at(n, ph, t));
    const auto st = run_power_flow(net, inj, pf);
    for (NodeId n = 0; n < net.node_count(); ++n)
      for (Phase ph : kPhases) result.predicted_voltage[(n * 3 + index(ph)) * T + t] = st.u_abs(n, ph);
  }
  result.infer_phases();
  result.total(net.bases());
  return {std::move(result), std::move(trace)};
}

}  // namespace gridcap
