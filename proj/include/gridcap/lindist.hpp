#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "gridcap/milp.hpp"
#include "gridcap/netmodel.hpp"
#include "gridcap/schedule.hpp"

namespace gridcap {

struct SensitivityMatrices {
  Matrix3 mp;
  Matrix3 mq;
};

/// LinDist3Flow coefficients of one branch: W_j = W_i - M_P P_ij - M_Q Q_ij.
///
/// Entry (p, q) couples the phase-q flow into the phase-p drop through
/// 2 Re{conj(z_pq) e^{j(theta_q - theta_p)}} style terms, with theta the
/// nominal phase angles, i.e. M_P = 2(R c - X s) and M_Q = 2(X c + R s) for
/// c = cos(theta_q - theta_p), s = sin(theta_q - theta_p).
inline SensitivityMatrices build_sensitivity_matrices(const Branch& br) {
  SensitivityMatrices m;
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) {
      // Off-diagonal angle differences are +-120 degrees; use exact values.
      const double th = nominal_angle(phase_from_index(q)) - nominal_angle(phase_from_index(p));
      const double c = p == q ? 1.0 : -0.5;
      const double s = p == q ? 0.0 : std::copysign(std::numbers::sqrt3 / 2.0, std::sin(th));
      m.mp(p, q) = 2.0 * (br.r(p, q) * c - br.x(p, q) * s);
      m.mq(p, q) = 2.0 * (br.x(p, q) * c + br.r(p, q) * s);
    }
  }
  return m;
}

enum class RowKind { ActiveBalance, ReactiveBalance, VoltageDrop, SlackVoltage, DerZero, BigMLink, PhaseGroup };

struct LinOptions {
  std::optional<double> big_m;  // per-unit; default 10 x slack-branch phase ampacities
  double slack_voltage = 1.0;
};

/// LinDist3Flow hosting-capacity program over all periods of a demand profile.
struct LinFormulation {
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  MilpProblem problem;
  std::vector<RowKind> row_kind;
  Direction direction = Direction::Export;
  double big_m = 0.0;
  std::size_t nodes = 0, branches = 0, horizon = 0;
  std::vector<std::size_t> w_var, p_var, q_var;  // (entity * 3 + phase) * horizon + t
  std::vector<std::size_t> der_var, bin_var;     // (node * 3 + phase) * horizon + t, kNone if absent

  std::size_t w(NodeId n, Phase ph, std::size_t t) const { return w_var[(n * 3 + index(ph)) * horizon + t]; }
  std::size_t p_flow(BranchId b, Phase ph, std::size_t t) const { return p_var[(b * 3 + index(ph)) * horizon + t]; }
  std::size_t q_flow(BranchId b, Phase ph, std::size_t t) const { return q_var[(b * 3 + index(ph)) * horizon + t]; }
  std::size_t der(NodeId n, Phase ph, std::size_t t) const { return der_var[(n * 3 + index(ph)) * horizon + t]; }
  std::size_t binary(NodeId n, Phase ph, std::size_t t) const { return bin_var[(n * 3 + index(ph)) * horizon + t]; }
  bool has_binaries() const noexcept { return !problem.binaries.empty(); }
};

inline double default_big_m(const NetworkModel& net) {
  double amp = 0.0;
  for (BranchId b : net.source_branches()) amp += 3.0 * net.branch(b).ampacity;
  return 10.0 * amp;
}

/// Builds the LP (all phases fixed) or MILP (some phases free) maximising total DER power.
inline LinFormulation build_lin_problem(const NetworkModel& net, const LoadProfile& demand, Direction direction,
                                        const PhaseAssignment& phases, const LinOptions& opt = {}) {
  if (demand.node_count() != net.node_count())
    throw ModelError("demand profile does not match the network node count");
  if (phases.node_count() != net.node_count() || phases.horizon() != demand.horizon())
    throw ModelError("phase assignment does not match the demand profile");
  if (net.is_der_node(net.slack())) throw ModelError("slack node cannot host DER");

  const std::size_t T = demand.horizon();
  const std::size_t N = net.node_count();
  const std::size_t B = net.branch_count();
  LinFormulation f;
  f.direction = direction;
  f.nodes = N;
  f.branches = B;
  f.horizon = T;
  f.big_m = opt.big_m.value_or(default_big_m(net));
  f.w_var.assign(N * 3 * T, LinFormulation::kNone);
  f.p_var.assign(B * 3 * T, LinFormulation::kNone);
  f.q_var.assign(B * 3 * T, LinFormulation::kNone);
  f.der_var.assign(N * 3 * T, LinFormulation::kNone);
  f.bin_var.assign(N * 3 * T, LinFormulation::kNone);

  auto& lp = f.problem.lp;
  lp.sense = Sense::Maximize;
  const auto& lim = net.limits();
  const double wmin = lim.u_min * lim.u_min, wmax = lim.u_max * lim.u_max;
  auto tag = [](const std::string& entity, Phase ph, std::size_t t) {
    return "[" + entity + "," + std::string(to_string(ph)) + "," + std::to_string(t) + "]";
  };
  auto add_row = [&](std::string name, std::vector<Term> terms, Relation rel, double rhs, RowKind kind) {
    lp.add_constraint(std::move(name), std::move(terms), rel, rhs);
    f.row_kind.push_back(kind);
  };
  // DER enters the nodal balance on the supply side for export, demand side for import.
  const double der_coef = direction == Direction::Export ? 1.0 : -1.0;

  std::vector<SensitivityMatrices> sens(B);
  for (BranchId b = 0; b < B; ++b) sens[b] = build_sensitivity_matrices(net.branch(b));

  for (std::size_t t = 0; t < T; ++t) {
    for (NodeId n = 0; n < N; ++n)
      for (Phase ph : kPhases)
        f.w_var[(n * 3 + index(ph)) * T + t] = lp.add_variable("W" + tag(net.node_name(n), ph, t), wmin, wmax);
    for (BranchId b = 0; b < B; ++b)
      for (Phase ph : kPhases) {
        f.p_var[(b * 3 + index(ph)) * T + t] = lp.add_variable("P" + tag(net.branch_label(b), ph, t), -kInf, kInf);
        f.q_var[(b * 3 + index(ph)) * T + t] = lp.add_variable("Q" + tag(net.branch_label(b), ph, t), -kInf, kInf);
      }
    for (NodeId n : net.der_nodes()) {
      const auto fixed = phases.at(n, t);
      std::vector<std::size_t> group;
      for (Phase ph : kPhases) {
        const std::size_t k = (n * 3 + index(ph)) * T + t;
        f.der_var[k] = lp.add_variable("Pder" + tag(net.node_name(n), ph, t), 0.0, kInf, 1.0);
        if (fixed) {
          if (*fixed != ph) add_row("derzero" + tag(net.node_name(n), ph, t), {{f.der_var[k], 1.0}}, Relation::Equal, 0.0, RowKind::DerZero);
          continue;
        }
        f.bin_var[k] = lp.add_variable("x" + tag(net.node_name(n), ph, t), 0.0, 1.0);
        f.problem.binaries.push_back(f.bin_var[k]);
        group.push_back(f.bin_var[k]);
        add_row("bigm" + tag(net.node_name(n), ph, t), {{f.der_var[k], 1.0}, {f.bin_var[k], -f.big_m}},
                Relation::LessEqual, 0.0, RowKind::BigMLink);
      }
      if (!group.empty()) {
        std::vector<Term> sum;
        for (auto v : group) sum.push_back({v, 1.0});
        add_row("group[" + net.node_name(n) + "," + std::to_string(t) + "]", std::move(sum), Relation::LessEqual, 1.0,
                RowKind::PhaseGroup);
        f.problem.sos_groups.push_back(std::move(group));
      }
    }

    for (Phase ph : kPhases)
      add_row("slack" + tag(net.node_name(net.slack()), ph, t), {{f.w(net.slack(), ph, t), 1.0}}, Relation::Equal,
              opt.slack_voltage * opt.slack_voltage, RowKind::SlackVoltage);

    for (NodeId n = 0; n < N; ++n) {
      const auto pb = net.parent_branch(n);
      if (!pb) continue;
      for (Phase ph : kPhases) {
        std::vector<Term> pr{{f.p_flow(*pb, ph, t), 1.0}};
        std::vector<Term> qr{{f.q_flow(*pb, ph, t), 1.0}};
        for (BranchId c : net.child_branches(n)) {
          pr.push_back({f.p_flow(c, ph, t), -1.0});
          qr.push_back({f.q_flow(c, ph, t), -1.0});
        }
        if (f.der(n, ph, t) != LinFormulation::kNone) pr.push_back({f.der(n, ph, t), der_coef});
        add_row("pbal" + tag(net.node_name(n), ph, t), std::move(pr), Relation::Equal,
                demand.p(n, ph, t) - demand.gen_p(n, ph, t), RowKind::ActiveBalance);
        add_row("qbal" + tag(net.node_name(n), ph, t), std::move(qr), Relation::Equal,
                demand.q(n, ph, t) - demand.gen_q(n, ph, t), RowKind::ReactiveBalance);
      }
    }

    for (BranchId b = 0; b < B; ++b) {
      const Branch& br = net.branch(b);
      for (Phase ph : kPhases) {
        const int p = static_cast<int>(index(ph));
        std::vector<Term> row{{f.w(br.to, ph, t), 1.0}, {f.w(br.from, ph, t), -1.0}};
        for (Phase qh : kPhases) {
          const int q = static_cast<int>(index(qh));
          if (sens[b].mp(p, q) != 0.0) row.push_back({f.p_flow(b, qh, t), sens[b].mp(p, q)});
          if (sens[b].mq(p, q) != 0.0) row.push_back({f.q_flow(b, qh, t), sens[b].mq(p, q)});
        }
        add_row("drop" + tag(net.branch_label(b), ph, t), std::move(row), Relation::Equal, 0.0, RowKind::VoltageDrop);
      }
    }
  }
  return f;
}

/// Voltage magnitudes the linear model assigns to a given DER schedule in period `t`:
/// lossless flows accumulated from the leaves, then W propagated from the slack.
inline std::vector<double> lindist_voltages(const NetworkModel& net, const LoadProfile& demand, Direction direction,
                                            const SolveResult& schedule, std::size_t t, double slack_voltage = 1.0) {
  const std::size_t N = net.node_count();
  const double der_sign = direction == Direction::Export ? -1.0 : 1.0;
  std::vector<double> p(N * 3, 0.0), q(N * 3, 0.0);
  for (NodeId n = 0; n < N; ++n) {
    if (n == net.slack()) continue;
    for (Phase ph : kPhases) {
      const std::size_t k = n * 3 + index(ph);
      p[k] = demand.p(n, ph, t) - demand.gen_p(n, ph, t) + der_sign * schedule.der_at(n, ph, t);
      q[k] = demand.q(n, ph, t) - demand.gen_q(n, ph, t);
    }
  }
  const auto& order = net.order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto pb = net.parent_branch(*it);
    if (!pb) continue;
    const NodeId from = net.branch(*pb).from;
    for (std::size_t ph = 0; ph < 3; ++ph) {
      p[from * 3 + ph] += p[*it * 3 + ph];
      q[from * 3 + ph] += q[*it * 3 + ph];
    }
  }
  std::vector<double> w(N * 3, slack_voltage * slack_voltage);
  for (NodeId n : order) {
    const auto pb = net.parent_branch(n);
    if (!pb) continue;
    const Branch& br = net.branch(*pb);
    const auto m = build_sensitivity_matrices(br);
    for (int a = 0; a < 3; ++a) {
      double drop = 0.0;
      for (int b = 0; b < 3; ++b) drop += m.mp(a, b) * p[n * 3 + b] + m.mq(a, b) * q[n * 3 + b];
      w[n * 3 + a] = w[br.from * 3 + a] - drop;
    }
  }
  for (auto& v : w) v = std::sqrt(std::max(0.0, v));
  return w;
}

/// Reads the schedule, predicted voltages and chosen phases out of a solution.
inline SolveResult extract_solution(const LinFormulation& f, const LpSolution& sol, const Bases& base) {
  if (sol.status != LpStatus::Optimal) throw ExtractionError("solution is not optimal");
  const auto& x = sol.primal;
  SolveResult out(f.nodes, f.horizon);
  out.predicted_voltage.assign(f.nodes * 3 * f.horizon, 0.0);
  for (NodeId n = 0; n < f.nodes; ++n)
    for (Phase ph : kPhases)
      for (std::size_t t = 0; t < f.horizon; ++t) {
        out.predicted_voltage[(n * 3 + index(ph)) * f.horizon + t] = std::sqrt(std::max(0.0, x[f.w(n, ph, t)]));
        const auto dv = f.der(n, ph, t);
        if (dv == LinFormulation::kNone) continue;
        out.der_at(n, ph, t) = std::max(0.0, x[dv]);
        const auto bv = f.binary(n, ph, t);
        if (bv == LinFormulation::kNone) continue;
        const double xb = x[bv];
        if (std::min(std::abs(xb), std::abs(1.0 - xb)) > kIntegralityTol)
          throw ExtractionError("binary " + f.problem.lp.variables[bv].name + " is fractional (" + std::to_string(xb) + ")");
        if (xb > 0.5) {
          out.phase_at(n, t) = ph;
          if (x[dv] >= f.big_m - 1e-6) out.big_m_binding = true;
        }
      }
  // Fixed phases are taken from the rows that zero the other phases.
  for (NodeId n = 0; n < f.nodes; ++n)
    for (std::size_t t = 0; t < f.horizon; ++t) {
      if (out.phase_at(n, t)) continue;
      for (Phase ph : kPhases)
        if (f.der(n, ph, t) != LinFormulation::kNone && f.binary(n, ph, t) == LinFormulation::kNone &&
            out.der_at(n, ph, t) > 0.0)
          out.phase_at(n, t) = ph;
    }
  out.total(base);
  return out;
}

inline SolveResult extract_solution(const LinFormulation& f, const MilpSolution& sol, const Bases& base) {
  if (sol.status != MilpStatus::Optimal && sol.status != MilpStatus::GapReached &&
      !(sol.status == MilpStatus::NodeLimit && sol.incumbent.status == LpStatus::Optimal))
    throw ExtractionError("no integer solution available");
  return extract_solution(f, sol.incumbent, base);
}

}  // namespace gridcap
