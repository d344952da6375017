#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gridcap/netmodel.hpp"

namespace gridcap {

using ComplexPhasor = std::complex<double>;

/// Per node and phase injections, per-unit. DER reactive power is always zero.
class InjectionSet {
 public:
  InjectionSet(const NetworkModel& net, Direction direction)
      : direction_(direction), slack_(net.slack()), load_(net.node_count() * 3),
        gen_(net.node_count() * 3), der_(net.node_count() * 3, 0.0) {}

  /// Loads and generation of period `t` of `demand`, no DER.
  static InjectionSet from_demand(const NetworkModel& net, const LoadProfile& demand, std::size_t t,
                                  Direction direction) {
    if (demand.node_count() != net.node_count())
      throw ValidationError("profile", "node count does not match the network");
    InjectionSet inj(net, direction);
    for (NodeId n = 0; n < net.node_count(); ++n) {
      if (n == net.slack()) continue;
      for (Phase ph : kPhases) {
        inj.load_[key(n, ph)] = {demand.p(n, ph, t), demand.q(n, ph, t)};
        inj.gen_[key(n, ph)] = {demand.gen_p(n, ph, t), demand.gen_q(n, ph, t)};
      }
    }
    return inj;
  }

  Direction direction() const noexcept { return direction_; }

  void set_der(NodeId n, Phase ph, double p) {
    if (n == slack_) throw ModelError("slack node carries no DER injection");
    der_[key(n, ph)] = p;
  }
  double der(NodeId n, Phase ph) const { return der_[key(n, ph)]; }
  std::complex<double> load(NodeId n, Phase ph) const { return load_[key(n, ph)]; }
  std::complex<double> gen(NodeId n, Phase ph) const { return gen_[key(n, ph)]; }

  /// Complex power drawn from the network at (n, ph): load minus generation,
  /// with DER entering on the generation side for export and the load side for import.
  std::complex<double> net_consumption(NodeId n, Phase ph) const {
    const std::size_t k = key(n, ph);
    const double sign = direction_ == Direction::Export ? -1.0 : 1.0;
    return load_[k] - gen_[k] + sign * der_[k];
  }

  /// d(net consumption)/d(DER power).
  double der_sign() const noexcept { return direction_ == Direction::Export ? -1.0 : 1.0; }

 private:
  static std::size_t key(NodeId n, Phase ph) { return n * 3 + index(ph); }

  Direction direction_;
  NodeId slack_;
  std::vector<std::complex<double>> load_;
  std::vector<std::complex<double>> gen_;
  std::vector<double> der_;
};

struct PowerFlowOptions {
  double voltage_tolerance = 1e-10;
  double residual_tolerance = 1e-8;
  std::size_t max_iterations = 200;
  double collapse_threshold = 0.5;
  double slack_voltage = 1.0;
};

struct PowerFlowState {
  std::vector<ComplexPhasor> voltage;         // node * 3 + phase
  std::vector<ComplexPhasor> branch_current;  // branch * 3 + phase, from -> to
  std::vector<double> branch_p;               // sending-end flow
  std::vector<double> branch_q;
  double residual = 0.0;
  std::size_t iterations = 0;

  ComplexPhasor u(NodeId n, Phase ph) const { return voltage[n * 3 + index(ph)]; }
  ComplexPhasor i(BranchId b, Phase ph) const { return branch_current[b * 3 + index(ph)]; }
  double u_abs(NodeId n, Phase ph) const { return std::abs(u(n, ph)); }
};

inline ComplexPhasor slack_reference(Phase ph, double magnitude = 1.0) {
  return std::polar(magnitude, nominal_angle(ph));
}

namespace pf_detail {

inline Eigen::Matrix3cd impedance(const Branch& b) {
  Eigen::Matrix3cd z;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) z(r, c) = {b.r(r, c), b.x(r, c)};
  return z;
}

}  // namespace pf_detail

/// Backward/forward sweep for a radial feeder with constant-PQ elements.
///
/// Backward: element currents conj(S / U) are accumulated up the tree (KCL).
/// Forward: U_to = U_from - Z * I with the full 3x3 coupling.
/// Throws CollapseDetected when any |U| drops below the collapse threshold and
/// NonConvergence when the iteration cap is reached.
inline PowerFlowState run_power_flow(const NetworkModel& net, const InjectionSet& inj,
                                     const PowerFlowOptions& opt = {}) {
  const std::size_t n_nodes = net.node_count();
  const std::size_t n_branches = net.branch_count();
  const auto& order = net.order();

  std::vector<Eigen::Matrix3cd> z(n_branches);
  for (BranchId b = 0; b < n_branches; ++b) z[b] = pf_detail::impedance(net.branch(b));

  std::vector<std::complex<double>> s(n_nodes * 3);
  for (NodeId n = 0; n < n_nodes; ++n)
    for (Phase ph : kPhases) s[n * 3 + index(ph)] = n == net.slack() ? 0.0 : inj.net_consumption(n, ph);

  PowerFlowState st;
  st.voltage.resize(n_nodes * 3);
  for (NodeId n = 0; n < n_nodes; ++n)
    for (Phase ph : kPhases) st.voltage[n * 3 + index(ph)] = slack_reference(ph, opt.slack_voltage);
  st.branch_current.assign(n_branches * 3, 0.0);

  std::vector<std::complex<double>> element(n_nodes * 3, 0.0);
  auto element_currents = [&](const std::vector<ComplexPhasor>& u, std::vector<std::complex<double>>& out) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = s[k] == 0.0 ? 0.0 : std::conj(s[k] / u[k]);
  };

  std::vector<double> history;
  std::vector<std::complex<double>> fresh(n_nodes * 3);
  for (std::size_t it = 1; it <= opt.max_iterations; ++it) {
    element_currents(st.voltage, element);
    for (auto rit = order.rbegin(); rit != order.rend(); ++rit) {
      const NodeId n = *rit;
      const auto pb = net.parent_branch(n);
      if (!pb) continue;
      for (std::size_t p = 0; p < 3; ++p) {
        std::complex<double> acc = element[n * 3 + p];
        for (BranchId c : net.child_branches(n)) acc += st.branch_current[c * 3 + p];
        st.branch_current[*pb * 3 + p] = acc;
      }
    }
    double change = 0.0;
    for (NodeId n : order) {
      const auto pb = net.parent_branch(n);
      if (!pb) continue;
      const Branch& br = net.branch(*pb);
      Eigen::Vector3cd cur(st.branch_current[*pb * 3], st.branch_current[*pb * 3 + 1],
                           st.branch_current[*pb * 3 + 2]);
      const Eigen::Vector3cd drop = z[*pb] * cur;
      for (std::size_t p = 0; p < 3; ++p) {
        const ComplexPhasor next = st.voltage[br.from * 3 + p] - drop(static_cast<int>(p));
        change = std::max(change, std::abs(next - st.voltage[n * 3 + p]));
        st.voltage[n * 3 + p] = next;
        if (std::abs(next) < opt.collapse_threshold)
          throw CollapseDetected("voltage collapse at node " + net.node_name(n) + " phase " +
                                 std::string(to_string(phase_from_index(p))) + " (|U| = " +
                                 std::to_string(std::abs(next)) + " p.u.)");
      }
    }
    // KCL mismatch of the stored branch currents against the updated voltages.
    element_currents(st.voltage, fresh);
    double residual = 0.0;
    for (std::size_t k = 0; k < fresh.size(); ++k) residual = std::max(residual, std::abs(fresh[k] - element[k]));
    history.push_back(residual);
    st.iterations = it;
    st.residual = residual;
    if (change < opt.voltage_tolerance && residual < opt.residual_tolerance) {
      st.branch_p.resize(n_branches * 3);
      st.branch_q.resize(n_branches * 3);
      for (BranchId b = 0; b < n_branches; ++b) {
        const NodeId from = net.branch(b).from;
        for (std::size_t p = 0; p < 3; ++p) {
          const ComplexPhasor u = st.voltage[from * 3 + p];
          const ComplexPhasor i = st.branch_current[b * 3 + p];
          st.branch_p[b * 3 + p] = u.real() * i.real() + u.imag() * i.imag();
          st.branch_q[b * 3 + p] = u.imag() * i.real() - u.real() * i.imag();
        }
      }
      return st;
    }
  }
  std::string what = "power flow did not converge in " + std::to_string(opt.max_iterations) + " iterations";
  if (!history.empty()) what += " (residual " + std::to_string(history.back()) + ")";
  throw NonConvergence(what, std::move(history));
}

/// Zero, positive and negative sequence components of a phase triple.
struct SequenceComponents {
  ComplexPhasor zero, positive, negative;
};

inline ComplexPhasor alpha() { return std::polar(1.0, 2.0 * std::numbers::pi / 3.0); }

inline SequenceComponents to_sequence(ComplexPhasor ua, ComplexPhasor ub, ComplexPhasor uc) {
  const ComplexPhasor a = alpha();
  const ComplexPhasor a2 = a * a;
  return {(ua + ub + uc) / 3.0, (ua + a * ub + a2 * uc) / 3.0, (ua + a2 * ub + a * uc) / 3.0};
}

inline std::array<ComplexPhasor, 3> from_sequence(const SequenceComponents& s) {
  const ComplexPhasor a = alpha();
  const ComplexPhasor a2 = a * a;
  return {s.zero + s.positive + s.negative, s.zero + a2 * s.positive + a * s.negative,
          s.zero + a * s.positive + a2 * s.negative};
}

/// Voltage unbalance factor |U_neg| / |U_pos| of a phase triple.
inline double vuf(ComplexPhasor ua, ComplexPhasor ub, ComplexPhasor uc) {
  const auto seq = to_sequence(ua, ub, uc);
  if (std::abs(seq.positive) < 1e-6)
    throw DegeneratePositiveSequence("positive-sequence voltage below 1e-6 p.u.");
  return std::abs(seq.negative) / std::abs(seq.positive);
}

inline double compute_vuf(const PowerFlowState& st, NodeId n) {
  return vuf(st.u(n, Phase::A), st.u(n, Phase::B), st.u(n, Phase::C));
}

enum class ConstraintKind { UnderVoltage, OverVoltage, Vuf, Ampacity };

constexpr std::string_view to_string(ConstraintKind k) noexcept {
  switch (k) {
    case ConstraintKind::UnderVoltage: return "under_voltage";
    case ConstraintKind::OverVoltage: return "over_voltage";
    case ConstraintKind::Vuf: return "vuf";
    case ConstraintKind::Ampacity: return "ampacity";
  }
  return "?";
}

struct Violation {
  ConstraintKind kind;
  std::string entity;  // node name or branch label
  std::optional<Phase> phase;
  double value;      // observed quantity (p.u. voltage, VUF fraction, p.u. current)
  double limit;
  double magnitude;  // exceedance, same unit as value
  std::size_t period = 0;
};

struct ConstraintReport {
  struct NodePhaseValue {
    NodeId node = 0;
    Phase phase = Phase::A;
    double value = 0.0;
  };
  struct NodeValue {
    NodeId node = 0;
    double value = 0.0;
  };
  struct BranchPhaseValue {
    BranchId branch = 0;
    Phase phase = Phase::A;
    double value = 0.0;
  };
  NodePhaseValue min_voltage;
  NodePhaseValue max_voltage;
  NodeValue max_vuf;
  BranchPhaseValue max_loading;  // fraction of ampacity
  std::vector<Violation> violations;

  bool ok() const noexcept { return violations.empty(); }

  double worst(ConstraintKind kind) const {
    double w = 0.0;
    for (const auto& v : violations)
      if (v.kind == kind) w = std::max(w, v.magnitude);
    return w;
  }

  double worst() const {
    double w = 0.0;
    for (const auto& v : violations) w = std::max(w, v.magnitude);
    return w;
  }
};

/// Evaluates voltage bounds, VUF and ampacity on a solved state. Quantities
/// beyond their limit by more than `tolerance` are listed as violations.
inline ConstraintReport check_constraints(const PowerFlowState& st, const NetworkModel& net,
                                          double tolerance = 0.0) {
  const auto& lim = net.limits();
  ConstraintReport rep;
  rep.min_voltage.value = std::numeric_limits<double>::infinity();
  rep.max_voltage.value = -std::numeric_limits<double>::infinity();
  rep.max_vuf.value = -1.0;
  rep.max_loading.value = -1.0;
  for (NodeId n = 0; n < net.node_count(); ++n) {
    for (Phase ph : kPhases) {
      const double u = st.u_abs(n, ph);
      if (u < rep.min_voltage.value) rep.min_voltage = {n, ph, u};
      if (u > rep.max_voltage.value) rep.max_voltage = {n, ph, u};
      if (u < lim.u_min - tolerance)
        rep.violations.push_back({ConstraintKind::UnderVoltage, net.node_name(n), ph, u, lim.u_min, lim.u_min - u});
      if (u > lim.u_max + tolerance)
        rep.violations.push_back({ConstraintKind::OverVoltage, net.node_name(n), ph, u, lim.u_max, u - lim.u_max});
    }
    const double f = compute_vuf(st, n);
    if (f > rep.max_vuf.value) rep.max_vuf = {n, f};
    if (f > lim.vuf_max + tolerance)
      rep.violations.push_back({ConstraintKind::Vuf, net.node_name(n), std::nullopt, f, lim.vuf_max, f - lim.vuf_max});
  }
  for (BranchId b = 0; b < net.branch_count(); ++b) {
    const double amp = net.branch(b).ampacity;
    for (Phase ph : kPhases) {
      const double i = std::abs(st.i(b, ph));
      if (i / amp > rep.max_loading.value) rep.max_loading = {b, ph, i / amp};
      if (i > amp + tolerance)
        rep.violations.push_back({ConstraintKind::Ampacity, net.branch_label(b), ph, i, amp, i - amp});
    }
  }
  return rep;
}

/// Constraints within `band` of their limit (inside or outside).
inline std::vector<Violation> binding_constraints(const PowerFlowState& st, const NetworkModel& net,
                                                  double band = 1e-4) {
  const auto& lim = net.limits();
  std::vector<Violation> out;
  for (NodeId n = 0; n < net.node_count(); ++n) {
    if (n == net.slack()) continue;
    for (Phase ph : kPhases) {
      const double u = st.u_abs(n, ph);
      if (u < lim.u_min + band)
        out.push_back({ConstraintKind::UnderVoltage, net.node_name(n), ph, u, lim.u_min, lim.u_min - u});
      if (u > lim.u_max - band)
        out.push_back({ConstraintKind::OverVoltage, net.node_name(n), ph, u, lim.u_max, u - lim.u_max});
    }
    const double f = compute_vuf(st, n);
    if (f > lim.vuf_max - band)
      out.push_back({ConstraintKind::Vuf, net.node_name(n), std::nullopt, f, lim.vuf_max, f - lim.vuf_max});
  }
  for (BranchId b = 0; b < net.branch_count(); ++b) {
    const double amp = net.branch(b).ampacity;
    for (Phase ph : kPhases) {
      const double i = std::abs(st.i(b, ph));
      if (i > amp - band) out.push_back({ConstraintKind::Ampacity, net.branch_label(b), ph, i, amp, i - amp});
    }
  }
  return out;
}

struct DerVariable {
  NodeId node;
  Phase phase;
};

/// First-order response of the solved state to one DER variable.
struct StateSensitivity {
  std::vector<ComplexPhasor> voltage;         // dU / dP, node * 3 + phase
  std::vector<ComplexPhasor> branch_current;  // dI / dP, branch * 3 + phase
};

/// Derivatives of all phase voltages and branch currents with respect to each
/// DER active power, obtained by iterating the linearised sweep to its fixed point.
inline std::vector<StateSensitivity> der_sensitivities(const NetworkModel& net, const InjectionSet& inj,
                                                       const PowerFlowState& st,
                                                       std::span<const DerVariable> vars,
                                                       double tolerance = 1e-13,
                                                       std::size_t max_iterations = 500) {
  const std::size_t n_nodes = net.node_count();
  const std::size_t n_branches = net.branch_count();
  const auto& order = net.order();
  std::vector<Eigen::Matrix3cd> z(n_branches);
  for (BranchId b = 0; b < n_branches; ++b) z[b] = pf_detail::impedance(net.branch(b));

  // dI_el = conj(dS)/conj(U) - conj(S) conj(dU) / conj(U)^2
  std::vector<std::complex<double>> coef_u(n_nodes * 3, 0.0);
  for (NodeId n = 0; n < n_nodes; ++n) {
    if (n == net.slack()) continue;
    for (Phase ph : kPhases) {
      const std::size_t k = n * 3 + index(ph);
      const auto cu = std::conj(st.voltage[k]);
      coef_u[k] = -std::conj(inj.net_consumption(n, ph)) / (cu * cu);
    }
  }

  std::vector<StateSensitivity> out;
  out.reserve(vars.size());
  std::vector<std::complex<double>> del(n_nodes * 3);
  for (const auto& var : vars) {
    StateSensitivity sens;
    sens.voltage.assign(n_nodes * 3, 0.0);
    sens.branch_current.assign(n_branches * 3, 0.0);
    const std::size_t seed_k = var.node * 3 + index(var.phase);
    const std::complex<double> seed = inj.der_sign() / std::conj(st.voltage[seed_k]);
    bool converged = false;
    for (std::size_t it = 0; it < max_iterations && !converged; ++it) {
      for (std::size_t k = 0; k < del.size(); ++k) del[k] = coef_u[k] * std::conj(sens.voltage[k]);
      del[seed_k] += seed;
      for (auto rit = order.rbegin(); rit != order.rend(); ++rit) {
        const auto pb = net.parent_branch(*rit);
        if (!pb) continue;
        for (std::size_t p = 0; p < 3; ++p) {
          std::complex<double> acc = del[*rit * 3 + p];
          for (BranchId c : net.child_branches(*rit)) acc += sens.branch_current[c * 3 + p];
          sens.branch_current[*pb * 3 + p] = acc;
        }
      }
      double change = 0.0;
      for (NodeId n : order) {
        const auto pb = net.parent_branch(n);
        if (!pb) continue;
        const NodeId from = net.branch(*pb).from;
        Eigen::Vector3cd cur(sens.branch_current[*pb * 3], sens.branch_current[*pb * 3 + 1],
                             sens.branch_current[*pb * 3 + 2]);
        const Eigen::Vector3cd drop = z[*pb] * cur;
        for (std::size_t p = 0; p < 3; ++p) {
          const auto next = sens.voltage[from * 3 + p] - drop(static_cast<int>(p));
          change = std::max(change, std::abs(next - sens.voltage[n * 3 + p]));
          sens.voltage[n * 3 + p] = next;
        }
      }
      converged = change < tolerance;
    }
    if (!converged) throw NonConvergence("sensitivity sweep did not converge", {});
    out.push_back(std::move(sens));
  }
  return out;
}

}  // namespace gridcap
