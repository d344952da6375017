#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gridcap/netmodel.hpp"

namespace gridcap {

/// DER connection phase per (node, period). An unset entry is free: the
/// optimiser chooses the phase through binaries.
class PhaseAssignment {
 public:
  PhaseAssignment() = default;
  PhaseAssignment(std::size_t node_count, std::size_t horizon)
      : nodes_(node_count), horizon_(horizon), phase_(node_count * horizon, kFree) {}

  std::size_t node_count() const noexcept { return nodes_; }
  std::size_t horizon() const noexcept { return horizon_; }

  std::optional<Phase> at(NodeId n, std::size_t t) const {
    const auto v = phase_[n * horizon_ + t];
    if (v == kFree) return std::nullopt;
    return phase_from_index(static_cast<std::size_t>(v));
  }
  void set(NodeId n, std::size_t t, Phase ph) { phase_[n * horizon_ + t] = static_cast<signed char>(index(ph)); }
  void set_all_periods(NodeId n, Phase ph) {
    for (std::size_t t = 0; t < horizon_; ++t) set(n, t, ph);
  }
  void clear(NodeId n, std::size_t t) { phase_[n * horizon_ + t] = kFree; }

  /// Whether every DER node has a phase in every period.
  bool fully_fixed(const NetworkModel& net) const {
    for (NodeId n : net.der_nodes())
      for (std::size_t t = 0; t < horizon_; ++t)
        if (!at(n, t)) return false;
    return true;
  }

  /// Whether each node keeps one phase (or stays free) across all periods.
  bool period_invariant() const {
    for (NodeId n = 0; n < nodes_; ++n)
      for (std::size_t t = 1; t < horizon_; ++t)
        if (phase_[n * horizon_ + t] != phase_[n * horizon_]) return false;
    return true;
  }

  PhaseAssignment slice(std::size_t t) const {
    PhaseAssignment out(nodes_, 1);
    for (NodeId n = 0; n < nodes_; ++n) out.phase_[n] = phase_[n * horizon_ + t];
    return out;
  }

  bool operator==(const PhaseAssignment&) const = default;

 private:
  static constexpr signed char kFree = -1;
  std::size_t nodes_ = 0;
  std::size_t horizon_ = 0;
  std::vector<signed char> phase_;
};

/// DER schedule produced by either formulation.
struct SolveResult {
  std::size_t node_count = 0;
  std::size_t horizon = 0;
  std::vector<double> der;                     // per-unit, (node * 3 + phase) * horizon + t
  std::vector<double> predicted_voltage;       // |U| as predicted by the model, same layout; may be empty
  std::vector<std::optional<Phase>> phase;     // node * horizon + t, empty where no DER is placed
  std::vector<double> period_objective_kw;
  double objective_kw = 0.0;
  bool big_m_binding = false;

  SolveResult() = default;
  SolveResult(std::size_t nodes, std::size_t periods)
      : node_count(nodes), horizon(periods), der(nodes * 3 * periods, 0.0), phase(nodes * periods),
        period_objective_kw(periods, 0.0) {}

  double& der_at(NodeId n, Phase ph, std::size_t t) { return der[(n * 3 + index(ph)) * horizon + t]; }
  double der_at(NodeId n, Phase ph, std::size_t t) const { return der[(n * 3 + index(ph)) * horizon + t]; }
  double voltage_at(NodeId n, Phase ph, std::size_t t) const {
    return predicted_voltage[(n * 3 + index(ph)) * horizon + t];
  }
  std::optional<Phase>& phase_at(NodeId n, std::size_t t) { return phase[n * horizon + t]; }
  std::optional<Phase> phase_at(NodeId n, std::size_t t) const { return phase[n * horizon + t]; }

  /// Recomputes per-period and total objectives (kW) from the schedule.
  void total(const Bases& base) {
    objective_kw = 0.0;
    for (std::size_t t = 0; t < horizon; ++t) {
      double pu = 0.0;
      for (NodeId n = 0; n < node_count; ++n)
        for (Phase ph : kPhases) pu += der_at(n, ph, t);
      period_objective_kw[t] = base.pu_to_kw(pu);
      objective_kw += period_objective_kw[t];
    }
  }

  /// Phases carrying DER power are recorded as the connection phase.
  void infer_phases(double threshold = 0.0) {
    for (NodeId n = 0; n < node_count; ++n)
      for (std::size_t t = 0; t < horizon; ++t)
        for (Phase ph : kPhases)
          if (der_at(n, ph, t) > threshold) phase_at(n, t) = ph;
  }
};

}  // namespace gridcap
