#pragma once

#include <nlohmann/json.hpp>

#include "gridcap/scenarios.hpp"

namespace gridcap {

inline nlohmann::json to_json(const Violation& v) {
  nlohmann::json j{{"kind", to_string(v.kind)}, {"entity", v.entity}, {"value", v.value},
                   {"limit", v.limit},          {"magnitude", v.magnitude}, {"period", v.period}};
  j["phase"] = v.phase ? nlohmann::json(std::string(to_string(*v.phase))) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const ConstraintReport& r, const NetworkModel& net) {
  nlohmann::json j;
  if (std::isfinite(r.min_voltage.value)) {
    j["min_voltage"] = {{"node", net.node_name(r.min_voltage.node)},
                        {"phase", to_string(r.min_voltage.phase)},
                        {"value", r.min_voltage.value}};
    j["max_voltage"] = {{"node", net.node_name(r.max_voltage.node)},
                        {"phase", to_string(r.max_voltage.phase)},
                        {"value", r.max_voltage.value}};
  }
  if (r.max_vuf.value >= 0.0) j["max_vuf"] = {{"node", net.node_name(r.max_vuf.node)}, {"value", r.max_vuf.value}};
  if (r.max_loading.value >= 0.0)
    j["max_loading"] = {{"branch", net.branch_label(r.max_loading.branch)},
                        {"phase", to_string(r.max_loading.phase)},
                        {"value", r.max_loading.value}};
  j["ok"] = r.ok();
  j["violations"] = nlohmann::json::array();
  for (const auto& v : r.violations) j["violations"].push_back(to_json(v));
  return j;
}

inline nlohmann::json to_json(const Scenario& s) {
  nlohmann::json j{{"name", s.name()}};
  j["seed"] = s.seed ? nlohmann::json(*s.seed) : nlohmann::json(nullptr);
  return j;
}

/// Table cell. Wall-clock time is left out unless asked for so reports are reproducible.
inline nlohmann::json to_json(const ComparisonCell& c, bool with_time = false) {
  nlohmann::json j{{"scenario", to_json(c.scenario)},
                   {"formulation", to_string(c.formulation)},
                   {"status", to_string(c.status)},
                   {"objective_kw", c.objective_kw},
                   {"gap", c.gap},
                   {"certified_violation", c.certified_violation},
                   {"message", c.message}};
  if (with_time) j["time_s"] = c.time_s;
  return j;
}

inline nlohmann::json to_json(const ComparisonTable& t, bool with_time = false) {
  nlohmann::json j{{"direction", to_string(t.direction)}, {"cells", nlohmann::json::array()}};
  for (const auto& c : t.cells) j["cells"].push_back(to_json(c, with_time));
  return j;
}

/// Per-node DER power (kW) of period `t`; nodes without DER are omitted.
inline nlohmann::json schedule_json(const SolveResult& s, const NetworkModel& net, std::size_t t) {
  nlohmann::json j = nlohmann::json::array();
  for (NodeId n : net.der_nodes()) {
    const auto ph = s.phase_at(n, t);
    nlohmann::json e{{"node", net.node_name(n)}};
    e["phase"] = ph ? nlohmann::json(std::string(to_string(*ph))) : nlohmann::json(nullptr);
    for (Phase p : kPhases) e["p_kw"][std::string(to_string(p))] = net.bases().pu_to_kw(s.der_at(n, p, t));
    j.push_back(std::move(e));
  }
  return j;
}

inline nlohmann::json to_json(const HcResult& r, const NetworkModel& net) {
  nlohmann::json j{{"scenario", to_json(r.scenario)},
                   {"formulation", to_string(r.formulation)},
                   {"direction", to_string(r.direction)},
                   {"status", to_string(r.status)},
                   {"base_infeasible", r.base_infeasible},
                   {"objective_kw", r.objective_kw},
                   {"iterations", r.stats.iterations},
                   {"nodes", r.stats.nodes},
                   {"gap", r.stats.gap},
                   {"message", r.message}};
  if (r.base_infeasible) {
    j["diagnostic"] = to_json(r.diagnostic, net);
    return j;
  }
  if (!has_solution(r.status)) return j;
  j["schedule"] = schedule_json(r.schedule, net, 0);
  j["certified"] = to_json(r.certified, net);
  j["binding"] = nlohmann::json::array();
  for (const auto& v : r.binding) j["binding"].push_back(to_json(v));
  return j;
}

inline nlohmann::json to_json(const DoeResult& d, const NetworkModel& net) {
  nlohmann::json j{{"scenario", to_json(d.scenario)},
                   {"formulation", to_string(d.formulation)},
                   {"direction", to_string(d.direction)},
                   {"objective_kw_period", d.objective_kw},
                   {"failed_periods", d.failed_periods()},
                   {"periods", nlohmann::json::array()}};
  for (std::size_t t = 0; t < d.schedule.horizon; ++t) {
    nlohmann::json p{{"period", t},
                     {"status", to_string(d.period_status[t])},
                     {"objective_kw", d.schedule.period_objective_kw[t]},
                     {"gap", d.period_gap[t]}};
    if (!d.period_message[t].empty()) p["message"] = d.period_message[t];
    p["schedule"] = schedule_json(d.schedule, net, t);
    j["periods"].push_back(std::move(p));
  }
  return j;
}

inline nlohmann::json to_json(const VoltageComparison& v, const NetworkModel& net) {
  nlohmann::json j{{"node_phases", v.rows.size()}, {"within_1pct", v.fraction_within(0.01)}};
  if (const auto* w = v.worst())
    j["worst"] = {{"node", net.node_name(w->node)},
                  {"phase", to_string(w->phase)},
                  {"exact", w->exact},
                  {"lin", w->lin},
                  {"deviation", w->deviation()}};
  return j;
}

}  // namespace gridcap
