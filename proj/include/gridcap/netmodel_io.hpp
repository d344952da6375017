#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "gridcap/netmodel.hpp"

namespace gridcap {

namespace io_detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string node_id(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  throw ParseError("node id must be a string or integer");
}

inline Matrix3 matrix3(const nlohmann::json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(what + " must be a 3x3 array");
  Matrix3 m;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_array() || j[i].size() != 3) throw ParseError(what + " must be a 3x3 array");
    for (int k = 0; k < 3; ++k) {
      if (!j[i][k].is_number()) throw ParseError(what + " entries must be numbers");
      m(i, k) = j[i][k].get<double>();
    }
  }
  return m;
}

inline nlohmann::json to_json(const Matrix3& m) {
  nlohmann::json out = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) out.push_back({m(i, 0), m(i, 1), m(i, 2)});
  return out;
}

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// A kW value that converts back to exactly `pu`, when one lies within a few ulps.
inline double exact_kw(const Bases& base, double pu) {
  const double k = base.pu_to_kw(pu);
  if (base.kw_to_pu(k) == pu) return k;
  double lo = k, hi = k;
  for (int step = 0; step < 8; ++step) {
    lo = std::nextafter(lo, -std::numeric_limits<double>::infinity());
    hi = std::nextafter(hi, std::numeric_limits<double>::infinity());
    if (base.kw_to_pu(lo) == pu) return lo;
    if (base.kw_to_pu(hi) == pu) return hi;
  }
  return k;
}

}  // namespace io_detail

/// Parses the network JSON document (ohm/km impedances, amperes, volts).
inline NetworkData parse_network_json(const nlohmann::json& doc) {
  NetworkData data;
  try {
    int slack_count = 0;
    for (const auto& node : doc.at("nodes")) {
      data.nodes.push_back(io_detail::node_id(node.at("id")));
      if (node.value("is_slack", false)) {
        data.slack = data.nodes.back();
        ++slack_count;
      }
    }
    if (slack_count != 1)
      throw ParseError("exactly one node must have is_slack=true (found " + std::to_string(slack_count) + ")");
    for (const auto& br : doc.at("branches")) {
      NetworkData::Line line;
      line.from = io_detail::node_id(br.at("from"));
      line.to = io_detail::node_id(br.at("to"));
      line.r_ohm_per_km = io_detail::matrix3(br.at("r_matrix"), "r_matrix");
      line.x_ohm_per_km = io_detail::matrix3(br.at("x_matrix"), "x_matrix");
      line.length_km = br.at("length_km").get<double>();
      line.ampacity_a = br.at("ampacity_a").get<double>();
      data.lines.push_back(std::move(line));
    }
    const auto& base = doc.at("base");
    data.bases.v_ll_volts = base.at("v_ll_volts").get<double>();
    data.bases.s_base_va = base.at("s_base_va").get<double>();
    if (doc.contains("limits")) {
      const auto& lim = doc.at("limits");
      data.limits.u_min = lim.value("u_min", data.limits.u_min);
      data.limits.u_max = lim.value("u_max", data.limits.u_max);
      data.limits.vuf_max = lim.value("vuf_max", data.limits.vuf_max);
    }
    if (doc.contains("der_nodes"))
      for (const auto& n : doc.at("der_nodes")) data.der_nodes.push_back(io_detail::node_id(n));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed network file: ") + e.what());
  }
  return data;
}

inline NetworkModel load_network(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io_detail::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return NetworkModel(parse_network_json(doc));
}

inline nlohmann::json network_to_json(const NetworkModel& net) {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (NodeId n = 0; n < net.node_count(); ++n)
    doc["nodes"].push_back({{"id", net.node_name(n)}, {"is_slack", n == net.slack()}});
  doc["branches"] = nlohmann::json::array();
  for (const auto& b : net.branches()) {
    doc["branches"].push_back({{"from", net.node_name(b.from)},
                               {"to", net.node_name(b.to)},
                               {"r_matrix", io_detail::to_json(b.r_ohm_per_km)},
                               {"x_matrix", io_detail::to_json(b.x_ohm_per_km)},
                               {"length_km", b.length_km},
                               {"ampacity_a", b.ampacity_a}});
  }
  doc["base"] = {{"v_ll_volts", net.bases().v_ll_volts}, {"s_base_va", net.bases().s_base_va}};
  doc["limits"] = {{"u_min", net.limits().u_min},
                   {"u_max", net.limits().u_max},
                   {"vuf_max", net.limits().vuf_max}};
  doc["der_nodes"] = nlohmann::json::array();
  for (NodeId n : net.der_nodes()) doc["der_nodes"].push_back(net.node_name(n));
  return doc;
}

inline void write_network(const NetworkModel& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << network_to_json(net).dump(2) << '\n';
}

/// Sidecar JSON next to a profile CSV: same stem, `.json` extension.
inline std::filesystem::path profile_sidecar(const std::filesystem::path& csv) {
  auto p = csv;
  p.replace_extension(".json");
  return p;
}

/// Reads `node,phase,period,p_kw,q_kvar` rows (optional `gen_p_kw`, `gen_q_kvar`
/// columns) and converts to per-unit on the network's bases.
inline LoadProfile load_profile(const std::filesystem::path& path, const NetworkModel& net) {
  std::istringstream in(io_detail::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty profile");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> header;
  {
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) header.push_back(cell);
  }
  auto column = [&](const std::string& name) -> int {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int c_node = column("node"), c_phase = column("phase"), c_period = column("period");
  const int c_p = column("p_kw"), c_q = column("q_kvar");
  const int c_gp = column("gen_p_kw"), c_gq = column("gen_q_kvar");
  if (c_node < 0 || c_phase < 0 || c_period < 0 || c_p < 0 || c_q < 0)
    throw ParseError(path.string() + ": header must contain node,phase,period,p_kw,q_kvar");

  struct Row {
    NodeId node;
    Phase phase;
    std::size_t period;
    double p, q, gp, gq;
  };
  std::vector<Row> rows;
  std::size_t horizon = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != header.size())
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": wrong number of columns");
    const std::string where = path.string() + ":" + std::to_string(lineno);
    Row r{};
    r.node = net.index_of(cells[c_node]);
    const auto ph = parse_phase(cells[c_phase]);
    if (!ph) throw ParseError(where + ": bad phase '" + cells[c_phase] + "'");
    r.phase = *ph;
    try {
      const long long period = std::stoll(cells[c_period]);
      if (period < 0) throw ParseError(where + ": negative period");
      r.period = static_cast<std::size_t>(period);
      r.p = std::stod(cells[c_p]);
      r.q = std::stod(cells[c_q]);
      r.gp = c_gp >= 0 ? std::stod(cells[c_gp]) : 0.0;
      r.gq = c_gq >= 0 ? std::stod(cells[c_gq]) : 0.0;
    } catch (const std::logic_error&) {
      throw ParseError(where + ": non-numeric field");
    }
    horizon = std::max(horizon, r.period + 1);
    rows.push_back(r);
  }
  if (rows.empty()) throw ParseError(path.string() + ": no data rows");

  int step = 15;
  const auto sidecar = profile_sidecar(path);
  if (std::filesystem::exists(sidecar)) {
    try {
      step = nlohmann::json::parse(io_detail::read_file(sidecar)).at("step_minutes").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(sidecar.string() + ": " + e.what());
    }
  }

  const Bases& base = net.bases();
  LoadProfile profile(net.node_count(), horizon, step);
  for (const auto& r : rows) {
    profile.p(r.node, r.phase, r.period) = base.kw_to_pu(r.p);
    profile.q(r.node, r.phase, r.period) = base.kw_to_pu(r.q);
    profile.gen_p(r.node, r.phase, r.period) = base.kw_to_pu(r.gp);
    profile.gen_q(r.node, r.phase, r.period) = base.kw_to_pu(r.gq);
  }
  return profile;
}

/// Writes every loaded node (all phases, all periods) plus the sidecar.
inline void write_profile(const LoadProfile& profile, const NetworkModel& net,
                          const std::filesystem::path& path) {
  bool any_gen = false;
  for (NodeId n = 0; n < profile.node_count(); ++n)
    for (Phase ph : kPhases)
      for (std::size_t t = 0; t < profile.horizon(); ++t)
        any_gen = any_gen || profile.gen_p(n, ph, t) != 0.0 || profile.gen_q(n, ph, t) != 0.0;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "node,phase,period,p_kw,q_kvar" << (any_gen ? ",gen_p_kw,gen_q_kvar" : "") << '\n';
  const Bases& base = net.bases();
  using io_detail::format_double;
  for (NodeId n = 0; n < profile.node_count(); ++n) {
    if (!profile.has_load(n)) continue;
    for (Phase ph : kPhases)
      for (std::size_t t = 0; t < profile.horizon(); ++t) {
        out << net.node_name(n) << ',' << to_string(ph) << ',' << t << ','
            << format_double(io_detail::exact_kw(base, profile.p(n, ph, t))) << ','
            << format_double(io_detail::exact_kw(base, profile.q(n, ph, t)));
        if (any_gen)
          out << ',' << format_double(io_detail::exact_kw(base, profile.gen_p(n, ph, t))) << ','
              << format_double(io_detail::exact_kw(base, profile.gen_q(n, ph, t)));
        out << '\n';
      }
  }
  std::ofstream side(profile_sidecar(path), std::ios::binary);
  if (!side) throw Error("cannot write " + profile_sidecar(path).string());
  side << nlohmann::json{{"step_minutes", profile.step_minutes()}}.dump(2) << '\n';
}

}  // namespace gridcap
