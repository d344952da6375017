#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gridcap/errors.hpp"

namespace gridcap {

enum class Phase : std::uint8_t { A = 0, B = 1, C = 2 };

inline constexpr std::array<Phase, 3> kPhases{Phase::A, Phase::B, Phase::C};

constexpr std::size_t index(Phase p) noexcept { return static_cast<std::size_t>(p); }

constexpr Phase phase_from_index(std::size_t i) noexcept { return static_cast<Phase>(i); }

constexpr std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::A: return "A";
    case Phase::B: return "B";
    case Phase::C: return "C";
  }
  return "?";
}

inline std::optional<Phase> parse_phase(std::string_view s) {
  if (s == "A" || s == "a") return Phase::A;
  if (s == "B" || s == "b") return Phase::B;
  if (s == "C" || s == "c") return Phase::C;
  return std::nullopt;
}

/// Nominal angle in radians: A at 0, B at -120 degrees, C at +120 degrees.
constexpr double nominal_angle(Phase p) noexcept {
  constexpr double third = 2.0 * std::numbers::pi / 3.0;
  switch (p) {
    case Phase::A: return 0.0;
    case Phase::B: return -third;
    case Phase::C: return third;
  }
  return 0.0;
}

/// Whether DER power is injected (generation) or drawn (additional demand).
enum class Direction { Export, Import };

constexpr std::string_view to_string(Direction d) noexcept {
  return d == Direction::Export ? "export" : "import";
}

inline std::optional<Direction> parse_direction(std::string_view s) {
  if (s == "export") return Direction::Export;
  if (s == "import") return Direction::Import;
  return std::nullopt;
}

using Matrix3 = Eigen::Matrix3d;

using NodeId = std::size_t;
using BranchId = std::size_t;

struct Branch {
  NodeId from = 0;
  NodeId to = 0;
  Matrix3 r = Matrix3::Zero();  // per-unit
  Matrix3 x = Matrix3::Zero();  // per-unit
  double ampacity = 0.0;        // per-unit, per phase

  // Source data as read from / written to network files.
  double length_km = 0.0;
  Matrix3 r_ohm_per_km = Matrix3::Zero();
  Matrix3 x_ohm_per_km = Matrix3::Zero();
  double ampacity_a = 0.0;
};

struct OperatingLimits {
  double u_min = 0.9;
  double u_max = 1.1;
  double vuf_max = 0.02;
};

/// Electrical bases. Power base is three-phase; per-phase quantities use s_base / 3.
struct Bases {
  double v_ll_volts = 400.0;
  double s_base_va = 1.0e6;

  double phase_voltage() const noexcept { return v_ll_volts / std::numbers::sqrt3; }
  double phase_power_va() const noexcept { return s_base_va / 3.0; }
  double impedance_ohm() const noexcept { return v_ll_volts * v_ll_volts / s_base_va; }
  double current_a() const noexcept { return phase_power_va() / phase_voltage(); }
  double kw_to_pu(double kw) const noexcept { return kw * 1000.0 / phase_power_va(); }
  double pu_to_kw(double pu) const noexcept { return pu * phase_power_va() / 1000.0; }
};

/// Unvalidated network description, the input to NetworkModel.
struct NetworkData {
  std::vector<std::string> nodes;
  std::string slack;
  std::vector<std::string> der_nodes;
  struct Line {
    std::string from;
    std::string to;
    Matrix3 r_ohm_per_km = Matrix3::Zero();
    Matrix3 x_ohm_per_km = Matrix3::Zero();
    double length_km = 0.0;
    double ampacity_a = 0.0;
  };
  std::vector<Line> lines;
  Bases bases;
  OperatingLimits limits;
};

namespace detail {

inline bool symmetric(const Matrix3& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

inline bool diagonally_dominant(const Matrix3& m) {
  for (int i = 0; i < 3; ++i) {
    if (m(i, i) < 0.0) return false;
    for (int j = 0; j < 3; ++j)
      if (i != j && std::abs(m(i, j)) > m(i, i) * (1.0 + 1e-12)) return false;
  }
  return true;
}

}  // namespace detail

/// Radial three-phase feeder. Validated on construction and immutable afterwards.
///
/// Branches are stored oriented away from the slack: `from` is always the
/// upstream node. Node 0 is not necessarily the slack.
class NetworkModel {
 public:
  explicit NetworkModel(const NetworkData& data) : bases_(data.bases), limits_(data.limits) {
    const auto& lim = limits_;
    if (!(lim.u_min > 0.0 && lim.u_min < 1.0 && lim.u_max >= 1.0))
      throw ValidationError("limits", "require 0 < u_min < 1 <= u_max");
    if (!(lim.vuf_max > 0.0 && lim.vuf_max < 1.0))
      throw ValidationError("limits", "require 0 < vuf_max < 1");
    if (!(bases_.v_ll_volts > 0.0 && bases_.s_base_va > 0.0))
      throw ValidationError("base", "bases must be positive");

    names_ = data.nodes;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (!lookup_.emplace(names_[i], i).second)
        throw ValidationError("node " + names_[i], "duplicate node id");
    }
    if (names_.empty()) throw ValidationError("network", "no nodes");
    slack_ = index_of(data.slack);

    const double zb = bases_.impedance_ohm();
    const double ib = bases_.current_a();
    for (const auto& line : data.lines) {
      const std::string label = "branch " + line.from + "-" + line.to;
      if (line.from == line.to) throw ValidationError("node " + line.from, "self-loop branch forms a cycle");
      Branch b;
      b.from = index_of(line.from);
      b.to = index_of(line.to);
      if (!detail::symmetric(line.r_ohm_per_km) || !detail::symmetric(line.x_ohm_per_km))
        throw ValidationError(label, "impedance matrix is not symmetric");
      if (!detail::diagonally_dominant(line.r_ohm_per_km) ||
          !detail::diagonally_dominant(line.x_ohm_per_km))
        throw ValidationError(label, "diagonal entries must dominate off-diagonal magnitudes");
      if (!(line.ampacity_a > 0.0)) throw ValidationError(label, "ampacity must be positive");
      if (!(line.length_km >= 0.0)) throw ValidationError(label, "negative length");
      b.length_km = line.length_km;
      b.r_ohm_per_km = line.r_ohm_per_km;
      b.x_ohm_per_km = line.x_ohm_per_km;
      b.ampacity_a = line.ampacity_a;
      b.r = line.r_ohm_per_km * line.length_km / zb;
      b.x = line.x_ohm_per_km * line.length_km / zb;
      b.ampacity = line.ampacity_a / ib;
      branches_.push_back(b);
    }
    build_topology();

    for (const auto& name : data.der_nodes) {
      const NodeId n = index_of(name);
      if (n == slack_) throw ValidationError("node " + name, "slack cannot host DER");
      if (std::find(der_nodes_.begin(), der_nodes_.end(), n) != der_nodes_.end())
        throw ValidationError("node " + name, "duplicate DER node");
      der_nodes_.push_back(n);
    }
    std::sort(der_nodes_.begin(), der_nodes_.end());
  }

  std::size_t node_count() const noexcept { return names_.size(); }
  std::size_t branch_count() const noexcept { return branches_.size(); }
  const std::string& node_name(NodeId n) const { return names_.at(n); }
  const std::vector<std::string>& node_names() const noexcept { return names_; }
  const std::vector<Branch>& branches() const noexcept { return branches_; }
  const Branch& branch(BranchId b) const { return branches_.at(b); }
  NodeId slack() const noexcept { return slack_; }
  const OperatingLimits& limits() const noexcept { return limits_; }
  const Bases& bases() const noexcept { return bases_; }
  const std::vector<NodeId>& der_nodes() const noexcept { return der_nodes_; }

  bool is_der_node(NodeId n) const {
    return std::binary_search(der_nodes_.begin(), der_nodes_.end(), n);
  }

  NodeId index_of(const std::string& name) const {
    auto it = lookup_.find(name);
    if (it == lookup_.end()) throw ValidationError("node " + name, "unknown node");
    return it->second;
  }

  /// Branch feeding `n`, empty for the slack.
  std::optional<BranchId> parent_branch(NodeId n) const {
    const auto b = parent_[n];
    if (b == kNone) return std::nullopt;
    return b;
  }

  const std::vector<BranchId>& child_branches(NodeId n) const { return children_.at(n); }

  /// Nodes in breadth-first order from the slack (slack first).
  const std::vector<NodeId>& order() const noexcept { return order_; }

  std::string branch_label(BranchId b) const {
    return names_[branches_[b].from] + "-" + names_[branches_[b].to];
  }

  /// Slack-adjacent branches.
  std::vector<BranchId> source_branches() const { return children_[slack_]; }

 private:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  void build_topology() {
    const std::size_t n = names_.size();
    if (branches_.size() + 1 != n)
      throw ValidationError("network", "a radial feeder needs exactly |nodes| - 1 branches (have " +
                                           std::to_string(branches_.size()) + " for " +
                                           std::to_string(n) + " nodes)");
    std::vector<std::vector<BranchId>> incident(n);
    for (BranchId b = 0; b < branches_.size(); ++b) {
      incident[branches_[b].from].push_back(b);
      incident[branches_[b].to].push_back(b);
    }
    parent_.assign(n, kNone);
    children_.assign(n, {});
    std::vector<bool> seen(n, false);
    std::vector<bool> used(branches_.size(), false);
    order_.clear();
    order_.push_back(slack_);
    seen[slack_] = true;
    for (std::size_t head = 0; head < order_.size(); ++head) {
      const NodeId u = order_[head];
      for (BranchId b : incident[u]) {
        if (used[b]) continue;
        used[b] = true;
        Branch& br = branches_[b];
        const NodeId v = br.from == u ? br.to : br.from;
        if (seen[v]) throw ValidationError("node " + names_[v], "branch graph contains a cycle");
        if (br.from != u) std::swap(br.from, br.to);
        seen[v] = true;
        parent_[v] = b;
        children_[u].push_back(b);
        order_.push_back(v);
      }
    }
    for (NodeId v = 0; v < n; ++v)
      if (!seen[v]) throw ValidationError("node " + names_[v], "not connected to the slack");
  }

  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> lookup_;
  std::vector<Branch> branches_;
  NodeId slack_ = 0;
  Bases bases_;
  OperatingLimits limits_;
  std::vector<NodeId> der_nodes_;
  std::vector<std::size_t> parent_;
  std::vector<std::vector<BranchId>> children_;
  std::vector<NodeId> order_;
};

/// Per node, phase and period demand in per-unit (per-phase power base).
///
/// Dense storage indexed by network node index. A DemandSnapshot is a
/// LoadProfile with horizon 1.
class LoadProfile {
 public:
  LoadProfile() = default;
  LoadProfile(std::size_t node_count, std::size_t horizon, int step_minutes = 15)
      : nodes_(node_count), horizon_(horizon), step_minutes_(step_minutes),
        p_(node_count * 3 * horizon, 0.0), q_(p_.size(), 0.0), gen_p_(p_.size(), 0.0),
        gen_q_(p_.size(), 0.0) {
    if (horizon == 0) throw ValidationError("profile", "horizon must be at least 1");
    if (step_minutes <= 0) throw ValidationError("profile", "step_minutes must be positive");
  }

  std::size_t node_count() const noexcept { return nodes_; }
  std::size_t horizon() const noexcept { return horizon_; }
  int step_minutes() const noexcept { return step_minutes_; }

  double& p(NodeId n, Phase ph, std::size_t t) { return p_[at(n, ph, t)]; }
  double& q(NodeId n, Phase ph, std::size_t t) { return q_[at(n, ph, t)]; }
  double& gen_p(NodeId n, Phase ph, std::size_t t) { return gen_p_[at(n, ph, t)]; }
  double& gen_q(NodeId n, Phase ph, std::size_t t) { return gen_q_[at(n, ph, t)]; }
  double p(NodeId n, Phase ph, std::size_t t) const { return p_[at(n, ph, t)]; }
  double q(NodeId n, Phase ph, std::size_t t) const { return q_[at(n, ph, t)]; }
  double gen_p(NodeId n, Phase ph, std::size_t t) const { return gen_p_[at(n, ph, t)]; }
  double gen_q(NodeId n, Phase ph, std::size_t t) const { return gen_q_[at(n, ph, t)]; }

  /// Single-period slice.
  LoadProfile slice(std::size_t t) const {
    LoadProfile out(nodes_, 1, step_minutes_);
    for (NodeId n = 0; n < nodes_; ++n)
      for (Phase ph : kPhases) {
        out.p(n, ph, 0) = p(n, ph, t);
        out.q(n, ph, 0) = q(n, ph, t);
        out.gen_p(n, ph, 0) = gen_p(n, ph, t);
        out.gen_q(n, ph, 0) = gen_q(n, ph, t);
      }
    return out;
  }

  /// Multiplies every load (not generation) entry by `k`.
  LoadProfile scaled(double k) const {
    LoadProfile out = *this;
    for (auto& v : out.p_) v *= k;
    for (auto& v : out.q_) v *= k;
    return out;
  }

  /// Whether the node carries any load or generation.
  bool has_load(NodeId n) const {
    for (Phase ph : kPhases)
      for (std::size_t t = 0; t < horizon_; ++t)
        if (p(n, ph, t) != 0.0 || q(n, ph, t) != 0.0) return true;
    return false;
  }

  /// The only loaded phase of a single-phase end user, empty otherwise.
  std::optional<Phase> single_phase_connection(NodeId n) const {
    std::optional<Phase> found;
    int loaded = 0;
    for (Phase ph : kPhases) {
      bool any = false;
      for (std::size_t t = 0; t < horizon_ && !any; ++t) any = p(n, ph, t) != 0.0 || q(n, ph, t) != 0.0;
      if (any) {
        ++loaded;
        found = ph;
      }
    }
    return loaded == 1 ? found : std::nullopt;
  }

  bool operator==(const LoadProfile&) const = default;

 private:
  std::size_t at(NodeId n, Phase ph, std::size_t t) const {
    return (n * 3 + index(ph)) * horizon_ + t;
  }

  std::size_t nodes_ = 0;
  std::size_t horizon_ = 0;
  int step_minutes_ = 15;
  std::vector<double> p_, q_, gen_p_, gen_q_;
};

using DemandSnapshot = LoadProfile;

/// Worst-case single-period demand: per (node, phase) the period of minimum
/// (export) or maximum (import) active demand. Reactive power and generation
/// are taken from that same period. Earliest period wins ties.
inline DemandSnapshot worst_case_snapshot(const LoadProfile& profile, Direction direction) {
  DemandSnapshot out(profile.node_count(), 1, profile.step_minutes());
  for (NodeId n = 0; n < profile.node_count(); ++n) {
    for (Phase ph : kPhases) {
      std::size_t best = 0;
      for (std::size_t t = 1; t < profile.horizon(); ++t) {
        const double v = profile.p(n, ph, t);
        const double b = profile.p(n, ph, best);
        if (direction == Direction::Export ? v < b : v > b) best = t;
      }
      out.p(n, ph, 0) = profile.p(n, ph, best);
      out.q(n, ph, 0) = profile.q(n, ph, best);
      out.gen_p(n, ph, 0) = profile.gen_p(n, ph, best);
      out.gen_q(n, ph, 0) = profile.gen_q(n, ph, best);
    }
  }
  return out;
}

}  // namespace gridcap
