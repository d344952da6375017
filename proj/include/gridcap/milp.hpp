#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <queue>
#include <span>
#include <vector>

#include "gridcap/lp_core.hpp"

namespace gridcap {

struct MilpProblem {
  LinearProgram lp;
  std::vector<std::size_t> binaries;
  std::vector<std::vector<std::size_t>> sos_groups;  // at most one member may be 1
};

enum class MilpStatus { Optimal, GapReached, Infeasible, NodeLimit };

constexpr std::string_view to_string(MilpStatus s) noexcept {
  switch (s) {
    case MilpStatus::Optimal: return "optimal";
    case MilpStatus::GapReached: return "gap_reached";
    case MilpStatus::Infeasible: return "infeasible";
    case MilpStatus::NodeLimit: return "node_limit";
  }
  return "?";
}

struct MilpSolution {
  LpSolution incumbent;
  double best_bound = 0.0;
  double gap = 0.0;
  std::size_t nodes_explored = 0;
  MilpStatus status = MilpStatus::Infeasible;
};

inline constexpr double kIntegralityTol = 1e-6;

inline double relative_gap(double bound, double incumbent) {
  return std::abs(bound - incumbent) / std::max(std::abs(incumbent), 1e-9);
}

/// Best-bound branch and bound over the LP relaxation.
///
/// After a node is branched, the child on the side the relaxation leans to is
/// solved at once from the live factorisation (a plunge) and its sibling is
/// queued. Branching picks the most fractional binary (lowest index on ties);
/// the up-branch also fixes the other members of the binary's group to zero.
///
/// `start`, when given, holds one value per entry of `m.binaries`; the LP with
/// those binaries fixed seeds the incumbent.
inline MilpSolution solve_milp(const MilpProblem& m, double gap_tol, std::size_t node_limit = 200000,
                               const SimplexOptions& opt = {}, std::span<const double> start = {}) {
  if (!(gap_tol >= 0.0)) throw ModelError("gap tolerance must be non-negative");
  const auto t0 = std::chrono::steady_clock::now();
  const std::size_t n = m.lp.variables.size();
  std::vector<int> is_binary(n, 0);
  for (std::size_t j : m.binaries) {
    if (j >= n) throw ModelError("binary index out of range");
    const auto& v = m.lp.variables[j];
    if (v.lower < 0.0 || v.upper > 1.0) throw ModelError("binary " + v.name + " must have bounds within [0, 1]");
    is_binary[j] = 1;
  }
  std::vector<std::vector<std::size_t>> groups_of(n);
  for (std::size_t g = 0; g < m.sos_groups.size(); ++g)
    for (std::size_t j : m.sos_groups[g]) {
      if (j >= n || !is_binary[j]) throw ModelError("group member must be a binary variable");
      groups_of[j].push_back(g);
    }

  // Work in "larger is better" units regardless of sense.
  const double sgn = m.lp.sense == Sense::Maximize ? 1.0 : -1.0;
  SimplexEngine engine(m.lp, opt);
  // Queued siblings keep the parent's basis inverse while the total stays under this budget.
  constexpr double kInverseBudgetBytes = 256.0 * 1024.0 * 1024.0;
  const double rows = static_cast<double>(m.lp.constraints.size());
  const auto inverse_cap = static_cast<std::size_t>(kInverseBudgetBytes / std::max(1.0, 8.0 * rows * rows));
  std::size_t inverses_held = 0;

  struct Node {
    std::vector<std::pair<std::size_t, double>> fixes;  // binaries fixed on the path from the root
    double bound;                                       // parent relaxation value, larger is better
    std::size_t id;
    std::shared_ptr<const Basis> basis;
  };
  auto worse = [](const Node& a, const Node& b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> open(worse);

  MilpSolution out;
  bool have_incumbent = false;
  double inc_value = -kInf;
  double pruned_bound = -kInf;
  std::size_t total_iterations = 0;
  std::size_t next_id = 0;

  auto prune_limit = [&]() {
    if (!have_incumbent) return -kInf;
    return inc_value + std::max(gap_tol * std::max(std::abs(inc_value), 1e-9), 1e-9 * std::max(1.0, std::abs(inc_value)));
  };
  auto is_integral = [&](const std::vector<double>& x) {
    for (std::size_t j : m.binaries)
      if (std::min(x[j], 1.0 - x[j]) > kIntegralityTol) return false;
    return true;
  };
  auto offer = [&](const LpSolution& sol) {
    const double v = sgn * sol.objective;
    if (!have_incumbent || v > inc_value) {
      have_incumbent = true;
      inc_value = v;
      out.incumbent = sol;
    }
  };

  std::vector<double> root_lo(n), root_up(n);
  for (std::size_t j = 0; j < n; ++j) {
    root_lo[j] = m.lp.variables[j].lower;
    root_up[j] = m.lp.variables[j].upper;
  }
  std::vector<double> lower(n), upper(n);
  if (!start.empty()) {
    if (start.size() != m.binaries.size()) throw ModelError("MILP start must give one value per binary");
    lower = root_lo;
    upper = root_up;
    for (std::size_t i = 0; i < start.size(); ++i) {
      const double v = std::clamp(std::round(start[i]), root_lo[m.binaries[i]], root_up[m.binaries[i]]);
      lower[m.binaries[i]] = upper[m.binaries[i]] = v;
    }
    LpSolution seed = engine.solve(lower, upper);
    total_iterations += seed.iterations;
    if (seed.status == LpStatus::Optimal) offer(seed);
  }
  open.push({{}, kInf, next_id++, nullptr});
  bool root = true;
  bool limit_hit = false;

  while (!open.empty() && !limit_hit) {
    const double global = std::max({open.top().bound, pruned_bound, inc_value});
    if (have_incumbent && relative_gap(global, inc_value) <= gap_tol) break;
    std::optional<Node> next = open.top();
    open.pop();
    if (next->basis && next->basis->inverse) --inverses_held;

    while (next) {
      Node node = std::move(*next);
      next.reset();
      if (have_incumbent && node.bound <= prune_limit()) {
        pruned_bound = std::max(pruned_bound, node.bound);
        break;
      }
      if (out.nodes_explored >= node_limit) {
        limit_hit = true;
        open.push(std::move(node));
        break;
      }
      ++out.nodes_explored;
      lower = root_lo;
      upper = root_up;
      for (const auto& [j, v] : node.fixes) lower[j] = upper[j] = v;
      engine.set_export_inverse(inverses_held < inverse_cap);
      LpSolution rel = engine.solve(lower, upper, node.basis.get());
      total_iterations += rel.iterations;
      if (rel.status == LpStatus::Unbounded) throw ModelError("MILP relaxation is unbounded");
      if (rel.status != LpStatus::Optimal) break;
      const double value = sgn * rel.objective;

      if (root) {
        root = false;
        // Rounding heuristic: the largest member of each group, remaining binaries to nearest.
        std::vector<double> lo = lower, up = upper;
        std::vector<int> decided(n, 0);
        for (const auto& g : m.sos_groups) {
          std::size_t pick = g.front();
          for (std::size_t j : g)
            if (rel.primal[j] > rel.primal[pick] + 1e-12) pick = j;
          for (std::size_t j : g) {
            if (decided[j]) continue;
            decided[j] = 1;
            const double v = (j == pick && rel.primal[j] > kIntegralityTol) ? 1.0 : 0.0;
            lo[j] = up[j] = std::clamp(v, lower[j], upper[j]);
          }
        }
        for (std::size_t j : m.binaries) {
          if (decided[j]) continue;
          lo[j] = up[j] = std::clamp(std::round(rel.primal[j]), lower[j], upper[j]);
        }
        if (!is_integral(rel.primal)) {
          LpSolution heur = engine.solve(lo, up, &rel.basis);
          total_iterations += heur.iterations;
          if (heur.status == LpStatus::Optimal) offer(heur);
        }
      }

      if (have_incumbent && value <= prune_limit()) {
        pruned_bound = std::max(pruned_bound, value);
        break;
      }
      if (is_integral(rel.primal)) {
        offer(rel);
        break;
      }
      std::size_t branch = n;
      double best_frac = kIntegralityTol;
      for (std::size_t j : m.binaries) {
        const double f = std::min(rel.primal[j], 1.0 - rel.primal[j]);
        if (f > best_frac + 1e-12 || (branch != n && std::abs(f - best_frac) <= 1e-12 && j < branch)) {
          if (f > kIntegralityTol) {
            best_frac = f;
            branch = j;
          }
        }
      }
      auto basis = std::make_shared<const Basis>(std::move(rel.basis));
      Node up{node.fixes, value, next_id++, basis};
      up.fixes.emplace_back(branch, 1.0);
      for (std::size_t g : groups_of[branch])
        for (std::size_t k : m.sos_groups[g])
          if (k != branch) up.fixes.emplace_back(k, 0.0);
      Node down{std::move(node.fixes), value, next_id++, basis};
      down.fixes.emplace_back(branch, 0.0);
      const bool dive_up = rel.primal[branch] >= 0.5;
      Node& queued = dive_up ? down : up;
      if (basis->inverse) ++inverses_held;
      open.push(std::move(queued));
      next = std::move(dive_up ? up : down);
    }
  }

  const double open_bound = open.empty() ? -kInf : open.top().bound;
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!have_incumbent) {
    out.status = limit_hit ? MilpStatus::NodeLimit : MilpStatus::Infeasible;
    out.incumbent.status = LpStatus::Infeasible;
    out.incumbent.certificate = limit_hit ? "node limit reached without an incumbent" : "every branch infeasible";
    out.best_bound = sgn * std::max(open_bound, pruned_bound);
    out.gap = kInf;
  } else {
    const double bound = std::max({open_bound, pruned_bound, inc_value});
    out.best_bound = sgn * bound;
    out.gap = relative_gap(bound, inc_value);
    if (limit_hit)
      out.status = MilpStatus::NodeLimit;
    else if (out.gap <= 1e-9)
      out.status = MilpStatus::Optimal;
    else
      out.status = MilpStatus::GapReached;
  }
  out.incumbent.iterations = total_iterations;
  out.incumbent.elapsed = elapsed;
  return out;
}

}  // namespace gridcap
