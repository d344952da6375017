#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "gridcap/errors.hpp"

namespace gridcap {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Relation { LessEqual, Equal, GreaterEqual };
enum class Sense { Maximize, Minimize };

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
};

struct Term {
  std::size_t var;
  double coef;
};

struct Constraint {
  std::string name;
  std::vector<Term> terms;
  Relation relation = Relation::LessEqual;
  double rhs = 0.0;
};

struct LinearProgram {
  Sense sense = Sense::Maximize;
  std::vector<Variable> variables;
  std::vector<Constraint> constraints;
  std::vector<Term> objective;

  std::size_t add_variable(std::string name, double lower, double upper, double obj = 0.0) {
    variables.push_back({std::move(name), lower, upper});
    if (obj != 0.0) objective.push_back({variables.size() - 1, obj});
    return variables.size() - 1;
  }

  std::size_t add_constraint(std::string name, std::vector<Term> terms, Relation rel, double rhs) {
    constraints.push_back({std::move(name), std::move(terms), rel, rhs});
    return constraints.size() - 1;
  }

  /// Throws ModelError on dangling references, NaNs or crossed bounds.
  void validate() const {
    for (const auto& v : variables) {
      if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower > v.upper)
        throw ModelError("variable " + v.name + " has invalid bounds");
    }
    auto check_terms = [&](const std::vector<Term>& terms, const std::string& where) {
      for (const auto& t : terms) {
        if (t.var >= variables.size()) throw ModelError(where + " references a missing variable");
        if (!std::isfinite(t.coef)) throw ModelError(where + " has a non-finite coefficient");
      }
    };
    for (const auto& c : constraints) {
      check_terms(c.terms, "constraint " + c.name);
      if (std::isnan(c.rhs)) throw ModelError("constraint " + c.name + " has a NaN right-hand side");
    }
    check_terms(objective, "objective");
  }

  double evaluate_objective(std::span<const double> x) const {
    double v = 0.0;
    for (const auto& t : objective) v += t.coef * x[t.var];
    return v;
  }

  /// Largest absolute violation of any row or bound at `x`.
  double max_violation(std::span<const double> x) const {
    double worst = 0.0;
    for (std::size_t j = 0; j < variables.size(); ++j) {
      worst = std::max(worst, variables[j].lower - x[j]);
      worst = std::max(worst, x[j] - variables[j].upper);
    }
    for (const auto& c : constraints) {
      double lhs = 0.0;
      for (const auto& t : c.terms) lhs += t.coef * x[t.var];
      if (c.relation != Relation::GreaterEqual) worst = std::max(worst, lhs - c.rhs);
      if (c.relation != Relation::LessEqual) worst = std::max(worst, c.rhs - lhs);
    }
    return worst;
  }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

constexpr std::string_view to_string(LpStatus s) noexcept {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "?";
}

enum class VarStatus : std::uint8_t { Basic, AtLower, AtUpper, AtZero };

/// Status of every structural and logical (row) variable; used to warm start.
struct Basis {
  std::vector<VarStatus> status;
  // Optional basis inverse in `head` order; lets a warm start skip refactorisation.
  std::vector<std::size_t> head;
  std::shared_ptr<const Eigen::MatrixXd> inverse;
  std::size_t updates = 0;
};

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  double objective = 0.0;
  std::vector<double> primal;
  std::size_t iterations = 0;
  double elapsed = 0.0;
  std::string certificate;
  Basis basis;
};

struct SimplexOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  std::size_t bland_after = 500;  // consecutive degenerate pivots
  std::size_t refactor_every = 64;
  std::size_t confirm_refactor_after = 16;  // updates before an optimal basis is refactorised
  bool export_inverse = false;              // attach the final basis inverse to LpSolution::basis
  double max_condition = 1e12;
};

/// Bounded-variable primal revised simplex.
///
/// Each row i gets a logical variable s_i with A_i x - s_i = 0 whose bounds
/// encode the relation, so every column (structural or logical) is a bounded
/// variable and the all-logical basis is always available. Feasibility is
/// reached by a composite phase one that minimises the sum of bound
/// infeasibilities of basic variables. The basis inverse is kept dense and
/// updated in product form, refactored periodically.
class SimplexEngine {
 public:
  explicit SimplexEngine(const LinearProgram& lp, SimplexOptions opt = {})
      : opt_(opt), n_(lp.variables.size()), m_(lp.constraints.size()) {
    lp.validate();
    names_.reserve(n_ + m_);
    for (const auto& v : lp.variables) names_.push_back(v.name);
    for (const auto& c : lp.constraints) names_.push_back(c.name);
    default_lower_.resize(n_);
    default_upper_.resize(n_);
    for (std::size_t j = 0; j < n_; ++j) {
      default_lower_[j] = lp.variables[j].lower;
      default_upper_[j] = lp.variables[j].upper;
    }
    // Column-major copy of A, duplicate entries merged.
    std::vector<std::vector<std::pair<std::size_t, double>>> cols(n_);
    for (std::size_t i = 0; i < m_; ++i)
      for (const auto& t : lp.constraints[i].terms) {
        auto& col = cols[t.var];
        if (!col.empty() && col.back().first == i)
          col.back().second += t.coef;
        else
          col.emplace_back(i, t.coef);
      }
    col_start_.push_back(0);
    for (const auto& col : cols) {
      for (const auto& [row, v] : col) {
        if (v == 0.0) continue;
        row_idx_.push_back(row);
        values_.push_back(v);
      }
      col_start_.push_back(row_idx_.size());
    }
    row_lower_.resize(m_);
    row_upper_.resize(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto& c = lp.constraints[i];
      row_lower_[i] = c.relation == Relation::LessEqual ? -kInf : c.rhs;
      row_upper_[i] = c.relation == Relation::GreaterEqual ? kInf : c.rhs;
    }
    const double sign = lp.sense == Sense::Maximize ? -1.0 : 1.0;
    cost_.assign(n_ + m_, 0.0);
    for (const auto& t : lp.objective) cost_[t.var] += sign * t.coef;
    sense_sign_ = sign;
  }

  /// Whether optimal solves attach the basis inverse to LpSolution::basis.
  void set_export_inverse(bool on) noexcept { opt_.export_inverse = on; }

  std::size_t structural_count() const noexcept { return n_; }
  std::size_t row_count() const noexcept { return m_; }

  LpSolution solve(const Basis* warm = nullptr) { return solve(default_lower_, default_upper_, warm); }

  /// Solves with structural bounds replaced by `lower`/`upper`.
  LpSolution solve(std::span<const double> lower, std::span<const double> upper, const Basis* warm = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t total = n_ + m_;
    lo_.resize(total);
    up_.resize(total);
    for (std::size_t j = 0; j < n_; ++j) {
      lo_[j] = lower[j];
      up_[j] = upper[j];
    }
    for (std::size_t i = 0; i < m_; ++i) {
      lo_[n_ + i] = row_lower_[i];
      up_[n_ + i] = row_upper_[i];
    }
    iterations_ = 0;
    LpSolution sol;
    for (std::size_t j = 0; j < n_; ++j) {
      if (lo_[j] > up_[j] + opt_.feasibility_tol) {
        sol.status = LpStatus::Infeasible;
        sol.certificate = "crossed bounds on " + names_[j];
        sol.primal.assign(n_, 0.0);
        return finish(sol, t0);
      }
    }

    const bool reuse = warm && factor_valid_ && same_basic_set(*warm);
    factor_valid_ = false;
    if (reuse) {
      // The factorisation left by the previous solve already matches this basis.
      status_ = warm->status;
      place_nonbasic();
    } else if (warm && install_factored(*warm)) {
      place_nonbasic();
    } else {
      if (!(warm && install_basis(*warm))) install_slack_basis();
      place_nonbasic();
      if (!refactor()) {
        install_slack_basis();
        place_nonbasic();
        refactor();
      }
    }
    compute_basic();

    sol.status = iterate(sol.certificate);
    factor_valid_ = true;
    sol.primal.assign(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(n_));
    sol.basis.status = status_;
    if (opt_.export_inverse && sol.status == LpStatus::Optimal) {
      sol.basis.head = head_;
      sol.basis.inverse = std::make_shared<const Eigen::MatrixXd>(binv_);
      sol.basis.updates = updates_;
    }
    return finish(sol, t0);
  }

 private:
  static constexpr std::size_t kNpos = std::numeric_limits<std::size_t>::max();

  LpSolution& finish(LpSolution& sol, std::chrono::steady_clock::time_point t0) {
    double obj = 0.0;
    for (std::size_t j = 0; j < sol.primal.size(); ++j) obj += cost_[j] * sol.primal[j];
    sol.objective = sense_sign_ * obj;
    sol.iterations = iterations_;
    sol.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
  }

  void install_slack_basis() {
    status_.assign(n_ + m_, VarStatus::AtLower);
    head_.resize(m_);
    pos_.assign(n_ + m_, kNpos);
    for (std::size_t j = 0; j < n_; ++j) status_[j] = default_nonbasic(j);
    for (std::size_t i = 0; i < m_; ++i) {
      status_[n_ + i] = VarStatus::Basic;
      head_[i] = n_ + i;
      pos_[n_ + i] = i;
    }
  }

  VarStatus default_nonbasic(std::size_t j) const {
    if (std::isfinite(lo_[j])) return VarStatus::AtLower;
    if (std::isfinite(up_[j])) return VarStatus::AtUpper;
    return VarStatus::AtZero;
  }

  bool same_basic_set(const Basis& b) const {
    if (b.status.size() != status_.size()) return false;
    for (std::size_t j = 0; j < status_.size(); ++j)
      if ((b.status[j] == VarStatus::Basic) != (status_[j] == VarStatus::Basic)) return false;
    return true;
  }

  bool install_factored(const Basis& b) {
    if (!b.inverse || b.status.size() != n_ + m_ || b.head.size() != m_ ||
        b.inverse->rows() != static_cast<Eigen::Index>(m_))
      return false;
    status_ = b.status;
    head_ = b.head;
    pos_.assign(n_ + m_, kNpos);
    for (std::size_t i = 0; i < m_; ++i) pos_[head_[i]] = i;
    binv_ = *b.inverse;
    updates_ = b.updates;
    return true;
  }

  bool install_basis(const Basis& b) {
    if (b.status.size() != n_ + m_) return false;
    status_ = b.status;
    head_.clear();
    pos_.assign(n_ + m_, kNpos);
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (status_[j] == VarStatus::Basic) {
        pos_[j] = head_.size();
        head_.push_back(j);
      }
    }
    return head_.size() == m_;
  }

  // Puts nonbasic variables on a bound that exists under the current bounds.
  void place_nonbasic() {
    x_.assign(n_ + m_, 0.0);
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      auto& s = status_[j];
      if (s == VarStatus::Basic) continue;
      if (s == VarStatus::AtLower && !std::isfinite(lo_[j])) s = default_nonbasic(j);
      if (s == VarStatus::AtUpper && !std::isfinite(up_[j])) s = default_nonbasic(j);
      if (s == VarStatus::AtZero && (std::isfinite(lo_[j]) || std::isfinite(up_[j]))) s = default_nonbasic(j);
      x_[j] = s == VarStatus::AtLower ? lo_[j] : s == VarStatus::AtUpper ? up_[j] : 0.0;
    }
  }

  template <typename F>
  void for_column(std::size_t j, F&& f) const {
    if (j < n_) {
      for (std::size_t k = col_start_[j]; k < col_start_[j + 1]; ++k) f(row_idx_[k], values_[k]);
    } else {
      f(j - n_, -1.0);
    }
  }

  // With S the basic structural columns and R the rows whose logical is nonbasic
  // (|R| = |S|), only A[R, S] needs factorising: x_S = G b_R, s_L = A[L, S] G b_R - b_L.
  bool refactor() {
    updates_ = 0;
    binv_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(m_));
    std::vector<std::size_t> rows_r;
    std::vector<Eigen::Index> rmap(m_, -1);
    for (std::size_t i = 0; i < m_; ++i)
      if (status_[n_ + i] != VarStatus::Basic) {
        rmap[i] = static_cast<Eigen::Index>(rows_r.size());
        rows_r.push_back(i);
      }
    std::vector<std::size_t> spos;  // basis positions holding structural columns
    for (std::size_t p = 0; p < m_; ++p)
      if (head_[p] < n_) spos.push_back(p);
    const auto k = static_cast<Eigen::Index>(spos.size());
    if (rows_r.size() != spos.size()) return false;

    Eigen::MatrixXd g;
    if (k > 0) {
      std::vector<Eigen::Triplet<double>> trip;
      Eigen::VectorXd colsum = Eigen::VectorXd::Zero(k);
      for (Eigen::Index c = 0; c < k; ++c)
        for_column(head_[spos[static_cast<std::size_t>(c)]], [&](std::size_t r, double v) {
          if (rmap[r] < 0) return;
          trip.emplace_back(rmap[r], c, v);
          colsum(c) += std::abs(v);
        });
      Eigen::SparseMatrix<double> ars(k, k);
      ars.setFromTriplets(trip.begin(), trip.end());
      Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
      lu.analyzePattern(ars);
      lu.factorize(ars);
      if (lu.info() != Eigen::Success) return false;
      g = lu.solve(Eigen::MatrixXd::Identity(k, k));
      if (lu.info() != Eigen::Success || !g.allFinite()) return false;
      // Exact 1-norm condition number, since the inverse is at hand.
      const double cond = colsum.maxCoeff() * g.cwiseAbs().colwise().sum().maxCoeff();
      if (!(cond <= opt_.max_condition)) return false;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      const auto p = static_cast<Eigen::Index>(spos[static_cast<std::size_t>(c)]);
      for (Eigen::Index q = 0; q < k; ++q) binv_(p, static_cast<Eigen::Index>(rows_r[static_cast<std::size_t>(q)])) = g(c, q);
      for_column(head_[spos[static_cast<std::size_t>(c)]], [&](std::size_t r, double v) {
        if (rmap[r] >= 0) return;
        const auto lp = static_cast<Eigen::Index>(pos_[n_ + r]);
        for (Eigen::Index q = 0; q < k; ++q)
          binv_(lp, static_cast<Eigen::Index>(rows_r[static_cast<std::size_t>(q)])) += v * g(c, q);
      });
    }
    for (std::size_t i = 0; i < m_; ++i)
      if (rmap[i] < 0) binv_(static_cast<Eigen::Index>(pos_[n_ + i]), static_cast<Eigen::Index>(i)) = -1.0;
    return true;
  }

  void compute_basic() {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (status_[j] == VarStatus::Basic || x_[j] == 0.0) continue;
      const double xj = x_[j];
      for_column(j, [&](std::size_t r, double v) { rhs(static_cast<Eigen::Index>(r)) -= v * xj; });
    }
    const Eigen::VectorXd xb = binv_ * rhs;
    for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] = xb(static_cast<Eigen::Index>(i));
  }

  double infeasibility(std::size_t j) const {
    if (x_[j] < lo_[j] - opt_.feasibility_tol) return lo_[j] - x_[j];
    if (x_[j] > up_[j] + opt_.feasibility_tol) return x_[j] - up_[j];
    return 0.0;
  }

  LpStatus iterate(std::string& certificate) {
    const std::size_t total = n_ + m_;
    const std::size_t cap = 200 * total + 20000;
    std::size_t degenerate = 0;
    bool bland = false;
    Eigen::VectorXd cb(static_cast<Eigen::Index>(m_));
    Eigen::VectorXd alpha(static_cast<Eigen::Index>(m_));
    bool confirmed = false;

    for (;;) {
      if (iterations_ >= cap)
        throw NumericalBreakdown("simplex iteration limit reached", iterations_);
      if (updates_ >= opt_.refactor_every) {
        if (!refactor()) throw NumericalBreakdown("basis condition estimate exceeds limit", iterations_);
        compute_basic();
      }

      // Phase selection: any basic bound violation means phase one.
      double infeas_sum = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const std::size_t j = head_[i];
        const double inf = infeasibility(j);
        infeas_sum += inf;
        cb(static_cast<Eigen::Index>(i)) = inf == 0.0 ? 0.0 : (x_[j] < lo_[j] ? -1.0 : 1.0);
      }
      const bool phase_one = infeas_sum > 0.0;
      if (!phase_one)
        for (std::size_t i = 0; i < m_; ++i) cb(static_cast<Eigen::Index>(i)) = cost_[head_[i]];

      const Eigen::VectorXd y = binv_.transpose() * cb;

      // Pricing.
      std::size_t entering = kNpos;
      double best = 0.0;
      double dir = 0.0;
      for (std::size_t j = 0; j < total; ++j) {
        const VarStatus s = status_[j];
        if (s == VarStatus::Basic) continue;
        if (lo_[j] == up_[j]) continue;
        double dj = phase_one ? 0.0 : cost_[j];
        for_column(j, [&](std::size_t r, double v) { dj -= y(static_cast<Eigen::Index>(r)) * v; });
        double move = 0.0;
        if (dj < -opt_.optimality_tol && (s == VarStatus::AtLower || s == VarStatus::AtZero)) move = 1.0;
        if (dj > opt_.optimality_tol && (s == VarStatus::AtUpper || s == VarStatus::AtZero)) move = -1.0;
        if (move == 0.0) continue;
        if (bland) {
          entering = j;
          dir = move;
          break;
        }
        if (std::abs(dj) > best) {
          best = std::abs(dj);
          entering = j;
          dir = move;
        }
      }

      if (entering == kNpos) {
        // Confirm on recomputed basic values (and a fresh factorisation after many updates).
        if (!confirmed) {
          confirmed = true;
          if (updates_ >= opt_.confirm_refactor_after && !refactor())
            throw NumericalBreakdown("basis condition estimate exceeds limit", iterations_);
          compute_basic();
          continue;
        }
        if (phase_one) {
          certificate = "phase-one infeasibility " + std::to_string(infeas_sum) + " on";
          int listed = 0;
          for (std::size_t i = 0; i < m_ && listed < 5; ++i)
            if (infeasibility(head_[i]) > 0.0) {
              certificate += " " + names_[head_[i]];
              ++listed;
            }
          return LpStatus::Infeasible;
        }
        return LpStatus::Optimal;
      }

      // Ratio test.
      alpha.setZero();
      for_column(entering, [&](std::size_t r, double v) { alpha += binv_.col(static_cast<Eigen::Index>(r)) * v; });
      double theta = kInf;
      std::size_t leave_pos = kNpos;
      VarStatus leave_to = VarStatus::AtLower;
      double leave_alpha = 0.0;
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = alpha(static_cast<Eigen::Index>(i));
        if (std::abs(a) <= opt_.pivot_tol) continue;
        const std::size_t j = head_[i];
        const double rate = -dir * a;
        double t = kInf;
        VarStatus to = VarStatus::AtLower;
        if (rate < 0.0) {
          if (x_[j] > up_[j] + opt_.feasibility_tol) {
            t = (x_[j] - up_[j]) / -rate;
            to = VarStatus::AtUpper;
          } else if (std::isfinite(lo_[j]) && x_[j] >= lo_[j] - opt_.feasibility_tol) {
            t = std::max(0.0, x_[j] - lo_[j]) / -rate;
            to = VarStatus::AtLower;
          }
        } else {
          if (x_[j] < lo_[j] - opt_.feasibility_tol) {
            t = (lo_[j] - x_[j]) / rate;
            to = VarStatus::AtLower;
          } else if (std::isfinite(up_[j]) && x_[j] <= up_[j] + opt_.feasibility_tol) {
            t = std::max(0.0, up_[j] - x_[j]) / rate;
            to = VarStatus::AtUpper;
          }
        }
        if (!std::isfinite(t)) continue;
        bool take = false;
        if (t < theta - 1e-12) {
          take = true;
        } else if (t <= theta + 1e-12 && leave_pos != kNpos) {
          take = bland ? j < head_[leave_pos] : std::abs(a) > std::abs(leave_alpha);
        }
        if (take) {
          theta = t;
          leave_pos = i;
          leave_to = to;
          leave_alpha = a;
        }
      }
      const double range = up_[entering] - lo_[entering];
      const bool flip = std::isfinite(range) && range <= theta;
      if (flip) theta = range;
      if (!std::isfinite(theta)) {
        if (!phase_one) {
          certificate = "unbounded ray along " + names_[entering];
          return LpStatus::Unbounded;
        }
        throw NumericalBreakdown("phase one produced an unbounded ray", iterations_);
      }

      ++iterations_;
      confirmed = false;
      if (theta <= 1e-12) {
        if (++degenerate >= opt_.bland_after) bland = true;
      } else {
        degenerate = 0;
        bland = false;
      }

      x_[entering] += dir * theta;
      for (std::size_t i = 0; i < m_; ++i) x_[head_[i]] -= dir * theta * alpha(static_cast<Eigen::Index>(i));

      if (flip) {
        status_[entering] = dir > 0.0 ? VarStatus::AtUpper : VarStatus::AtLower;
        x_[entering] = dir > 0.0 ? up_[entering] : lo_[entering];
        continue;
      }

      const std::size_t leaving = head_[leave_pos];
      x_[leaving] = leave_to == VarStatus::AtLower ? lo_[leaving] : up_[leaving];
      status_[leaving] = leave_to;
      pos_[leaving] = kNpos;
      status_[entering] = VarStatus::Basic;
      head_[leave_pos] = entering;
      pos_[entering] = leave_pos;

      const auto p = static_cast<Eigen::Index>(leave_pos);
      const Eigen::RowVectorXd pivot_row = binv_.row(p) / leave_alpha;
      alpha(p) -= 1.0;
      binv_.noalias() -= alpha * pivot_row;
      ++updates_;
    }
  }

  SimplexOptions opt_;
  std::size_t n_, m_;
  std::vector<std::string> names_;
  std::vector<double> default_lower_, default_upper_;
  std::vector<std::size_t> col_start_, row_idx_;
  std::vector<double> values_;
  std::vector<double> row_lower_, row_upper_;
  std::vector<double> cost_;
  double sense_sign_ = 1.0;

  std::vector<double> lo_, up_, x_;
  std::vector<VarStatus> status_;
  std::vector<std::size_t> head_, pos_;
  Eigen::MatrixXd binv_;
  std::size_t updates_ = 0;
  std::size_t iterations_ = 0;
  bool factor_valid_ = false;
};

inline LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& opt = {}) {
  SimplexEngine engine(lp, opt);
  return engine.solve();
}

/// Fixed-format MPS dump. Names are replaced by Cnnnnnnn / Rnnnnnnn codes with
/// the original names listed in comment lines; a maximisation is written negated.
inline void write_mps(const LinearProgram& lp, std::ostream& out, const std::string& name = "GRIDCAP") {
  auto col = [](std::size_t j) {
    char b[32];
    std::snprintf(b, sizeof b, "C%07zu", j);
    return std::string(b);
  };
  auto row = [](std::size_t i) {
    char b[32];
    std::snprintf(b, sizeof b, "R%07zu", i);
    return std::string(b);
  };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%12.6g", v);
    return std::string(b);
  };
  auto field = [](const std::string& s, std::size_t width) {
    std::string out = s;
    out.resize(std::max(width, s.size()), ' ');
    return out;
  };
  const double sign = lp.sense == Sense::Maximize ? -1.0 : 1.0;
  for (std::size_t j = 0; j < lp.variables.size(); ++j) out << "* " << col(j) << " " << lp.variables[j].name << '\n';
  for (std::size_t i = 0; i < lp.constraints.size(); ++i) out << "* " << row(i) << " " << lp.constraints[i].name << '\n';
  if (sign < 0.0) out << "* objective negated: original sense is MAX\n";
  out << field("NAME", 14) << name << '\n';
  out << "ROWS\n";
  out << " N  COST\n";
  for (std::size_t i = 0; i < lp.constraints.size(); ++i) {
    const char t = lp.constraints[i].relation == Relation::LessEqual ? 'L'
                   : lp.constraints[i].relation == Relation::Equal   ? 'E'
                                                                     : 'G';
    out << ' ' << t << "  " << row(i) << '\n';
  }
  std::vector<std::vector<std::pair<std::string, double>>> cols(lp.variables.size());
  std::vector<double> obj(lp.variables.size(), 0.0);
  for (const auto& t : lp.objective) obj[t.var] += t.coef;
  for (std::size_t j = 0; j < obj.size(); ++j)
    if (obj[j] != 0.0) cols[j].emplace_back("COST", sign * obj[j]);
  for (std::size_t i = 0; i < lp.constraints.size(); ++i)
    for (const auto& t : lp.constraints[i].terms) cols[t.var].emplace_back(row(i), t.coef);
  out << "COLUMNS\n";
  for (std::size_t j = 0; j < cols.size(); ++j)
    for (const auto& [r, v] : cols[j]) out << "    " << field(col(j), 10) << field(r, 8) << "  " << num(v) << '\n';
  out << "RHS\n";
  for (std::size_t i = 0; i < lp.constraints.size(); ++i)
    if (lp.constraints[i].rhs != 0.0)
      out << "    " << field("RHS", 10) << field(row(i), 8) << "  " << num(lp.constraints[i].rhs) << '\n';
  out << "BOUNDS\n";
  for (std::size_t j = 0; j < lp.variables.size(); ++j) {
    const auto& v = lp.variables[j];
    const std::string c = field(col(j), 8);
    if (v.lower == v.upper) {
      out << " FX BND       " << c << "  " << num(v.lower) << '\n';
      continue;
    }
    if (!std::isfinite(v.lower) && !std::isfinite(v.upper)) {
      out << " FR BND       " << c << '\n';
      continue;
    }
    if (!std::isfinite(v.lower))
      out << " MI BND       " << c << '\n';
    else if (v.lower != 0.0)
      out << " LO BND       " << c << "  " << num(v.lower) << '\n';
    if (std::isfinite(v.upper)) out << " UP BND       " << c << "  " << num(v.upper) << '\n';
  }
  out << "ENDATA\n";
}

}  // namespace gridcap
