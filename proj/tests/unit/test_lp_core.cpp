#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "gridcap/lp_core.hpp"
#include "reference_simplex.hpp"

using namespace gridcap;

namespace {

LinearProgram random_feasible_lp(std::uint64_t seed, std::size_t n, std::size_t m) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_real_distribution<double> pos(0.0, 1.0);
  LinearProgram lp;
  lp.sense = seed % 2 ? Sense::Maximize : Sense::Minimize;
  std::vector<double> x0(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double ub = 1.0 + 4.0 * pos(rng);
    lp.add_variable("x" + std::to_string(j), 0.0, ub, coef(rng));
    x0[j] = ub * pos(rng);
  }
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<Term> row;
    double ax = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (pos(rng) < 0.4) {
        const double a = coef(rng);
        row.push_back({j, a});
        ax += a * x0[j];
      }
    }
    const double kind = pos(rng);
    if (kind < 0.6)
      lp.add_constraint("r" + std::to_string(i), row, Relation::LessEqual, ax + pos(rng));
    else if (kind < 0.85)
      lp.add_constraint("r" + std::to_string(i), row, Relation::GreaterEqual, ax - pos(rng));
    else
      lp.add_constraint("r" + std::to_string(i), row, Relation::Equal, ax);
  }
  return lp;
}

}  // namespace

TEST(Simplex, SingleBound) {
  LinearProgram lp;
  const auto x = lp.add_variable("x", 0.0, 10.0, 1.0);
  lp.add_constraint("cap", {{x, 1.0}}, Relation::LessEqual, 3.0);
  const auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, 3.0, 1e-12);
  EXPECT_NEAR(sol.primal[x], 3.0, 1e-12);
}

TEST(Simplex, DegenerateFace) {
  LinearProgram lp;
  const auto x = lp.add_variable("x", 0.0, kInf, 1.0);
  const auto y = lp.add_variable("y", 0.0, kInf, 1.0);
  lp.add_constraint("sum", {{x, 1.0}, {y, 1.0}}, Relation::LessEqual, 1.0);
  const auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, 1.0, 1e-12);
  EXPECT_NEAR(sol.primal[x] + sol.primal[y], 1.0, 1e-12);
}

TEST(Simplex, InfeasibleAndUnbounded) {
  LinearProgram lp;
  const auto x = lp.add_variable("x", 0.0, 5.0, 1.0);
  lp.add_constraint("low", {{x, 1.0}}, Relation::GreaterEqual, 7.0);
  const auto inf = solve_lp(lp);
  EXPECT_EQ(inf.status, LpStatus::Infeasible);
  EXPECT_NE(inf.certificate.find("low"), std::string::npos);

  LinearProgram ub;
  const auto a = ub.add_variable("a", 0.0, kInf, 1.0);
  const auto b = ub.add_variable("b", -kInf, kInf, 0.0);
  ub.add_constraint("link", {{a, 1.0}, {b, -1.0}}, Relation::LessEqual, 2.0);
  const auto sol = solve_lp(ub);
  EXPECT_EQ(sol.status, LpStatus::Unbounded);
  EXPECT_FALSE(sol.certificate.empty());
}

TEST(Simplex, FreeVariablesAndEqualities) {
  // min |shape| style: min t s.t. t >= x - 2, t >= 2 - x, x = 3 - y, y in [0, 0.5], x, t free.
  LinearProgram lp;
  lp.sense = Sense::Minimize;
  const auto x = lp.add_variable("x", -kInf, kInf);
  const auto y = lp.add_variable("y", 0.0, 0.5);
  const auto t = lp.add_variable("t", -kInf, kInf, 1.0);
  lp.add_constraint("a", {{t, 1.0}, {x, -1.0}}, Relation::GreaterEqual, -2.0);
  lp.add_constraint("b", {{t, 1.0}, {x, 1.0}}, Relation::GreaterEqual, 2.0);
  lp.add_constraint("c", {{x, 1.0}, {y, 1.0}}, Relation::Equal, 3.0);
  const auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, 0.5, 1e-12);
  EXPECT_NEAR(sol.primal[x], 2.5, 1e-12);
  EXPECT_LE(lp.max_violation(sol.primal), 1e-9);
}

TEST(Simplex, MatchesTableauReferenceOnRandomLps) {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto lp = random_feasible_lp(seed, 50, 30);
    const auto sol = solve_lp(lp);
    const auto ref = reference::tableau_simplex(lp);
    ASSERT_TRUE(ref.feasible) << seed;
    ASSERT_EQ(sol.status, LpStatus::Optimal) << seed << " " << sol.certificate;
    EXPECT_NEAR(sol.objective, ref.objective, 1e-7) << seed;
    EXPECT_LE(lp.max_violation(sol.primal), 1e-7) << seed;
    for (std::size_t j = 0; j < lp.variables.size(); ++j) {
      EXPECT_GE(sol.primal[j], lp.variables[j].lower - 1e-9);
      EXPECT_LE(sol.primal[j], lp.variables[j].upper + 1e-9);
    }
  }
}

TEST(Simplex, WarmStartReachesSameOptimum) {
  const auto lp = random_feasible_lp(99, 40, 25);
  SimplexEngine engine(lp);
  const auto cold = engine.solve();
  ASSERT_EQ(cold.status, LpStatus::Optimal);
  std::vector<double> lo(lp.variables.size()), up(lp.variables.size());
  for (std::size_t j = 0; j < lo.size(); ++j) {
    lo[j] = lp.variables[j].lower;
    up[j] = lp.variables[j].upper;
  }
  up[3] = std::min(up[3], cold.primal[3] * 0.5);
  const auto warm = engine.solve(lo, up, &cold.basis);
  const auto fresh = engine.solve(lo, up);
  ASSERT_EQ(warm.status, fresh.status);
  if (warm.status == LpStatus::Optimal) EXPECT_NEAR(warm.objective, fresh.objective, 1e-8);
  const auto again = engine.solve(&cold.basis);
  EXPECT_NEAR(again.objective, cold.objective, 1e-9);
  EXPECT_LE(again.iterations, 1u);
}

TEST(Simplex, Deterministic) {
  const auto lp = random_feasible_lp(7, 50, 30);
  const auto a = solve_lp(lp);
  const auto b = solve_lp(lp);
  EXPECT_EQ(a.primal, b.primal);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(Simplex, ValidationRejectsBadModels) {
  LinearProgram lp;
  lp.add_variable("x", 1.0, 0.0);
  EXPECT_THROW(solve_lp(lp), ModelError);
  LinearProgram dangling;
  dangling.add_variable("x", 0.0, 1.0);
  dangling.add_constraint("r", {{4, 1.0}}, Relation::LessEqual, 1.0);
  EXPECT_THROW(solve_lp(dangling), ModelError);
  LinearProgram nan;
  const auto v = nan.add_variable("x", 0.0, 1.0);
  nan.add_constraint("r", {{v, std::nan("")}}, Relation::LessEqual, 1.0);
  EXPECT_THROW(solve_lp(nan), ModelError);
}

TEST(Simplex, DegenerateCyclingExample) {
  // Beale's classic cycling instance; Dantzig without anti-cycling loops on it.
  LinearProgram lp;
  lp.sense = Sense::Minimize;
  const auto x4 = lp.add_variable("x4", 0.0, kInf, -0.75);
  const auto x5 = lp.add_variable("x5", 0.0, kInf, 150.0);
  const auto x6 = lp.add_variable("x6", 0.0, kInf, -0.02);
  const auto x7 = lp.add_variable("x7", 0.0, kInf, 6.0);
  lp.add_constraint("r1", {{x4, 0.25}, {x5, -60.0}, {x6, -0.04}, {x7, 9.0}}, Relation::LessEqual, 0.0);
  lp.add_constraint("r2", {{x4, 0.5}, {x5, -90.0}, {x6, -0.02}, {x7, 3.0}}, Relation::LessEqual, 0.0);
  lp.add_constraint("r3", {{x6, 1.0}}, Relation::LessEqual, 1.0);
  const auto sol = solve_lp(lp);
  ASSERT_EQ(sol.status, LpStatus::Optimal);
  EXPECT_NEAR(sol.objective, -0.05, 1e-9);
}

TEST(Mps, FixedFormatLayout) {
  LinearProgram lp;
  const auto x = lp.add_variable("p_der[n1,A]", 0.0, kInf, 1.0);
  const auto y = lp.add_variable("w[n1,A]", 0.81, 1.21);
  const auto z = lp.add_variable("free", -kInf, kInf);
  lp.add_constraint("balance", {{x, 1.0}, {y, -2.0}, {z, 1.0}}, Relation::Equal, 0.5);
  lp.add_constraint("cap", {{x, 1.0}}, Relation::LessEqual, 4.0);
  std::ostringstream out;
  write_mps(lp, out);
  const std::string s = out.str();
  EXPECT_NE(s.find("* C0000000 p_der[n1,A]"), std::string::npos);
  EXPECT_NE(s.find("NAME          GRIDCAP"), std::string::npos);
  EXPECT_NE(s.find(" E  R0000000"), std::string::npos);
  EXPECT_NE(s.find(" L  R0000001"), std::string::npos);
  EXPECT_NE(s.find(" FR BND       C0000002"), std::string::npos);
  EXPECT_NE(s.find(" LO BND       C0000001"), std::string::npos);
  EXPECT_NE(s.find("objective negated"), std::string::npos);
  EXPECT_EQ(s.substr(s.size() - 7), "ENDATA\n");
}
