#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "istn/conic/program.hpp"
#include "istn/conic/solver.hpp"
#include "support/barrier_oracle.hpp"

using namespace istn::conic;
using istn::testing::DenseSocp;

namespace {

ConicProgram to_program(const DenseSocp& d, std::vector<int>& vars) {
  ConicProgram prog;
  const auto n = d.objective.size();
  vars.clear();
  for (Eigen::Index i = 0; i < n; ++i) vars.push_back(prog.add_variable("x" + std::to_string(i)));
  AffineExpr obj;
  for (Eigen::Index i = 0; i < n; ++i) obj.add_term(vars[i], d.objective(i));
  prog.maximize(obj);
  for (const auto& k : d.cones) {
    std::vector<AffineExpr> lhs;
    for (Eigen::Index r = 0; r < k.a.rows(); ++r) {
      AffineExpr e(k.b(r));
      for (Eigen::Index i = 0; i < n; ++i) e.add_term(vars[i], k.a(r, i));
      lhs.push_back(e);
    }
    AffineExpr rhs(k.d);
    for (Eigen::Index i = 0; i < n; ++i) rhs.add_term(vars[i], k.c(i));
    prog.add_soc(lhs, rhs);
  }
  return prog;
}

}  // namespace

TEST(ConicSolve, FixedConeNorm) {
  ConicProgram prog;
  int t = prog.add_variable("t");
  prog.maximize(AffineExpr::variable(t, -1.0));
  prog.add_soc({AffineExpr(3.0), AffineExpr(4.0)}, AffineExpr::variable(t));
  auto r = solve(prog);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.x[0], 5.0, 1e-7);
  EXPECT_NEAR(r.objective_value, -5.0, 1e-7);
}

TEST(ConicSolve, SingleLinearBound) {
  ConicProgram prog;
  int x = prog.add_variable("x");
  prog.maximize(AffineExpr::variable(x));
  prog.add_le(AffineExpr::variable(x), 1.0);
  auto r = solve(prog);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.x[0], 1.0, 1e-7);
}

TEST(ConicSolve, DetectsInfeasible) {
  ConicProgram prog;
  int x = prog.add_variable("x");
  prog.maximize(AffineExpr::variable(x));
  prog.add_le(AffineExpr::variable(x), 1.0);
  prog.add_le(AffineExpr::variable(x, -1.0), -2.0);  // x >= 2
  EXPECT_EQ(solve(prog).status, SolveStatus::infeasible);
}

TEST(ConicSolve, DetectsUnbounded) {
  ConicProgram prog;
  int x = prog.add_variable("x");
  int y = prog.add_variable("y");
  prog.maximize(AffineExpr::variable(x) + AffineExpr::variable(y));
  prog.add_le(AffineExpr::variable(x, -1.0), 0.0);
  prog.add_soc({AffineExpr::variable(y)}, AffineExpr::variable(x));
  EXPECT_EQ(solve(prog).status, SolveStatus::unbounded);
}

TEST(ConvexQuadratic, SquareBelowAffine) {
  // x^2 <= y with x pinned to 3: smallest feasible y is 9.
  ConicProgram prog;
  int x = prog.add_variable("x");
  int y = prog.add_variable("y");
  prog.maximize(AffineExpr::variable(y, -1.0));
  prog.add_le(AffineExpr::variable(x), 3.0);
  prog.add_le(AffineExpr::variable(x, -1.0), -3.0);
  ComplexAffine t;
  t.add_term(x, 1.0);
  prog.add_convex_quadratic_le_affine(std::span(&t, 1), AffineExpr::variable(y));
  auto r = solve(prog);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.x[1], 9.0, 1e-6);
}

TEST(ConvexQuadratic, EmptyTermsMeanNonnegativeRhs) {
  ConicProgram prog;
  int y = prog.add_variable("y");
  prog.maximize(AffineExpr::variable(y, -1.0));
  prog.add_convex_quadratic_le_affine({}, AffineExpr::variable(y) + AffineExpr(2.0));
  auto r = solve(prog);
  ASSERT_EQ(r.status, SolveStatus::optimal);
  EXPECT_NEAR(r.x[0], -2.0, 1e-6);
}

TEST(ConvexQuadratic, EmbeddingMatchesDirectEvaluation) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  ConicProgram prog;
  std::vector<int> v;
  for (int i = 0; i < 5; ++i) v.push_back(prog.add_variable("v" + std::to_string(i)));
  ComplexAffine t[2];
  for (auto& term : t) {
    for (int i = 0; i < 4; ++i) term.add_term(v[i], {nd(rng), nd(rng)});
    term.add_constant({nd(rng), nd(rng)});
  }
  AffineExpr rhs = AffineExpr::variable(v[4], 3.0) + AffineExpr(0.5);
  prog.add_convex_quadratic_le_affine(t, rhs);
  const auto& cone = prog.socs().back();
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(5);
    for (auto& xi : x) xi = 2.0 * nd(rng);
    double quad = std::norm(t[0].evaluate(x)) + std::norm(t[1].evaluate(x));
    double direct = rhs.evaluate(x) - quad;
    double n2 = 0.0;
    for (const auto& e : cone.lhs) n2 += e.evaluate(x) * e.evaluate(x);
    double embedded = cone.rhs.evaluate(x) - std::sqrt(n2);
    if (std::abs(direct) > 1e-9) {
      EXPECT_EQ(direct > 0.0, embedded > 0.0) << trial;
    }
    // (rhs+1)^2 - |lhs|^2 = 4 (rhs - quad)
    double r1 = cone.rhs.evaluate(x);
    EXPECT_NEAR(r1 * r1 - n2, 4.0 * direct, 1e-8 * (1.0 + r1 * r1));
  }
}

TEST(ConicProgram, RejectsUnknownVariable) {
  ConicProgram prog;
  prog.add_variable("x");
  EXPECT_THROW(prog.add_le(AffineExpr::variable(3), 1.0), std::out_of_range);
  ComplexAffine bad;
  bad.add_term(7, {1.0, 0.0});
  EXPECT_THROW(prog.add_convex_quadratic_le_affine(std::span(&bad, 1), AffineExpr(1.0)),
               std::out_of_range);
}

TEST(ConicProgram, DumpListsRows) {
  ConicProgram prog;
  int x = prog.add_variable("x");
  prog.maximize(AffineExpr::variable(x));
  prog.add_le(AffineExpr::variable(x), 1.0);
  std::ostringstream os;
  prog.dump(os);
  EXPECT_NE(os.str().find("LIN 1"), std::string::npos);
  EXPECT_NE(os.str().find("SOC 0"), std::string::npos);
}

TEST(ConicSolve, RandomInstancesAgreeWithBarrierOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 25; ++trial) {
    auto d = istn::testing::random_socp(rng, 5, 3, 3);
    std::vector<int> vars;
    auto prog = to_program(d, vars);
    auto r = solve(prog);
    ASSERT_EQ(r.status, SolveStatus::optimal) << trial;
    EXPECT_LE(prog.max_violation(r.x), 1e-7);
    auto ref = istn::testing::barrier_solve(d);
    ASSERT_TRUE(ref);
    EXPECT_NEAR(r.objective_value, d.objective.dot(*ref), 1e-4) << trial;
  }
}

TEST(ConicSolve, ObjectiveScalingKeepsArgmax) {
  std::mt19937_64 rng(99);
  auto d = istn::testing::random_socp(rng, 4, 2, 3);
  std::vector<int> vars;
  auto r1 = solve(to_program(d, vars));
  d.objective *= 7.5;
  auto r2 = solve(to_program(d, vars));
  ASSERT_TRUE(r1.ok() && r2.ok());
  for (std::size_t i = 0; i < r1.x.size(); ++i) EXPECT_NEAR(r1.x[i], r2.x[i], 2e-4);
  EXPECT_NEAR(r2.objective_value, 7.5 * r1.objective_value, 1e-6 * (1 + std::abs(r2.objective_value)));
}

TEST(ConicSolve, StalledSolveReportsNearOptimalOnlyWithinReducedTolerances) {
  ConicProgram prog;
  int t = prog.add_variable("t");
  prog.maximize(AffineExpr::variable(t, -1.0));
  prog.add_soc({AffineExpr(3.0), AffineExpr(4.0)}, AffineExpr::variable(t));
  const int full = solve(prog).solver_iterations;
  ASSERT_GT(full, 3);

  SolverOptions o;
  o.max_iters = full - 1;
  o.feastol_inaccurate = o.gaptol_inaccurate = 1.0;
  auto loose = solve(prog, o);
  EXPECT_EQ(loose.status, SolveStatus::near_optimal);
  EXPECT_NEAR(loose.x[0], 5.0, 1e-2);

  o.feastol_inaccurate = o.gaptol_inaccurate = 0.0;
  EXPECT_EQ(solve(prog, o).status, SolveStatus::iteration_limit);
}
