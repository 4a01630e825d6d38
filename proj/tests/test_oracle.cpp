#include <doctest.h>

#include <cmath>

#include "dra/oracle.hpp"
#include "dra/scenario.hpp"

using namespace dra;

namespace {

Problem simple_two_var() {
  // min x1^2 + x2^2 subject to x1 + x2 = 2
  Problem p;
  for (int i = 1; i <= 2; ++i) {
    AgentSpec a;
    a.id = i;
    a.costs = {CostFunction::quadratic(1.0, 0.0, 0.0)};
    p.agents.push_back(std::move(a));
  }
  EqualityConstraint c;
  c.rhs = 2.0;
  c.weights[1] = Eigen::RowVectorXd::Constant(1, 1.0);
  c.weights[2] = Eigen::RowVectorXd::Constant(1, 1.0);
  p.constraints.push_back(c);
  p.physical = Graph::from_edges({1, 2}, {{1, 2, 1.0}});
  return p;
}

}  // namespace

TEST_CASE("equality QP with a symmetric objective splits the demand") {
  const EqualitySolution sol = solve_equality_qp(simple_two_var());
  CHECK(sol.x(0) == doctest::Approx(1.0));
  CHECK(sol.x(1) == doctest::Approx(1.0));
  CHECK(sol.nu(0) == doctest::Approx(-2.0));
}

TEST_CASE("single-variable pinned equality") {
  Problem p;
  AgentSpec a;
  a.id = 1;
  a.costs = {CostFunction::quadratic(1.0, 0.0, 0.0)};
  p.agents.push_back(std::move(a));
  EqualityConstraint c;
  c.rhs = 5.0;
  c.weights[1] = Eigen::RowVectorXd::Constant(1, 1.0);
  p.constraints.push_back(c);
  p.physical = Graph::from_edges({1}, {});
  const EqualitySolution sol = solve_equality_qp(p);
  CHECK(sol.x(0) == doctest::Approx(5.0));
  CHECK(sol.nu(0) == doctest::Approx(-10.0));
}

TEST_CASE("equality QP rejects flat directions in the null space") {
  Problem p;
  for (int i = 1; i <= 2; ++i) {
    AgentSpec a;
    a.id = i;
    a.costs = {CostFunction::quadratic(0.0, 1.0, 0.0)};  // no curvature anywhere
    p.agents.push_back(std::move(a));
  }
  EqualityConstraint c;
  c.rhs = 1.0;
  c.weights[1] = Eigen::RowVectorXd::Constant(1, 1.0);
  c.weights[2] = Eigen::RowVectorXd::Constant(1, 1.0);
  p.constraints.push_back(c);
  p.physical = Graph::from_edges({1, 2}, {{1, 2, 1.0}});
  CHECK_THROWS_AS(solve_equality_qp(p), std::runtime_error);
}

TEST_CASE("flow solver is independent of the augmentation gain") {
  const Problem p = simple_two_var();
  FlowSolveOptions opts;
  opts.tol = 1e-9;
  opts.t_max = 200.0;
  Eigen::VectorXd reference;
  for (double rho : {0.0, 1.0, 5.0}) {
    const FlowSolveResult res = centralized_flow_solve(p, rho, std::nullopt, opts);
    REQUIRE(res.converged);
    if (reference.size() == 0) {
      reference = res.x;
    } else {
      CHECK((res.x - reference).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("boxed solve with inactive boxes matches the equality solve") {
  Problem p = simple_two_var();
  for (auto& a : p.agents) {
    a.lower = {-10.0};
    a.upper = {10.0};
  }
  const KKTPoint pt = solve_boxed_qp(p);
  const EqualitySolution sol = solve_equality_qp(p);
  CHECK((pt.x - sol.x).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(pt.mu_lower.cwiseAbs().maxCoeff() == 0.0);
  CHECK(pt.mu_upper.cwiseAbs().maxCoeff() == 0.0);
  CHECK(pt.active_lower.empty());
  CHECK(pt.active_upper.empty());
}

TEST_CASE("box-only problem without equality constraints") {
  // min (x - 3)^2 with x <= 1: clamp at the bound with multiplier 4
  Problem p;
  AgentSpec a;
  a.id = 1;
  a.costs = {CostFunction::quadratic(1.0, -6.0, 9.0)};
  a.upper = {1.0};
  p.agents.push_back(std::move(a));
  p.physical = Graph::from_edges({1}, {});
  const KKTPoint pt = solve_boxed_qp(p);
  CHECK(pt.x(0) == doctest::Approx(1.0));
  CHECK(pt.mu_upper(0) == doctest::Approx(4.0));
  CHECK(pt.active_upper == std::vector<int>{0});
  CHECK(kkt_residual(pt, p).certified(1e-8));
}

TEST_CASE("dispatch oracle clamps the expensive generators") {
  const ProblemBundle bundle = builtin_example1();
  const KKTPoint pt = solve_boxed_qp(bundle.problem);
  CHECK(pt.x(0) == doctest::Approx(5.0));    // priciest unit at its floor
  CHECK(pt.x(1) == doctest::Approx(5.0));
  CHECK(pt.active_lower.size() == 8);
  CHECK(pt.active_upper.empty());
  CHECK(kkt_residual(pt, bundle.problem).certified(1e-8));

  // cross-validate against the centralized penalized flow
  ResolvedPenalty pen{1e-3, 345.433, false};
  FlowSolveOptions opts;
  opts.t_max = 400.0;
  opts.tol = 1e-6;
  const FlowSolveResult flow = centralized_flow_solve(bundle.problem, 1.0, pen, opts);
  REQUIRE(flow.converged);
  CHECK((flow.x - pt.x).cwiseAbs().maxCoeff() < std::max(1e-4, 2.0 * pen.epsilon));
}

TEST_CASE("kkt residual flags perturbations and bad signs") {
  const Problem p = simple_two_var();
  KKTPoint pt = solve_boxed_qp(p);
  CHECK(kkt_residual(pt, p).certified(1e-8));

  KKTPoint off = pt;
  off.x(0) += 0.1;
  CHECK(kkt_residual(off, p).stationarity > 1e-3);

  Problem boxed = p;
  boxed.agents[0].lower = {0.0};
  boxed.agents[0].upper = {0.7};  // pinches the first unit below its share
  boxed.constraints[0].rhs = 1.5;
  KKTPoint bpt = solve_boxed_qp(boxed);
  REQUIRE(!bpt.active_upper.empty());
  KKTPoint flipped = bpt;
  flipped.mu_upper(bpt.active_upper.front()) *= -1.0;
  CHECK(kkt_residual(flipped, boxed).dual_sign > 0.0);
}

TEST_CASE("multiplier recovery from primal-dual data") {
  const ProblemBundle bundle = builtin_example1();
  const Problem& p = bundle.problem;
  const KKTPoint pt = solve_boxed_qp(p);
  const RecoveredMultipliers rec = recover_multipliers(pt.x, pt.nu, p);
  CHECK(rec.ok);
  CHECK((rec.mu_lower - pt.mu_lower).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((rec.mu_upper - pt.mu_upper).cwiseAbs().maxCoeff() < 1e-9);

  // all-interior point: zero multipliers
  const Problem q = simple_two_var();
  const EqualitySolution sol = solve_equality_qp(q);
  const RecoveredMultipliers rq = recover_multipliers(sol.x, sol.nu, q);
  CHECK(rq.mu_lower.cwiseAbs().maxCoeff() == 0.0);
  CHECK(rq.mu_upper.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("multiplier recovery rejects ambiguous activity") {
  Problem p;
  AgentSpec a;
  a.id = 1;
  a.costs = {CostFunction::quadratic(1.0, 0.0, 0.0)};
  a.lower = {1.0};
  a.upper = {1.0 + 1e-7};  // within the activity tolerance of both
  p.agents.push_back(std::move(a));
  p.physical = Graph::from_edges({1}, {});
  Eigen::VectorXd x(1), nu(0);
  x << 1.0;
  CHECK_THROWS_AS(recover_multipliers(x, nu, p), std::runtime_error);
}

TEST_CASE("table-style instances reproduce the bound ordering on regeneration") {
  Rng rng(1234);
  for (int trial = 0; trial < 5; ++trial) {
    const Problem p = make_table1_instance(rng);
    const KKTPoint pt = solve_boxed_qp(p);
    const RecoveredMultipliers rec = recover_multipliers(pt.x, pt.nu, p);
    CHECK(rec.ok);
    const double mu_max =
        std::max(rec.mu_lower.maxCoeff(), rec.mu_upper.maxCoeff());
    CHECK(mu_max <= mu_bound_single(p).value);
    CHECK(mu_max == doctest::Approx(pt.max_multiplier()).epsilon(1e-9));
  }
}

TEST_CASE("flow oracle reports a timeout on the undamped dead-zone instance") {
  const ProblemBundle bundle = builtin_appendix_b();
  FlowSolveOptions opts;
  opts.t_max = 60.0;
  opts.tol = 1e-6;
  const FlowSolveResult bad = centralized_flow_solve(bundle.problem, 0.0, std::nullopt, opts);
  CHECK_FALSE(bad.converged);
  CHECK(bad.equality_residual > 1e-3);

  const FlowSolveResult good = centralized_flow_solve(bundle.problem, 1.0, std::nullopt, opts);
  CHECK(good.converged);
  CHECK(std::abs(good.x(0) + good.x(1) - 2.0) < 1e-5);
  CHECK(bundle.problem.cost_value(good.x) < 1e-6);
}

TEST_CASE("enumeration guard rejects oversized boxed problems") {
  Problem p;
  for (int i = 1; i <= 17; ++i) {
    AgentSpec a;
    a.id = i;
    a.costs = {CostFunction::quadratic(1.0, 0.0, 0.0)};
    a.lower = {0.0};
    a.upper = {1.0};
    p.agents.push_back(std::move(a));
  }
  EqualityConstraint c;
  c.rhs = 8.0;
  for (int i = 1; i <= 17; ++i) c.weights[i] = Eigen::RowVectorXd::Constant(1, 1.0);
  p.constraints.push_back(c);
  std::vector<Graph::Edge> edges;
  std::vector<int> ids;
  for (int i = 1; i <= 17; ++i) {
    ids.push_back(i);
    if (i > 1) edges.push_back({i - 1, i, 1.0});
  }
  p.physical = Graph::from_edges(ids, edges);
  CHECK_THROWS_WITH_AS(solve_boxed_qp(p), doctest::Contains("guard"), std::runtime_error);
}
