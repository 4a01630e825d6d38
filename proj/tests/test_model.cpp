#include <doctest.h>

#include <random>

#include "dra/model.hpp"
#include "dra/scenario.hpp"

using namespace dra;

TEST_CASE("quadratic cost value and derivative") {
  const CostFunction f = CostFunction::quadratic(1.0, 0.0, 0.0);
  CHECK(f.value(2.0) == doctest::Approx(4.0));
  CHECK(f.derivative(2.0) == doctest::Approx(4.0));
}

TEST_CASE("dead-zone cost is flat inside and linear outside") {
  const CostFunction f = CostFunction::smooth_deadzone(2.0, 0.01);
  CHECK(f.value(1.0) == 0.0);
  CHECK(f.derivative(1.0) == 0.0);
  CHECK(f.value(3.0) == doctest::Approx(0.995));
  CHECK(f.derivative(3.0) == doctest::Approx(1.0));
  // symmetric on the negative side
  CHECK(f.value(-3.0) == doctest::Approx(0.995));
  CHECK(f.derivative(-3.0) == doctest::Approx(-1.0));
}

TEST_CASE("dead-zone cost is C1 at its seams") {
  const CostFunction f = CostFunction::smooth_deadzone(2.0, 0.01);
  const double d = 1e-10;
  CHECK(f.value(2.0 + d) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::abs(f.derivative(2.01 - d) - f.derivative(2.01 + d)) < 1e-7);
  CHECK(std::abs(f.value(2.01 - d) - f.value(2.01 + d)) < 1e-9);
}

TEST_CASE("derivative bound of a quadratic sits at an endpoint") {
  const CostFunction f = CostFunction::quadratic(1.0, 0.0, 0.0);
  CHECK(f.derivative_bound(-1.0, 2.0) == doctest::Approx(4.0));
}

TEST_CASE("derivative bound of the generator cost row") {
  const CostFunction f = CostFunction::quadratic(0.0696629, 26.24382, 31.67);
  // endpoint evaluation: |2 * 0.0696629 * 30 + 26.24382|
  CHECK(f.derivative_bound(5.0, 30.0) == doctest::Approx(30.423594).epsilon(1e-9));
}

TEST_CASE("derivative bound of a dead-zone reaching the linear branch is one") {
  const CostFunction f = CostFunction::smooth_deadzone(2.0, 0.01);
  CHECK(f.derivative_bound(-5.0, 5.0) == doctest::Approx(1.0));
}

TEST_CASE("agent cost value and gradient stack per subagent") {
  AgentSpec a;
  a.id = 1;
  a.costs = {CostFunction::quadratic(1.0, 0.0, 0.0), CostFunction::quadratic(0.5, 1.0, 2.0)};
  Eigen::VectorXd x(2);
  x << 2.0, 3.0;
  CHECK(cost_value(a, x) == doctest::Approx(4.0 + (0.5 * 9 + 3 + 2)));
  const Eigen::VectorXd g = cost_grad(a, x);
  CHECK(g(0) == doctest::Approx(4.0));
  CHECK(g(1) == doctest::Approx(4.0));
  Eigen::VectorXd wrong(3);
  CHECK_THROWS_AS(cost_grad(a, wrong), std::invalid_argument);
}

TEST_CASE("grad_inf_bound needs both bounds") {
  AgentSpec a;
  a.id = 1;
  a.costs = {CostFunction::quadratic(1.0, 0.0, 0.0)};
  a.lower = {-1.0};
  CHECK_THROWS_AS(grad_inf_bound(a), std::invalid_argument);
  a.upper = {2.0};
  CHECK(grad_inf_bound(a) == doctest::Approx(4.0));
}

TEST_CASE("validation of the dispatch example") {
  const ProblemBundle bundle = builtin_example1();
  const ValidationReport r = validate(bundle.problem);
  CHECK(r.ok);
  CHECK(r.rank == 2);
  CHECK(r.graph_connected);
  CHECK(r.equality_feasible);
  CHECK(r.core_sets[0] == std::vector<int>{1, 2, 3, 4});
  CHECK(r.core_sets[1] == std::vector<int>{3, 5, 6});
}

TEST_CASE("validation flags duplicated constraint rows") {
  ProblemBundle bundle = builtin_example1();
  bundle.problem.constraints[1] = bundle.problem.constraints[0];
  const ValidationReport r = validate(bundle.problem);
  CHECK_FALSE(r.ok);
  CHECK(r.rank == 1);
  CHECK_THROWS_AS(ensure_valid(bundle.problem), ValidationError);
}

TEST_CASE("validation flags inverted bounds") {
  ProblemBundle bundle = builtin_example1();
  bundle.problem.agents[0].lower[0] = 40.0;  // above the 30.0 upper bound
  const ValidationReport r = validate(bundle.problem);
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.bounds_ordered);
}

TEST_CASE("validation flags a disconnected physical graph") {
  ProblemBundle bundle = builtin_example1();
  bundle.problem.physical = Graph::from_edges({1, 2, 3, 4, 5, 6}, {{1, 2, 1.0}});
  const ValidationReport r = validate(bundle.problem);
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.graph_connected);
}

TEST_CASE("split_b equal_core matches the dispatch shares") {
  const auto shares = split_b(SplitSpec::equal_core(), {1, 2, 3, 4}, {1, 2, 3, 4}, 450.0);
  for (int id : {1, 2, 3, 4}) CHECK(shares.at(id) == doctest::Approx(112.5));
  const auto with_helper = split_b(SplitSpec::equal_core(), {3, 5, 6}, {3, 4, 5, 6}, 700.0);
  CHECK(with_helper.at(4) == 0.0);
  double total = 0.0;
  for (const auto& [id, v] : with_helper) total += v;
  CHECK(total == 700.0);
}

TEST_CASE("split_b single places all mass on one node") {
  const auto shares = split_b(SplitSpec::single(4), {3, 5, 6}, {3, 4, 5, 6}, 700.0);
  CHECK(shares.at(4) == 700.0);
  CHECK(shares.at(3) == 0.0);
  CHECK(shares.at(5) == 0.0);
  CHECK(shares.at(6) == 0.0);
}

TEST_CASE("split_b custom validates the sum") {
  std::map<int, double> good{{3, 300.0}, {5, 200.0}, {6, 200.0}, {4, 0.0}};
  const auto shares = split_b(SplitSpec::custom_map(good), {3, 5, 6}, {3, 4, 5, 6}, 700.0);
  CHECK(shares.at(3) == 300.0);
  std::map<int, double> bad{{3, 300.0}, {5, 200.0}, {6, 100.0}, {4, 0.0}};
  CHECK_THROWS_AS(split_b(SplitSpec::custom_map(bad), {3, 5, 6}, {3, 4, 5, 6}, 700.0),
                  std::invalid_argument);
}

TEST_CASE("split_b rejects cores outside the cluster") {
  CHECK_THROWS_AS(split_b(SplitSpec::equal_core(), {1, 9}, {1, 2}, 1.0), std::invalid_argument);
}

TEST_CASE("analytic gradients match finite differences on random points") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> span(-6.0, 6.0);
  const CostFunction quad = CostFunction::quadratic(0.7, -1.3, 0.2);
  const CostFunction dz = CostFunction::smooth_deadzone(2.0, 0.05);
  const double h = 1e-6;
  for (int i = 0; i < 1000; ++i) {
    const double x = span(rng);
    for (const CostFunction* c : {&quad, &dz}) {
      const double fd = (c->value(x + h) - c->value(x - h)) / (2.0 * h);
      CHECK(std::abs(fd - c->derivative(x)) <= 1e-5 * (1.0 + std::abs(c->derivative(x))));
    }
  }
}

TEST_CASE("both cost families have monotone derivatives") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> span(-5.0, 5.0);
  const CostFunction quad = CostFunction::quadratic(1.3, 2.0, 0.0);
  const CostFunction dz = CostFunction::smooth_deadzone(1.5, 0.02);
  for (int i = 0; i < 1000; ++i) {
    const double x = span(rng);
    const double z = span(rng);
    CHECK((z - x) * (quad.derivative(z) - quad.derivative(x)) >= -1e-12);
    CHECK((z - x) * (dz.derivative(z) - dz.derivative(x)) >= -1e-12);
  }
}
