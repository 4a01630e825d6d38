#include <doctest.h>

#include <cmath>
#include <random>

#include "dra/diagnostics.hpp"
#include "dra/dynamics.hpp"
#include "dra/oracle.hpp"
#include "dra/scenario.hpp"

using namespace dra;

namespace {

// Two scalar agents, one constraint x1 + x2 = 3, strongly convex.
Problem two_agent_problem() {
  Problem p;
  for (int i = 1; i <= 2; ++i) {
    AgentSpec a;
    a.id = i;
    a.costs = {CostFunction::quadratic(i == 1 ? 1.0 : 0.5, i == 1 ? -1.0 : 0.5, 0.0)};
    p.agents.push_back(std::move(a));
  }
  EqualityConstraint c;
  c.rhs = 3.0;
  c.weights[1] = Eigen::RowVectorXd::Constant(1, 1.0);
  c.weights[2] = Eigen::RowVectorXd::Constant(1, 2.0);
  p.constraints.push_back(c);
  p.physical = Graph::from_edges({1, 2}, {{1, 2, 1.0}});
  return p;
}

AlgorithmState equilibrium_from_oracle(const Problem& p,
                                       const std::vector<ClusterLayout>& layouts,
                                       const EqualitySolution& sol) {
  const StateSpace space(p, layouts);
  AlgorithmState s = init_state(p, layouts);
  space.x(s.data) = sol.x;
  for (std::size_t k = 0; k < layouts.size(); ++k) {
    auto vk = space.v(s.data, static_cast<int>(k));
    auto yk = space.y(s.data, static_cast<int>(k));
    for (int slot = 0; slot < layouts[k].size(); ++slot) {
      vk(slot) = sol.nu(static_cast<int>(k));
      const int id = layouts[k].members[slot];
      const Eigen::RowVectorXd row = p.weight_row(static_cast<int>(k), id);
      yk(slot) = row.dot(sol.x.segment(p.agent_offset(id), row.size())) -
                 layouts[k].b_share[slot];
    }
  }
  return s;
}

}  // namespace

TEST_CASE("cluster layouts of the dispatch example") {
  const ProblemBundle bundle = builtin_example1();
  const auto layouts = make_cluster_layouts(bundle.problem);
  REQUIRE(layouts.size() == 2);
  CHECK(layouts[0].members == std::vector<int>{1, 2, 3, 4});
  CHECK(layouts[1].members == std::vector<int>{3, 4, 5, 6});  // helper 4 added
  CHECK(layouts[1].b_share[layouts[1].slot_of(4)] == 0.0);
  CHECK(communicated_variable_counts(bundle.problem, layouts) ==
        std::vector<int>{1, 1, 2, 2, 1, 1});
}

TEST_CASE("full-graph layouts enroll every agent in every cluster") {
  const ProblemBundle bundle = builtin_example1();
  LayoutOptions opts;
  opts.full_graph = true;
  const auto layouts = make_cluster_layouts(bundle.problem, opts);
  for (const auto& l : layouts) CHECK(l.size() == 6);
  CHECK(communicated_variable_counts(bundle.problem, layouts) ==
        std::vector<int>{2, 2, 2, 2, 2, 2});
}

TEST_CASE("state layout is y blocks, v blocks, then x blocks") {
  const Problem p = two_agent_problem();
  const auto layouts = make_cluster_layouts(p);
  const StateSpace space(p, layouts);
  CHECK(space.dim() == 2 + 2 + 2);
  CHECK(space.y_offset(0) == 0);
  CHECK(space.v_offset(0) == 2);
  CHECK(space.x_offset() == 4);
  const auto names = space.column_names(p, layouts);
  CHECK(names[0] == "y[1][1]");
  CHECK(names[2] == "v[1][1]");
  CHECK(names[4] == "x[1][1]");
}

TEST_CASE("init_state defaults to zero and validates custom blocks") {
  const Problem p = two_agent_problem();
  const auto layouts = make_cluster_layouts(p);
  const AlgorithmState s = init_state(p, layouts);
  CHECK(s.data.cwiseAbs().maxCoeff() == 0.0);

  Eigen::VectorXd y0(2);
  y0 << 0.5, -0.5;  // sums to zero: accepted
  CHECK_NOTHROW(init_state(p, layouts, {}, {}, y0));
  y0 << 0.5, 0.5;  // nonzero sum: the offset would persist forever
  CHECK_THROWS_AS(init_state(p, layouts, {}, {}, y0), std::invalid_argument);

  Eigen::VectorXd v0(2);
  v0 << 3.0, -7.0;  // arbitrary v is fine
  CHECK_NOTHROW(init_state(p, layouts, {}, v0, {}));

  Eigen::VectorXd bad(5);
  CHECK_THROWS_AS(init_state(p, layouts, bad, {}, {}), std::invalid_argument);
}

TEST_CASE("distributed derivative vanishes at the oracle equilibrium") {
  const Problem p = two_agent_problem();
  const auto layouts = make_cluster_layouts(p);
  const EqualitySolution sol = solve_equality_qp(p);
  const AlgorithmState s = equilibrium_from_oracle(p, layouts, sol);
  const StateSpace space(p, layouts);
  const Eigen::VectorXd d =
      distributed_rhs(space, s.data, p, layouts, GainConfig::uniform(1.0, 1.0), std::nullopt);
  CHECK(d.cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + sol.x.cwiseAbs().maxCoeff()));
}

TEST_CASE("cluster sums of the dual derivatives obey the conservation identities") {
  const ProblemBundle bundle = builtin_example1();
  const Problem& p = bundle.problem;
  const auto layouts = make_cluster_layouts(p);
  const StateSpace space(p, layouts);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> span(-2.0, 2.0);
  Eigen::VectorXd state(space.dim());
  for (int i = 0; i < state.size(); ++i) state(i) = span(rng);
  // The aggregate dual identity presumes the conserved zero-sum y
  // initialization; project each y block onto it.
  for (int k = 0; k < space.num_clusters(); ++k) {
    auto yk = space.y(state, k);
    yk.array() -= yk.mean();
  }

  ResolvedPenalty pen{1e-3, 345.0, false};
  const Eigen::VectorXd d =
      distributed_rhs(space, state, p, layouts, GainConfig::uniform(1.0, 1.0), pen);

  const Eigen::MatrixXd w = p.stacked_weights();
  const Eigen::VectorXd b = p.rhs_vector();
  const Eigen::VectorXd x = space.x(state);
  for (int k = 0; k < space.num_clusters(); ++k) {
    // sum of y' is zero exactly (edgewise antisymmetric accumulation)
    CHECK(std::abs(space.y(d, k).sum()) <= 1e-13 * (1.0 + state.cwiseAbs().maxCoeff()));
    // sum of v' equals the aggregate constraint violation
    const double expect = w.row(k).dot(x) - b(k);
    CHECK(space.v(d, k).sum() == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("centralized derivative vanishes at the KKT point and matches hand expansion") {
  const Problem p = two_agent_problem();
  const EqualitySolution sol = solve_equality_qp(p);
  const Eigen::VectorXd d0 = centralized_rhs(sol.nu, sol.x, p, 1.0, std::nullopt);
  CHECK(d0.cwiseAbs().maxCoeff() <= 1e-12);

  // hand expansion at a generic point, rho = 2:
  Eigen::VectorXd nu(1), x(2);
  nu << 0.7;
  x << 1.0, -2.0;
  const double viol = x(0) + 2.0 * x(1) - 3.0;
  const Eigen::VectorXd d = centralized_rhs(nu, x, p, 2.0, std::nullopt);
  CHECK(d(0) == doctest::Approx(viol));
  CHECK(d(1) == doctest::Approx(-(2.0 * x(0) - 1.0) - nu(0) - 2.0 * viol));
  CHECK(d(2) == doctest::Approx(-(1.0 * x(1) + 0.5) - 2.0 * nu(0) - 2.0 * 2.0 * viol));

  // rho = 0 reduces to the plain primal-dual flow
  const Eigen::VectorXd dpd = centralized_rhs(nu, x, p, 0.0, std::nullopt);
  CHECK(dpd(1) == doctest::Approx(-(2.0 * x(0) - 1.0) - nu(0)));
}

TEST_CASE("rk4 reproduces the scalar exponential to seventh-digit accuracy") {
  auto rhs = [](double, const Eigen::VectorXd& s) { return Eigen::VectorXd(-s); };
  AlgorithmState s{0.0, Eigen::VectorXd::Ones(1)};
  for (int i = 0; i < 100; ++i) s = rk4_step(rhs, s, 0.01);
  CHECK(std::abs(s.data(0) - std::exp(-1.0)) < 1e-7);
}

TEST_CASE("rk4 global error shrinks sixteen-fold when the step is halved") {
  auto rhs = [](double, const Eigen::VectorXd& s) { return Eigen::VectorXd(-s); };
  auto run = [&](double h) {
    AlgorithmState s{0.0, Eigen::VectorXd::Ones(1)};
    const int n = static_cast<int>(std::lround(1.0 / h));
    for (int i = 0; i < n; ++i) s = rk4_step(rhs, s, h);
    return std::abs(s.data(0) - std::exp(-1.0));
  };
  const double ratio = run(0.02) / run(0.01);
  CHECK(ratio > 12.0);
  CHECK(ratio < 20.0);
}

TEST_CASE("dead-zone instance converges with damping and stalls without") {
  const ProblemBundle bundle = builtin_appendix_b();
  const Problem& p = bundle.problem;
  const auto layouts = make_cluster_layouts(p);
  IntegrateOptions opts = bundle.integration;
  opts.t_end = 120.0;

  const auto good = integrate(p, layouts, GainConfig::uniform(1.0, 1.0), std::nullopt,
                              init_state(p, layouts), opts);
  CHECK(good.stop_reached);
  const auto& space = good.epochs[0].space;
  const Eigen::VectorXd xf = space.x(good.states.back());
  CHECK(std::abs(xf(0) + xf(1) - 2.0) < 1e-3);

  const auto bad = integrate(p, layouts, GainConfig::uniform(0.0, 1.0), std::nullopt,
                             init_state(p, layouts), opts);
  CHECK_FALSE(bad.stop_reached);
  const Eigen::VectorXd xb = space.x(bad.states.back());
  CHECK(std::abs(xb(0) + xb(1) - 2.0) > 0.05);
}

TEST_CASE("integration samples on the stride and always keeps the endpoint") {
  const Problem p = two_agent_problem();
  const auto layouts = make_cluster_layouts(p);
  IntegrateOptions opts;
  opts.step = 0.1;
  opts.t_end = 1.02;  // rounds to ten steps
  opts.sample_stride = 3;
  opts.stop_tol = 0.0;
  const auto rec = integrate(p, layouts, GainConfig::uniform(1.0, 1.0), std::nullopt,
                             init_state(p, layouts), opts);
  REQUIRE(rec.samples() == 5);  // t = 0, 0.3, 0.6, 0.9, 1.0
  CHECK(rec.times.back() == doctest::Approx(1.0));
}

TEST_CASE("divergence is reported with a timestamp") {
  const Problem p = two_agent_problem();
  const auto layouts = make_cluster_layouts(p);
  IntegrateOptions opts;
  opts.step = 10.0;  // far outside the stability region
  opts.t_end = 1000.0;
  opts.stop_tol = 0.0;
  const auto rec = integrate(p, layouts, GainConfig::uniform(1.0, 1.0), std::nullopt,
                             init_state(p, layouts), opts);
  CHECK(rec.diverged);
  CHECK(rec.divergence_time > 0.0);
}

TEST_CASE("topology switching carries dual state by agent id") {
  // Complete physical graph so both layouts are admissible.
  Problem p;
  for (int i = 1; i <= 3; ++i) {
    AgentSpec a;
    a.id = i;
    a.costs = {CostFunction::quadratic(0.4 + 0.2 * i, 0.3 * i, 0.0)};
    p.agents.push_back(std::move(a));
  }
  EqualityConstraint c;
  c.rhs = 4.0;
  for (int i = 1; i <= 3; ++i) c.weights[i] = Eigen::RowVectorXd::Constant(1, 1.0);
  p.constraints.push_back(c);
  p.physical =
      Graph::from_edges({1, 2, 3}, {{1, 2, 1.0}, {2, 3, 1.0}, {1, 3, 1.0}});

  auto layout_with = [&](std::vector<Graph::Edge> edges) {
    ClusterLayout l;
    l.constraint = 0;
    l.members = {1, 2, 3};
    l.adjacency = Eigen::MatrixXd::Zero(3, 3);
    for (const auto& e : edges) {
      l.adjacency(e.u - 1, e.v - 1) = e.weight;
      l.adjacency(e.v - 1, e.u - 1) = e.weight;
    }
    const auto shares = split_b(SplitSpec::equal_core(), {1, 2, 3}, l.members, 4.0);
    for (int id : l.members) l.b_share.push_back(shares.at(id));
    return l;
  };
  const ClusterLayout path = layout_with({{1, 2, 1.0}, {2, 3, 1.0}});
  const ClusterLayout alt = layout_with({{1, 3, 1.0}, {2, 3, 1.0}});

  TopologySchedule schedule;
  schedule.epochs.push_back({0.0, {path}});
  schedule.epochs.push_back({2.0, {alt}});
  schedule.epochs.push_back({4.0, {path}});

  IntegrateOptions opts;
  opts.step = 1e-3;
  opts.t_end = 40.0;
  opts.sample_stride = 100;
  opts.stop_tol = 1e-8;
  const auto rec = integrate(p, {path}, GainConfig::uniform(1.0, 1.0), std::nullopt,
                             init_state(p, {path}), opts, schedule);
  CHECK(rec.epochs.size() == 3);

  const EqualitySolution sol = solve_equality_qp(p);
  const auto& last_epoch = rec.epochs[rec.epoch_of_sample.back()];
  const double gap = (last_epoch.space.x(rec.states.back()) - sol.x).cwiseAbs().maxCoeff();
  CHECK(gap < 1e-5);

  // conservation holds across the switches (same member set throughout)
  for (double drift : conservation_drift(rec)) CHECK(drift < 1e-9);
}

TEST_CASE("schedule times off the step grid are snapped with a note") {
  const Problem p = two_agent_problem();
  const auto layouts = make_cluster_layouts(p);
  TopologySchedule schedule;
  schedule.epochs.push_back({0.0, layouts});
  schedule.epochs.push_back({0.5004, layouts});  // snaps onto the 1e-3 grid
  IntegrateOptions opts;
  opts.step = 1e-3;
  opts.t_end = 1.0;
  opts.stop_tol = 0.0;
  const auto rec = integrate(p, layouts, GainConfig::uniform(1.0, 1.0), std::nullopt,
                             init_state(p, layouts), opts, schedule);
  REQUIRE(rec.notes.size() == 1);
  CHECK(rec.notes[0].find("snapped") != std::string::npos);
}

TEST_CASE("helper agents never receive primal coupling from their cluster") {
  const ProblemBundle bundle = builtin_example1();
  const Problem& p = bundle.problem;
  const auto layouts = make_cluster_layouts(p);
  const StateSpace space(p, layouts);

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> span(-1.0, 1.0);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(space.dim());
  // excite only cluster 2's v block; agent 4 is its helper
  for (int s = 0; s < layouts[1].size(); ++s) space.v(state, 1)(s) = span(rng);

  const Eigen::VectorXd d =
      distributed_rhs(space, state, p, layouts, GainConfig::uniform(1.0, 1.0), std::nullopt);
  const int helper_off = space.x_offset() + p.agent_offset(4);
  // agent 4's cost gradient is zero at x = 0 up to its slope; subtract the
  // gradient-only field to isolate the cluster coupling
  Eigen::VectorXd baseline = Eigen::VectorXd::Zero(space.dim());
  const Eigen::VectorXd d0 =
      distributed_rhs(space, baseline, p, layouts, GainConfig::uniform(1.0, 1.0), std::nullopt);
  for (int c = 0; c < 3; ++c) CHECK(d(helper_off + c) == d0(helper_off + c));
}
