#include "dra/checks.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "dra/diagnostics.hpp"
#include "dra/dynamics.hpp"
#include "dra/graph.hpp"
#include "dra/oracle.hpp"
#include "dra/penalty.hpp"
#include "dra/problem_io.hpp"
#include "dra/run.hpp"
#include "dra/scenario.hpp"

namespace dra {

namespace {

struct Suite {
  std::vector<CheckResult> results;

  void run(const std::string& name, const std::function<std::string()>& body) {
    CheckResult r;
    r.name = name;
    try {
      r.detail = body();  // empty string = pass, otherwise failure detail
      r.passed = r.detail.empty();
    } catch (const std::exception& err) {
      r.passed = false;
      r.detail = std::string("exception: ") + err.what();
    }
    results.push_back(std::move(r));
  }
};

Graph random_graph(Rng& rng, int n, double edge_prob) {
  std::vector<int> ids;
  std::vector<Graph::Edge> edges;
  for (int i = 1; i <= n; ++i) ids.push_back(i);
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      if (rng.uniform(0.0, 1.0) < edge_prob) edges.push_back({i, j, 1.0});
    }
  }
  return Graph::from_edges(ids, edges);
}

Graph random_connected_graph(Rng& rng, int n) {
  std::vector<int> ids;
  std::vector<Graph::Edge> edges;
  for (int i = 1; i <= n; ++i) ids.push_back(i);
  for (int i = 2; i <= n; ++i) edges.push_back({rng.uniform_int(1, i - 1), i, 1.0});
  for (int i = 1; i <= n; ++i) {
    for (int j = i + 1; j <= n; ++j) {
      if (rng.uniform(0.0, 1.0) < 0.15) edges.push_back({i, j, 1.0});
    }
  }
  return Graph::from_edges(ids, edges);
}

int component_count(const Graph& g) {
  // Count via repeated BFS on the induced structure.
  const int n = g.size();
  std::vector<char> seen(n, 0);
  int comps = 0;
  for (int s = 0; s < n; ++s) {
    if (seen[s]) continue;
    ++comps;
    std::vector<int> stack{s};
    seen[s] = 1;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < n; ++j) {
        if (!seen[j] && g.adjacency()(i, j) > 0.0) {
          seen[j] = 1;
          stack.push_back(j);
        }
      }
    }
  }
  return comps;
}

// Equilibrium state built from an oracle point: v = nu 1, y = wx - b_share.
AlgorithmState equilibrium_state(const Problem& p, const std::vector<ClusterLayout>& layouts,
                                 const Eigen::VectorXd& x, const Eigen::VectorXd& nu) {
  const StateSpace space(p, layouts);
  AlgorithmState s;
  s.t = 0.0;
  s.data = Eigen::VectorXd::Zero(space.dim());
  space.x(s.data) = x;
  for (std::size_t k = 0; k < layouts.size(); ++k) {
    auto vk = space.v(s.data, static_cast<int>(k));
    auto yk = space.y(s.data, static_cast<int>(k));
    for (int slot = 0; slot < layouts[k].size(); ++slot) {
      vk(slot) = nu(static_cast<int>(k));
      const int id = layouts[k].members[slot];
      const Eigen::RowVectorXd row = p.weight_row(static_cast<int>(k), id);
      const double local = row.size() > 0 ? row.dot(x.segment(p.agent_offset(id), row.size())) : 0.0;
      yk(slot) = local - layouts[k].b_share[slot];
    }
  }
  return s;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

std::vector<CheckResult> run_check_suite(std::uint64_t seed) {
  Suite suite;
  Rng rng(seed == 0 ? 12345 : seed);

  // ---- graph ----

  suite.run("graph.laplacian_row_sums", [&]() -> std::string {
    for (int trial = 0; trial < 50; ++trial) {
      Graph g = random_graph(rng, rng.uniform_int(2, 30), 0.3);
      const Eigen::MatrixXd l = laplacian(g);
      const double worst = (l * Eigen::VectorXd::Ones(g.size())).cwiseAbs().maxCoeff();
      if (worst > 1e-12 * (1.0 + l.cwiseAbs().maxCoeff())) {
        return "row sum " + fmt(worst);
      }
    }
    return "";
  });

  suite.run("graph.connectivity_spectral_crosscheck", [&]() -> std::string {
    for (int trial = 0; trial < 60; ++trial) {
      const int n = rng.uniform_int(2, 50);
      Graph g = random_graph(rng, n, rng.uniform(0.02, 0.4));
      const bool bfs = is_connected(g);
      const bool spectral = spectrum(g).fiedler > 1e-9;
      if (bfs != spectral) {
        return "disagreement on " + std::to_string(n) + " nodes";
      }
    }
    return "";
  });

  suite.run("graph.cluster_helper_minimality", [&]() -> std::string {
    for (int trial = 0; trial < 40; ++trial) {
      Graph g = random_connected_graph(rng, rng.uniform_int(4, 14));
      const int core_size = rng.uniform_int(2, std::max(2, g.size() / 2));
      std::vector<int> core;
      for (int i = 0; i < core_size; ++i) {
        const int id = g.node_ids()[rng.uniform_int(0, g.size() - 1)];
        if (std::find(core.begin(), core.end(), id) == core.end()) core.push_back(id);
      }
      const ClusterTrace trace = connect_cluster_trace(g, core);
      // Replay the growth and test that every helper was a cut vertex at the
      // moment it joined.
      std::vector<int> current = core;
      std::sort(current.begin(), current.end());
      current.erase(std::unique(current.begin(), current.end()), current.end());
      for (const auto& join : trace.joins) {
        std::vector<int> after = current;
        for (int h : join.helpers) after.push_back(h);
        std::sort(after.begin(), after.end());
        const int comps_after = component_count(g.induced(after));
        for (int h : join.helpers) {
          std::vector<int> without;
          for (int id : after) {
            if (id != h) without.push_back(id);
          }
          if (component_count(g.induced(without)) <= comps_after) {
            return "helper " + std::to_string(h) + " was not load-bearing";
          }
        }
        current = after;
      }
    }
    return "";
  });

  suite.run("graph.max_consensus_within_diameter", [&]() -> std::string {
    for (int trial = 0; trial < 100; ++trial) {
      Graph g = random_connected_graph(rng, rng.uniform_int(2, 20));
      std::vector<double> locals;
      double truth = -1e300;
      for (int i = 0; i < g.size(); ++i) {
        locals.push_back(rng.uniform(-10.0, 10.0));
        truth = std::max(truth, locals.back());
      }
      const auto out = max_consensus(g, locals);
      for (double v : out) {
        if (v != truth) return "node missed the maximum";
      }
    }
    return "";
  });

  // ---- model ----

  suite.run("model.gradient_matches_finite_differences", [&]() -> std::string {
    const CostFunction quad = CostFunction::quadratic(0.7, -1.3, 0.2);
    const CostFunction dz = CostFunction::smooth_deadzone(2.0, 0.05);
    const double h = 1e-6;
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform(-6.0, 6.0);
      for (const CostFunction* c : {&quad, &dz}) {
        const double fd = (c->value(x + h) - c->value(x - h)) / (2.0 * h);
        const double an = c->derivative(x);
        if (std::abs(fd - an) > 1e-5 * (1.0 + std::abs(an))) {
          return "mismatch at x = " + fmt(x);
        }
      }
    }
    return "";
  });

  suite.run("model.cost_convexity", [&]() -> std::string {
    const CostFunction quad = CostFunction::quadratic(rng.uniform(0.0, 2.0), 1.0, 0.0);
    const CostFunction dz = CostFunction::smooth_deadzone(1.5, 0.02);
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform(-5.0, 5.0);
      const double z = rng.uniform(-5.0, 5.0);
      for (const CostFunction* c : {&quad, &dz}) {
        if ((z - x) * (c->derivative(z) - c->derivative(x)) < -1e-12) {
          return "monotone gradient violated";
        }
      }
    }
    return "";
  });

  suite.run("model.split_b_sums_exactly", [&]() -> std::string {
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<int> cluster;
      const int n = rng.uniform_int(1, 8);
      for (int i = 1; i <= n; ++i) cluster.push_back(i);
      std::vector<int> core(cluster.begin(), cluster.begin() + rng.uniform_int(1, n));
      const double b = rng.uniform(-1000.0, 1000.0);
      const auto shares = split_b(SplitSpec::equal_core(), core, cluster, b);
      double total = 0.0;
      for (const auto& [id, v] : shares) total += v;
      if (total != b) return "sum " + fmt(total) + " vs " + fmt(b);
    }
    return "";
  });

  // ---- penalty ----

  suite.run("penalty.p_eps_is_c1", [&]() -> std::string {
    for (int trial = 0; trial < 100; ++trial) {
      const double eps = rng.uniform(1e-6, 1.0);
      // Branch formulas evaluated at the seams agree to rounding.
      if (std::abs(eps * eps / (2.0 * eps) - (eps - 0.5 * eps)) > 4e-16 * eps) {
        return "branch values differ at eps";
      }
      if (std::abs(eps / eps - 1.0) != 0.0) return "branch grads differ at eps";
      // One-sided limits: drift across a 2d window is bounded by the slope.
      const double d = 1e-9 * eps;
      if (std::abs(p_eps(-d, eps) - p_eps(d, eps)) > 3.0 * d) return "value jump at 0";
      if (std::abs(p_eps_grad(-d, eps) - p_eps_grad(d, eps)) > 2.0 * d / eps) {
        return "grad jump at 0";
      }
      if (std::abs(p_eps(eps - d, eps) - p_eps(eps + d, eps)) > 3.0 * d) {
        return "value jump at eps";
      }
      if (std::abs(p_eps_grad(eps - d, eps) - p_eps_grad(eps + d, eps)) > 2.0 * d / eps + 1e-12) {
        return "grad jump at eps";
      }
    }
    return "";
  });

  suite.run("penalty.p_eps_convex", [&]() -> std::string {
    for (int trial = 0; trial < 50; ++trial) {
      const double eps = rng.uniform(1e-4, 0.5);
      const double lo = -2.0 * eps;
      const double hi = 3.0 * eps;
      const int n = 200;
      const double step = (hi - lo) / n;
      for (int i = 1; i + 1 < n; ++i) {
        const double y = lo + i * step;
        const double second =
            p_eps(y - step, eps) - 2.0 * p_eps(y, eps) + p_eps(y + step, eps);
        if (second < -1e-12) return "negative second difference";
      }
    }
    return "";
  });

  suite.run("penalty.mu_bound_single_dominates_oracle", [&]() -> std::string {
    for (int trial = 0; trial < 100; ++trial) {
      const Problem p = make_table1_instance(rng);
      const KKTPoint pt = solve_boxed_qp(p);
      const MultiplierBound mb = mu_bound_single(p);
      if (pt.max_multiplier() > mb.value) {
        return "oracle " + fmt(pt.max_multiplier()) + " above bound " + fmt(mb.value);
      }
    }
    return "";
  });

  suite.run("penalty.mu_bound_licq_dominates_oracle", [&]() -> std::string {
    int verified = 0;
    while (verified < 100) {
      const Problem p = make_licq_candidate_instance(rng);
      const KKTPoint pt = solve_boxed_qp(p);
      // LICQ at the solution: W restricted to inactive columns keeps rank p.
      std::vector<char> active(p.total_dim(), 0);
      for (int c : pt.active_lower) active[c] = 1;
      for (int c : pt.active_upper) active[c] = 1;
      const Eigen::MatrixXd w = p.stacked_weights();
      std::vector<int> inactive;
      for (int i = 0; i < p.total_dim(); ++i) {
        if (!active[i]) inactive.push_back(i);
      }
      if (static_cast<int>(inactive.size()) < p.num_constraints()) continue;
      Eigen::MatrixXd wi(p.num_constraints(), inactive.size());
      for (std::size_t i = 0; i < inactive.size(); ++i) wi.col(i) = w.col(inactive[i]);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(wi);
      if (svd.singularValues()(p.num_constraints() - 1) < 1e-8) continue;
      ++verified;
      const MultiplierBound mb = mu_bound_licq(p);
      if (pt.max_multiplier() > mb.value) {
        return "oracle " + fmt(pt.max_multiplier()) + " above bound " + fmt(mb.value);
      }
    }
    return "";
  });

  suite.run("penalty.grad_bound_monotone_under_enlargement", [&]() -> std::string {
    for (int trial = 0; trial < 200; ++trial) {
      AgentSpec a;
      a.id = 1;
      a.costs.push_back(CostFunction::quadratic(rng.uniform(0.0, 2.0), rng.uniform(-3.0, 3.0), 0.0));
      const double lo = rng.uniform(-4.0, 0.0);
      const double hi = rng.uniform(0.5, 4.0);
      a.lower = {lo};
      a.upper = {hi};
      const double narrow = grad_inf_bound(a);
      a.lower = {lo - rng.uniform(0.0, 2.0)};
      a.upper = {hi + rng.uniform(0.0, 2.0)};
      if (grad_inf_bound(a) < narrow - 1e-12) return "bound shrank under enlargement";
    }
    return "";
  });

  // ---- dynamics + diagnostics ----

  suite.run("dynamics.conservation_along_rk4", [&]() -> std::string {
    const Problem p = make_strongly_convex_instance(rng);
    const auto layouts = make_cluster_layouts(p);
    const GainConfig gains = GainConfig::uniform(1.0, 1.0);
    IntegrateOptions opts;
    opts.step = 1e-3;
    opts.t_end = 20.0;
    opts.sample_stride = 10;
    opts.stop_tol = 0.0;
    const auto rec = integrate(p, layouts, gains, std::nullopt, init_state(p, layouts), opts);
    double scale = 0.0;
    for (const auto& s : rec.states) scale = std::max(scale, s.norm());
    for (double drift : conservation_drift(rec)) {
      if (drift > 1e-9 * (1.0 + scale)) return "drift " + fmt(drift);
    }
    return "";
  });

  suite.run("dynamics.aggregate_dual_identity", [&]() -> std::string {
    const Problem p = make_strongly_convex_instance(rng);
    const auto layouts = make_cluster_layouts(p);
    const GainConfig gains = GainConfig::uniform(1.0, 1.0);
    IntegrateOptions opts;
    opts.step = 1e-3;
    opts.t_end = 2.0;
    opts.sample_stride = 1;
    opts.stop_tol = 0.0;
    const auto rec = integrate(p, layouts, gains, std::nullopt, init_state(p, layouts), opts);
    const double scale = 1.0 + p.rhs_vector().cwiseAbs().maxCoeff();
    for (double r : aggregate_dual_identity(rec, p)) {
      if (r > 1e-5 * scale) return "residual " + fmt(r);
    }
    return "";
  });

  suite.run("dynamics.mutant_rhs_detected", [&]() -> std::string {
    // Deliberate sign mutation of the local-mismatch term in the v equation;
    // the aggregate dual identity must flag it.
    const Problem p = make_strongly_convex_instance(rng, 3, 1);
    const auto layouts = make_cluster_layouts(p);
    const GainConfig gains = GainConfig::uniform(1.0, 1.0);
    const DistributedSystem system(p, layouts, gains, std::nullopt);
    const StateSpace& space = system.space();

    auto mutant = [&](double, const Eigen::VectorXd& s) {
      Eigen::VectorXd d = system.rhs(s);
      for (int k = 0; k < space.num_clusters(); ++k) {
        auto vdot = space.v(d, k);
        const Eigen::VectorXd x = space.x(s);
        for (int slot = 0; slot < layouts[k].size(); ++slot) {
          const int id = layouts[k].members[slot];
          const Eigen::RowVectorXd row = p.weight_row(k, id);
          const double local =
              row.size() > 0 ? row.dot(x.segment(p.agent_offset(id), row.size())) : 0.0;
          vdot(slot) -= 2.0 * (local - layouts[k].b_share[slot]);
        }
      }
      return d;
    };

    const auto trace = integrate_flow(mutant, init_state(p, layouts).data, 1e-3, 2.0, 1);
    TrajectoryRecord rec;
    rec.epochs.push_back({0.0, layouts, space});
    for (std::size_t i = 0; i < trace.times.size(); ++i) {
      rec.times.push_back(trace.times[i]);
      rec.states.push_back(trace.states[i]);
      rec.epoch_of_sample.push_back(0);
    }
    const double scale = 1.0 + p.rhs_vector().cwiseAbs().maxCoeff();
    double worst = 0.0;
    for (double r : aggregate_dual_identity(rec, p)) worst = std::max(worst, r);
    if (worst <= 1e-5 * scale) return "mutation went undetected";
    return "";
  });

  suite.run("dynamics.equilibrium_is_fixed_point", [&]() -> std::string {
    for (int trial = 0; trial < 10; ++trial) {
      const Problem p = make_strongly_convex_instance(rng);
      const auto layouts = make_cluster_layouts(p);
      const EqualitySolution sol = solve_equality_qp(p);
      const AlgorithmState s = equilibrium_state(p, layouts, sol.x, sol.nu);
      const auto r = equilibrium_residual(s, p, layouts, GainConfig::uniform(1.0, 1.0),
                                          std::nullopt);
      if (r.rhs_norm > 1e-8 * (1.0 + sol.x.cwiseAbs().maxCoeff())) {
        return "fixed-point residual " + fmt(r.rhs_norm);
      }
    }
    return "";
  });

  suite.run("dynamics.locality_of_node_updates", [&]() -> std::string {
    const Problem p = make_strongly_convex_instance(rng, 5, 2);
    const auto layouts = make_cluster_layouts(p);
    const GainConfig gains = GainConfig::uniform(1.0, 1.0);
    const StateSpace space(p, layouts);
    Eigen::VectorXd s(space.dim());
    for (int i = 0; i < s.size(); ++i) s(i) = rng.uniform(-2.0, 2.0);
    const Eigen::VectorXd base = distributed_rhs(space, s, p, layouts, gains, std::nullopt);

    for (std::size_t k = 0; k < layouts.size(); ++k) {
      const auto& layout = layouts[k];
      for (int l = 0; l < layout.size(); ++l) {
        for (int j = 0; j < layout.size(); ++j) {
          if (j == l || layout.adjacency(l, j) > 0.0) continue;
          Eigen::VectorXd mutated = s;
          space.v(mutated, static_cast<int>(k))(j) = 0.0;
          const Eigen::VectorXd d =
              distributed_rhs(space, mutated, p, layouts, gains, std::nullopt);
          const int yoff = space.y_offset(static_cast<int>(k)) + l;
          const int voff = space.v_offset(static_cast<int>(k)) + l;
          if (d(yoff) != base(yoff) || d(voff) != base(voff)) {
            return "node derivative read a non-neighbor copy";
          }
          const int id = layout.members[l];
          const int xoff = space.x_offset() + p.agent_offset(id);
          for (int c = 0; c < p.agent(id).dim(); ++c) {
            if (d(xoff + c) != base(xoff + c)) {
              return "primal derivative read a non-neighbor copy";
            }
          }
        }
      }
    }
    return "";
  });

  suite.run("dynamics.exponential_convergence_strongly_convex", [&]() -> std::string {
    for (int trial = 0; trial < 5; ++trial) {
      const Problem p = make_strongly_convex_instance(rng);
      const auto layouts = make_cluster_layouts(p);
      const GainConfig gains = GainConfig::uniform(1.0, 1.0);
      IntegrateOptions opts;
      opts.step = 1e-3;
      opts.t_end = 120.0;
      opts.sample_stride = 20;
      opts.stop_tol = 1e-9;
      const auto rec = integrate(p, layouts, gains, std::nullopt, init_state(p, layouts), opts);
      const EqualitySolution sol = solve_equality_qp(p);
      const RateFit fit = rate_fit(rec, sol.x);
      if (!fit.available) return "no fit: " + fit.reason;
      if (fit.rate >= 0.0) return "nonnegative rate " + fmt(fit.rate);
      if (fit.r2 < 0.95) return "r2 " + fmt(fit.r2);
    }
    return "";
  });

  suite.run("dynamics.dynamic_topology_convergence", [&]() -> std::string {
    // Strongly convex instance, complete physical graph, alternating between
    // a path layout and a star layout every 5 time units.
    Problem p;
    for (int i = 1; i <= 4; ++i) {
      AgentSpec a;
      a.id = i;
      a.costs.push_back(CostFunction::quadratic(0.3 + 0.2 * i, -1.0 + 0.7 * i, 0.0));
      p.agents.push_back(std::move(a));
    }
    EqualityConstraint c;
    c.rhs = 10.0;
    for (int i = 1; i <= 4; ++i) c.weights[i] = Eigen::RowVectorXd::Constant(1, 1.0);
    p.constraints.push_back(std::move(c));
    std::vector<Graph::Edge> all_edges;
    for (int i = 1; i <= 4; ++i) {
      for (int j = i + 1; j <= 4; ++j) all_edges.push_back({i, j, 1.0});
    }
    p.physical = Graph::from_edges({1, 2, 3, 4}, all_edges);

    auto layout_from = [&](const std::vector<Graph::Edge>& edges) {
      ClusterLayout layout;
      layout.constraint = 0;
      layout.members = {1, 2, 3, 4};
      layout.adjacency = Eigen::MatrixXd::Zero(4, 4);
      for (const auto& e : edges) {
        layout.adjacency(e.u - 1, e.v - 1) = e.weight;
        layout.adjacency(e.v - 1, e.u - 1) = e.weight;
      }
      const auto shares = split_b(SplitSpec::equal_core(), {1, 2, 3, 4}, layout.members, c.rhs);
      for (int id : layout.members) layout.b_share.push_back(shares.at(id));
      return layout;
    };
    const ClusterLayout path = layout_from({{1, 2, 1.0}, {2, 3, 1.0}, {3, 4, 1.0}});
    const ClusterLayout star = layout_from({{1, 2, 1.0}, {1, 3, 1.0}, {1, 4, 1.0}});

    TopologySchedule schedule;
    for (int i = 0; i < 8; ++i) {
      schedule.epochs.push_back({5.0 * i, {i % 2 == 0 ? path : star}});
    }

    IntegrateOptions opts;
    opts.step = 1e-3;
    opts.t_end = 60.0;
    opts.sample_stride = 20;
    opts.stop_tol = 1e-8;
    const auto rec = integrate(p, {path}, GainConfig::uniform(1.0, 1.0), std::nullopt,
                               init_state(p, {path}), opts, schedule);
    const EqualitySolution sol = solve_equality_qp(p);
    const auto& epoch = rec.epochs[rec.epoch_of_sample.back()];
    const double gap = (epoch.space.x(rec.states.back()) - sol.x).cwiseAbs().maxCoeff();
    if (gap > 1e-4) return "final gap " + fmt(gap);
    return "";
  });

  // ---- oracle ----

  suite.run("oracle.cross_oracle_agreement", [&]() -> std::string {
    for (int trial = 0; trial < 50; ++trial) {
      const Problem p = make_boxed_allocation_instance(rng);
      ResolvedPenalty pen;
      pen.epsilon = 0.01;
      pen.gamma = gamma_auto(p.num_agents(), mu_bound_single(p));
      const KKTPoint pt = solve_boxed_qp(p);
      FlowSolveOptions fopts;
      fopts.t_max = 400.0;
      fopts.tol = 1e-8;
      const FlowSolveResult flow = centralized_flow_solve(p, 1.0, pen, fopts);
      if (!flow.converged) return "flow oracle did not converge";
      const double tol = std::max(1e-4, 2.0 * pen.epsilon);
      const double gap = (flow.x - pt.x).cwiseAbs().maxCoeff();
      if (gap > tol) return "oracle disagreement " + fmt(gap);
    }
    return "";
  });

  suite.run("oracle.grid_search_never_beats_enumeration", [&]() -> std::string {
    for (int trial = 0; trial < 10; ++trial) {
      const Problem p = make_grid_check_instance(rng);
      const KKTPoint pt = solve_boxed_qp(p);
      const double oracle_cost = p.cost_value(pt.x);

      // Walk a grid over two free coordinates and solve the equality system
      // for the remaining ones.
      const Eigen::MatrixXd w = p.stacked_weights();
      const Eigen::VectorXd b = p.rhs_vector();
      const int m = p.total_dim();
      const int pc = p.num_constraints();
      const int f0 = 0;
      const int f1 = 1;
      std::vector<int> rest;
      for (int i = 0; i < m; ++i) {
        if (i != f0 && i != f1) rest.push_back(i);
      }
      Eigen::MatrixXd wr(pc, rest.size());
      for (std::size_t i = 0; i < rest.size(); ++i) wr.col(i) = w.col(rest[i]);
      const Eigen::FullPivLU<Eigen::MatrixXd> lu(wr);
      if (!lu.isInvertible()) continue;

      auto bounds_of = [&](int coord) {
        int off = 0;
        for (const auto& a : p.agents) {
          if (coord < off + a.dim()) {
            const int l = coord - off;
            return std::make_pair(*a.lower_bound(l), *a.upper_bound(l));
          }
          off += a.dim();
        }
        throw std::logic_error("coordinate out of range");
      };

      const auto [lo0, hi0] = bounds_of(f0);
      const auto [lo1, hi1] = bounds_of(f1);
      double best = oracle_cost + 1.0;
      const double step = 1e-3 * std::max(hi0 - lo0, hi1 - lo1);
      for (double u = lo0; u <= hi0 + 1e-12; u += step) {
        for (double v = lo1; v <= hi1 + 1e-12; v += step) {
          const Eigen::VectorXd rhs = b - w.col(f0) * u - w.col(f1) * v;
          const Eigen::VectorXd xr = lu.solve(rhs);
          Eigen::VectorXd x(m);
          x(f0) = u;
          x(f1) = v;
          bool ok = true;
          for (std::size_t i = 0; i < rest.size(); ++i) {
            x(rest[i]) = xr(static_cast<int>(i));
            const auto [lo, hi] = bounds_of(rest[i]);
            if (xr(static_cast<int>(i)) < lo || xr(static_cast<int>(i)) > hi) {
              ok = false;
              break;
            }
          }
          if (ok) best = std::min(best, p.cost_value(x));
        }
      }
      if (best < oracle_cost - 1e-6) {
        return "grid found " + fmt(best) + " below oracle " + fmt(oracle_cost);
      }
    }
    return "";
  });

  suite.run("oracle.unique_assignment_under_strong_convexity", [&]() -> std::string {
    for (int trial = 0; trial < 25; ++trial) {
      const Problem p = make_boxed_allocation_instance(rng);
      const int count = count_kkt_assignments(p);
      if (count != 1) return std::to_string(count) + " accepted assignments";
    }
    return "";
  });

  suite.run("oracle.kkt_residual_certified", [&]() -> std::string {
    for (int trial = 0; trial < 40; ++trial) {
      const Problem p = make_boxed_allocation_instance(rng);
      const KKTResidual r = kkt_residual(solve_boxed_qp(p), p);
      if (!r.certified(1e-8)) return "residual above 1e-8";
    }
    return "";
  });

  // ---- artifact determinism ----

  suite.run("cli.trajectory_determinism", [&]() -> std::string {
    ScenarioConfig cfg;
    cfg.builtin = "appendixB";
    cfg.t_end = 5.0;
    auto render = [&]() {
      const SolveResult res = run_solve(cfg);
      std::ostringstream os;
      write_trajectory_csv(os, res.trajectory,
                           res.bundle.phase2 ? *res.bundle.phase2 : res.bundle.problem);
      return os.str();
    };
    if (render() != render()) return "byte difference between identical runs";
    return "";
  });

  return suite.results;
}

}  // namespace dra
