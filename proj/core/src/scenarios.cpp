#include "dra/scenario.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>

namespace dra {

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  return d(engine);
}

int Rng::uniform_int(int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(engine);
}

namespace {

AgentSpec make_agent(int id, std::vector<CostFunction> costs,
                     std::vector<std::optional<double>> lower,
                     std::vector<std::optional<double>> upper) {
  AgentSpec a;
  a.id = id;
  a.costs = std::move(costs);
  a.lower = std::move(lower);
  a.upper = std::move(upper);
  return a;
}

AgentSpec make_uniform_agent(int id, int dim, double a, double b, double c, double lo, double hi) {
  std::vector<CostFunction> costs;
  std::vector<std::optional<double>> lower(dim, lo);
  std::vector<std::optional<double>> upper(dim, hi);
  for (int l = 0; l < dim; ++l) costs.push_back(CostFunction::quadratic(a, b, c));
  return make_agent(id, std::move(costs), std::move(lower), std::move(upper));
}

Graph path_graph(int first_id, int count) {
  std::vector<int> ids;
  std::vector<Graph::Edge> edges;
  for (int i = 0; i < count; ++i) ids.push_back(first_id + i);
  for (int i = 0; i + 1 < count; ++i) edges.push_back({first_id + i, first_id + i + 1, 1.0});
  return Graph::from_edges(ids, edges);
}

}  // namespace

ProblemBundle builtin_example1() {
  ProblemBundle bundle;
  bundle.name = "example1";

  Problem p;
  // IEEE-118 generator rows (cost curve a, b, c and generation limits),
  // one row per agent, shared by all of the agent's units.
  p.agents.push_back(make_uniform_agent(1, 2, 0.0696629, 26.24382, 31.67, 5.0, 30.0));
  p.agents.push_back(make_uniform_agent(2, 1, 0.003, 10.76, 32.96, 100.0, 350.0));
  p.agents.push_back(make_uniform_agent(3, 3, 0.0024014, 12.32989, 28.0, 50.0, 250.0));
  p.agents.push_back(make_uniform_agent(4, 3, 0.0128, 17.82, 10.15, 25.0, 100.0));
  p.agents.push_back(make_uniform_agent(5, 2, 0.010875, 12.8875, 6.78, 150.0, 300.0));
  p.agents.push_back(make_uniform_agent(6, 1, 0.010875, 12.8875, 6.78, 80.0, 300.0));

  EqualityConstraint c1;
  c1.rhs = 450.0;
  c1.weights[1] = Eigen::RowVectorXd::Constant(2, 1.0);
  c1.weights[2] = Eigen::RowVectorXd::Constant(1, 1.0);
  c1.weights[3] = Eigen::RowVectorXd::Constant(3, 0.5);
  c1.weights[4] = Eigen::RowVectorXd::Constant(3, 1.0);
  EqualityConstraint c2;
  c2.rhs = 700.0;
  c2.weights[3] = Eigen::RowVectorXd::Constant(3, 0.5);
  c2.weights[5] = Eigen::RowVectorXd::Constant(2, 1.0);
  c2.weights[6] = Eigen::RowVectorXd::Constant(1, 1.0);
  p.constraints = {c1, c2};

  // Communication disks: agent 4 bridges the two halves of the network and
  // acts as the connectivity helper of the second cluster.
  p.physical = Graph::from_edges({1, 2, 3, 4, 5, 6}, {{1, 2, 1.0},
                                                      {2, 3, 1.0},
                                                      {1, 4, 1.0},
                                                      {3, 4, 1.0},
                                                      {4, 5, 1.0},
                                                      {4, 6, 1.0},
                                                      {5, 6, 1.0}});

  bundle.problem = std::move(p);
  bundle.gains = GainConfig::uniform(1.0, 1.0);
  bundle.penalty.epsilon = 1e-3;
  bundle.penalty.gamma = std::nullopt;  // resolved from the multiplier bound
  bundle.integration.step = 1e-3;
  bundle.integration.t_end = 60.0;
  bundle.integration.sample_stride = 10;
  bundle.integration.stop_tol = 1e-6;
  return bundle;
}

namespace {

Problem sensor_problem(const std::vector<double>& targets) {
  // Monitoring assignment: sensor 1 watches the first three events, sensor 3
  // the middle four, sensor 5 the last three. Relays 2 and 4 carry no cost.
  auto quad_for = [&](int lo, int hi) {
    double sum = 0.0, sq = 0.0;
    for (int j = lo; j <= hi; ++j) {
      sum += targets[j];
      sq += targets[j] * targets[j];
    }
    const double count = hi - lo + 1;
    return CostFunction::quadratic(count, -2.0 * sum, sq);
  };

  Problem p;
  const CostFunction zero = CostFunction::quadratic(0.0, 0.0, 0.0);
  auto with_slack = [&](int id, CostFunction position_cost) {
    return make_agent(id, {std::move(position_cost), zero},
                      {std::nullopt, 0.0},  // slack has a lower bound of 0
                      {std::nullopt, std::nullopt});
  };
  p.agents.push_back(with_slack(1, quad_for(0, 2)));
  p.agents.push_back(with_slack(2, zero));
  p.agents.push_back(with_slack(3, quad_for(3, 6)));
  p.agents.push_back(with_slack(4, zero));
  p.agents.push_back(make_agent(5, {quad_for(7, 9)}, {std::nullopt}, {std::nullopt}));

  for (int j = 1; j <= 4; ++j) {
    EqualityConstraint c;
    c.rhs = 5.0;
    Eigen::RowVectorXd own(2);
    own << 1.0, 1.0;
    c.weights[j] = own;
    if (j + 1 < 5) {
      Eigen::RowVectorXd next(2);
      next << -1.0, 0.0;
      c.weights[j + 1] = next;
    } else {
      c.weights[5] = Eigen::RowVectorXd::Constant(1, -1.0);
    }
    p.constraints.push_back(std::move(c));
  }

  p.physical = path_graph(1, 5);
  return p;
}

}  // namespace

ProblemBundle builtin_example2() {
  ProblemBundle bundle;
  bundle.name = "example2";
  bundle.problem = sensor_problem({12, 11, 9, 3, 2, -1, -2, -8, -11, -13});
  bundle.phase2 = sensor_problem({24, 22, 17, 15, 13, 8, 7, 3, -2, -4});
  bundle.cost_switch_time = 100.0;
  bundle.gains = GainConfig::uniform(1.0, 1.0);
  bundle.penalty.epsilon = 0.01;
  bundle.penalty.gamma = 200.0;
  // The blend zone of the penalty makes the stiffest mode roughly
  // 2 * gamma / epsilon; the default step stays inside the RK4 stability
  // interval for it.
  bundle.integration.step = 5e-5;
  bundle.integration.t_end = 200.0;
  bundle.integration.sample_stride = 200;
  bundle.integration.stop_tol = 1e-6;
  return bundle;
}

ProblemBundle builtin_appendix_b() {
  ProblemBundle bundle;
  bundle.name = "appendixB";

  Problem p;
  const CostFunction dz = CostFunction::smooth_deadzone(2.0, 0.01);
  p.agents.push_back(make_agent(1, {dz}, {std::nullopt}, {std::nullopt}));
  p.agents.push_back(make_agent(2, {dz}, {std::nullopt}, {std::nullopt}));
  EqualityConstraint c;
  c.rhs = 2.0;
  c.weights[1] = Eigen::RowVectorXd::Constant(1, 1.0);
  c.weights[2] = Eigen::RowVectorXd::Constant(1, 1.0);
  p.constraints.push_back(std::move(c));
  p.physical = path_graph(1, 2);

  bundle.problem = std::move(p);
  bundle.gains = GainConfig::uniform(1.0, 1.0);
  bundle.integration.step = 1e-3;
  bundle.integration.t_end = 500.0;
  bundle.integration.sample_stride = 100;
  bundle.integration.stop_tol = 1e-6;
  return bundle;
}

ProblemBundle builtin_table1(std::uint64_t seed) {
  ProblemBundle bundle;
  bundle.name = "table1";
  Rng rng(seed == 0 ? 1 : seed);
  bundle.problem = make_table1_instance(rng);
  bundle.gains = GainConfig::uniform(1.0, 1.0);
  bundle.penalty.epsilon = 1e-3;
  bundle.integration.step = 1e-4;
  bundle.integration.t_end = 80.0;
  bundle.integration.sample_stride = 100;
  return bundle;
}

ProblemBundle make_builtin(const std::string& name, std::uint64_t seed) {
  if (name == "example1") return builtin_example1();
  if (name == "example2") return builtin_example2();
  if (name == "appendixB") return builtin_appendix_b();
  if (name == "table1") return builtin_table1(seed);
  throw std::invalid_argument("unknown builtin scenario '" + name + "'");
}

Problem make_table1_instance(Rng& rng) {
  Problem p;
  EqualityConstraint c;
  double weight_sum = 0.0;
  for (int i = 1; i <= 10; ++i) {
    AgentSpec a;
    a.id = i;
    a.costs.push_back(CostFunction::quadratic(rng.uniform(1e-6, 1.0), rng.uniform(1e-6, 3.0),
                                              rng.uniform(0.0, 4.0)));
    a.lower = {0.0};
    a.upper = {1.0};
    p.agents.push_back(std::move(a));
    const double w = rng.uniform(1e-3, 2.0);
    weight_sum += w;
    c.weights[i] = Eigen::RowVectorXd::Constant(1, w);
  }
  double b = rng.uniform(1e-3, 4.0);
  while (b >= 0.95 * weight_sum) b = rng.uniform(1e-3, 4.0);
  c.rhs = b;
  p.constraints.push_back(std::move(c));
  p.physical = path_graph(1, 10);
  return p;
}

Problem make_strongly_convex_instance(Rng& rng, int max_agents, int max_p) {
  while (true) {
    Problem p;
    const int n_agents = rng.uniform_int(2, max_agents);
    for (int i = 1; i <= n_agents; ++i) {
      AgentSpec a;
      a.id = i;
      const int dim = rng.uniform_int(1, 3);
      for (int l = 0; l < dim; ++l) {
        a.costs.push_back(
            CostFunction::quadratic(rng.uniform(0.1, 1.0), rng.uniform(-3.0, 3.0), 0.0));
      }
      p.agents.push_back(std::move(a));
    }
    const int pc = rng.uniform_int(1, max_p);
    for (int k = 0; k < pc; ++k) {
      EqualityConstraint c;
      c.rhs = rng.uniform(-5.0, 5.0);
      for (const auto& a : p.agents) {
        if (rng.uniform(0.0, 1.0) < 0.7) {
          Eigen::RowVectorXd row(a.dim());
          for (int l = 0; l < a.dim(); ++l) {
            row(l) = rng.uniform(0.3, 1.5) * (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
          }
          c.weights[a.id] = row;
        }
      }
      if (c.weights.empty()) c.weights[p.agents.front().id] =
          Eigen::RowVectorXd::Constant(p.agents.front().dim(), 1.0);
      p.constraints.push_back(std::move(c));
    }
    p.physical = path_graph(1, n_agents);

    const ValidationReport r = validate(p);
    if (r.ok) return p;
  }
}

Problem make_boxed_allocation_instance(Rng& rng, int max_agents) {
  Problem p;
  EqualityConstraint c;
  const int n_agents = rng.uniform_int(2, max_agents);
  double rhs = 0.0;
  for (int i = 1; i <= n_agents; ++i) {
    AgentSpec a;
    a.id = i;
    a.costs.push_back(
        CostFunction::quadratic(rng.uniform(0.3, 1.0), rng.uniform(-2.0, 2.0), 0.0));
    const double center = rng.uniform(-1.0, 1.0);
    const double radius = rng.uniform(0.3, 1.0);
    a.lower = {center - radius};
    a.upper = {center + radius};
    const double w = rng.uniform(0.3, 2.0);
    c.weights[i] = Eigen::RowVectorXd::Constant(1, w);
    // Feasible interior point, biased toward the edges so bounds activate.
    rhs += w * (center + 0.85 * radius * rng.uniform(-1.0, 1.0));
    p.agents.push_back(std::move(a));
  }
  c.rhs = rhs;
  p.constraints.push_back(std::move(c));
  p.physical = path_graph(1, n_agents);
  return p;
}

Problem make_licq_candidate_instance(Rng& rng) {
  while (true) {
    Problem p;
    const int n_agents = rng.uniform_int(2, 3);
    std::vector<double> interior;
    for (int i = 1; i <= n_agents; ++i) {
      AgentSpec a;
      a.id = i;
      const int dim = rng.uniform_int(1, 2);
      for (int l = 0; l < dim; ++l) {
        a.costs.push_back(
            CostFunction::quadratic(rng.uniform(0.2, 1.0), rng.uniform(-2.0, 2.0), 0.0));
        const double center = rng.uniform(-1.0, 1.0);
        const double radius = rng.uniform(0.4, 1.2);
        a.lower.push_back(center - radius);
        a.upper.push_back(center + radius);
        interior.push_back(center + 0.8 * radius * rng.uniform(-1.0, 1.0));
      }
      p.agents.push_back(std::move(a));
    }
    const int m = static_cast<int>(interior.size());
    const int pc = rng.uniform_int(1, std::min(2, m - 1));
    Eigen::VectorXd x0(m);
    for (int i = 0; i < m; ++i) x0(i) = interior[i];

    for (int k = 0; k < pc; ++k) {
      EqualityConstraint c;
      for (const auto& a : p.agents) {
        Eigen::RowVectorXd row(a.dim());
        bool nonzero = false;
        for (int l = 0; l < a.dim(); ++l) {
          if (rng.uniform(0.0, 1.0) < 0.8) {
            row(l) = rng.uniform(0.3, 1.8) * (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0);
            nonzero = true;
          } else {
            row(l) = 0.0;
          }
        }
        if (nonzero) c.weights[a.id] = row;
      }
      if (c.weights.empty()) {
        c.weights[p.agents.front().id] =
            Eigen::RowVectorXd::Constant(p.agents.front().dim(), 1.0);
      }
      p.constraints.push_back(std::move(c));
    }
    // Feasible by construction.
    const Eigen::MatrixXd w = p.stacked_weights();
    const Eigen::VectorXd b = w * x0;
    for (int k = 0; k < pc; ++k) p.constraints[k].rhs = b(k);
    p.physical = path_graph(1, n_agents);

    const ValidationReport r = validate(p);
    if (r.ok) return p;
  }
}

Problem make_grid_check_instance(Rng& rng) {
  while (true) {
    Problem p;
    const int m = rng.uniform_int(3, 4);
    std::vector<double> interior;
    for (int i = 1; i <= m; ++i) {
      AgentSpec a;
      a.id = i;
      a.costs.push_back(
          CostFunction::quadratic(rng.uniform(0.2, 1.0), rng.uniform(-2.0, 2.0), 0.0));
      const double center = rng.uniform(-0.5, 0.5);
      const double radius = rng.uniform(0.4, 0.8);
      a.lower = {center - radius};
      a.upper = {center + radius};
      interior.push_back(center + 0.7 * radius * rng.uniform(-1.0, 1.0));
      p.agents.push_back(std::move(a));
    }
    const int pc = m - 2;  // two grid dimensions
    Eigen::VectorXd x0(m);
    for (int i = 0; i < m; ++i) x0(i) = interior[i];
    for (int k = 0; k < pc; ++k) {
      EqualityConstraint c;
      for (const auto& a : p.agents) {
        if (rng.uniform(0.0, 1.0) < 0.85) {
          c.weights[a.id] = Eigen::RowVectorXd::Constant(
              1, rng.uniform(0.3, 1.5) * (rng.uniform(0.0, 1.0) < 0.5 ? -1.0 : 1.0));
        }
      }
      if (static_cast<int>(c.weights.size()) < 2) {
        c.weights[p.agents[0].id] = Eigen::RowVectorXd::Constant(1, 1.0);
        c.weights[p.agents[1].id] = Eigen::RowVectorXd::Constant(1, 1.0);
      }
      p.constraints.push_back(std::move(c));
    }
    const Eigen::MatrixXd w = p.stacked_weights();
    const Eigen::VectorXd b = w * x0;
    for (int k = 0; k < pc; ++k) p.constraints[k].rhs = b(k);
    p.physical = path_graph(1, m);

    const ValidationReport r = validate(p);
    if (r.ok) return p;
  }
}

}  // namespace dra
