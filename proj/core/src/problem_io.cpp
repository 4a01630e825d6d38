#include "dra/problem_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dra {

using nlohmann::json;

namespace {

CostFunction cost_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "quadratic") {
    return CostFunction::quadratic(j.at("a").get<double>(), j.at("b").get<double>(),
                                   j.value("c", 0.0));
  }
  if (type == "smooth_deadzone") {
    return CostFunction::smooth_deadzone(j.at("halfwidth").get<double>(),
                                         j.at("blend").get<double>());
  }
  throw std::invalid_argument("unknown cost type '" + type + "'");
}

json cost_to_json(const CostFunction& c) {
  json j;
  if (c.is_quadratic()) {
    j["type"] = "quadratic";
    j["a"] = c.quad_curvature();
    j["b"] = c.quad_slope();
    j["c"] = c.quad_offset();
  } else {
    j["type"] = "smooth_deadzone";
    j["halfwidth"] = c.deadzone_halfwidth();
    j["blend"] = c.deadzone_blend();
  }
  return j;
}

std::vector<std::optional<double>> bounds_from_json(const json& j, int dim) {
  std::vector<std::optional<double>> out(dim, std::nullopt);
  if (j.is_null()) return out;
  if (static_cast<int>(j.size()) != dim) {
    throw std::invalid_argument("bound array length does not match the cost list");
  }
  for (int l = 0; l < dim; ++l) {
    if (!j[l].is_null()) out[l] = j[l].get<double>();
  }
  return out;
}

SplitSpec split_from_json(const json& j) {
  if (j.is_null()) return SplitSpec::equal_core();
  const std::string strategy = j.at("strategy").get<std::string>();
  if (strategy == "equal_core") return SplitSpec::equal_core();
  if (strategy == "single") return SplitSpec::single(j.at("node").get<int>());
  if (strategy == "custom") {
    std::map<int, double> shares;
    for (const auto& [key, value] : j.at("shares").items()) {
      shares[std::stoi(key)] = value.get<double>();
    }
    return SplitSpec::custom_map(std::move(shares));
  }
  throw std::invalid_argument("unknown split strategy '" + strategy + "'");
}

}  // namespace

ProblemBundle parse_problem_json(const std::string& text) {
  const json root = json::parse(text);
  ProblemBundle bundle;
  bundle.name = root.value("name", "problem");
  Problem& p = bundle.problem;

  for (const auto& ja : root.at("agents")) {
    AgentSpec a;
    a.id = ja.at("id").get<int>();
    for (const auto& jc : ja.at("costs")) a.costs.push_back(cost_from_json(jc));
    a.lower = bounds_from_json(ja.value("lower", json()), a.dim());
    a.upper = bounds_from_json(ja.value("upper", json()), a.dim());
    p.agents.push_back(std::move(a));
  }

  for (const auto& jc : root.at("constraints")) {
    EqualityConstraint c;
    c.rhs = jc.at("b").get<double>();
    for (const auto& [key, row] : jc.at("weights").items()) {
      const int id = std::stoi(key);
      Eigen::RowVectorXd w(row.size());
      for (std::size_t l = 0; l < row.size(); ++l) w(static_cast<int>(l)) = row[l].get<double>();
      c.weights[id] = w;
    }
    p.constraints.push_back(std::move(c));
    if (!jc.value("split", json()).is_null()) {
      // A per-constraint split is stored in the layout options below; only a
      // uniform strategy is supported per file, last one wins.
      bundle.layout.split = split_from_json(jc.at("split"));
    }
  }

  {
    std::vector<int> ids;
    for (const auto& a : p.agents) ids.push_back(a.id);
    std::vector<Graph::Edge> edges;
    for (const auto& je : root.at("graph").at("edges")) {
      Graph::Edge e;
      e.u = je[0].get<int>();
      e.v = je[1].get<int>();
      e.weight = je.size() > 2 ? je[2].get<double>() : 1.0;
      edges.push_back(e);
    }
    p.physical = Graph::from_edges(std::move(ids), edges);
  }

  if (root.contains("clusters") && !root["clusters"].is_null()) {
    for (const auto& jc : root["clusters"]) {
      bundle.layout.explicit_members.push_back(jc.get<std::vector<int>>());
    }
  }

  if (root.contains("gains")) {
    const json& jg = root["gains"];
    if (jg.contains("rho")) {
      if (jg["rho"].is_number()) {
        bundle.gains.default_rho = jg["rho"].get<double>();
      } else {
        for (const auto& [key, value] : jg["rho"].items()) {
          bundle.gains.rho[std::stoi(key)] = value.get<double>();
        }
      }
    }
    if (jg.contains("beta")) {
      if (jg["beta"].is_number()) {
        bundle.gains.default_beta = jg["beta"].get<double>();
      } else {
        bundle.gains.beta = jg["beta"].get<std::vector<double>>();
      }
    }
  }

  if (root.contains("penalty")) {
    const json& jp = root["penalty"];
    bundle.penalty.epsilon = jp.value("epsilon", 1e-3);
    if (jp.contains("gamma") && !jp["gamma"].is_null() && !jp["gamma"].is_string()) {
      bundle.penalty.gamma = jp["gamma"].get<double>();
    }
    bundle.penalty.adjusted_bounds = jp.value("adjusted_bounds", false);
  }

  if (root.contains("integration")) {
    const json& ji = root["integration"];
    bundle.integration.step = ji.value("step", 1e-3);
    bundle.integration.t_end = ji.value("t_end", 60.0);
    bundle.integration.sample_stride = ji.value("sample_stride", 1);
    bundle.integration.stop_tol = ji.value("tol", 1e-6);
  }

  return bundle;
}

ProblemBundle load_problem_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open problem file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_problem_json(buf.str());
}

std::string problem_to_json(const ProblemBundle& bundle) {
  const Problem& p = bundle.problem;
  json root;
  root["name"] = bundle.name;

  json agents = json::array();
  for (const auto& a : p.agents) {
    json ja;
    ja["id"] = a.id;
    json costs = json::array();
    for (const auto& c : a.costs) costs.push_back(cost_to_json(c));
    ja["costs"] = costs;
    json lower = json::array();
    json upper = json::array();
    for (int l = 0; l < a.dim(); ++l) {
      lower.push_back(a.lower_bound(l) ? json(*a.lower_bound(l)) : json());
      upper.push_back(a.upper_bound(l) ? json(*a.upper_bound(l)) : json());
    }
    ja["lower"] = lower;
    ja["upper"] = upper;
    agents.push_back(ja);
  }
  root["agents"] = agents;

  json constraints = json::array();
  for (const auto& c : p.constraints) {
    json jc;
    jc["b"] = c.rhs;
    json weights;
    for (const auto& [id, row] : c.weights) {
      json jrow = json::array();
      for (int l = 0; l < row.size(); ++l) jrow.push_back(row(l));
      weights[std::to_string(id)] = jrow;
    }
    jc["weights"] = weights;
    constraints.push_back(jc);
  }
  root["constraints"] = constraints;

  json edges = json::array();
  const auto& ids = p.physical.node_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const double w = p.physical.adjacency()(static_cast<int>(i), static_cast<int>(j));
      if (w > 0.0) edges.push_back(json::array({ids[i], ids[j], w}));
    }
  }
  root["graph"] = {{"edges", edges}};

  return root.dump(2);
}

TopologySchedule parse_schedule_json(const std::string& text, const Problem& p,
                                     const SplitSpec& split) {
  const json root = json::parse(text);
  TopologySchedule schedule;
  for (const auto& js : root.at("switches")) {
    TopologySchedule::Epoch epoch;
    epoch.t_switch = js.at("t").get<double>();
    const json& jclusters = js.at("clusters");
    if (static_cast<int>(jclusters.size()) != p.num_constraints()) {
      throw std::invalid_argument("schedule entry must list one cluster per constraint");
    }
    for (int k = 0; k < p.num_constraints(); ++k) {
      const json& jc = jclusters[k];
      ClusterLayout layout;
      layout.constraint = k;
      layout.members = jc.at("members").get<std::vector<int>>();
      std::sort(layout.members.begin(), layout.members.end());
      const std::vector<int> core = p.core_set(k);
      for (int id : core) {
        if (layout.slot_of(id) < 0) {
          throw std::invalid_argument("schedule cluster omits core agent " + std::to_string(id));
        }
      }
      if (jc.contains("edges") && !jc["edges"].is_null()) {
        const int n = layout.size();
        layout.adjacency = Eigen::MatrixXd::Zero(n, n);
        for (const auto& je : jc["edges"]) {
          const int u = layout.slot_of(je[0].get<int>());
          const int v = layout.slot_of(je[1].get<int>());
          if (u < 0 || v < 0) throw std::invalid_argument("schedule edge outside the cluster");
          const double w = je.size() > 2 ? je[2].get<double>() : 1.0;
          layout.adjacency(u, v) = w;
          layout.adjacency(v, u) = w;
        }
      } else {
        layout.adjacency = p.physical.induced(layout.members).adjacency();
      }
      {
        Graph check(layout.members, layout.adjacency);
        if (!is_connected(check)) {
          throw std::invalid_argument("schedule cluster for constraint " + std::to_string(k + 1) +
                                      " is not connected");
        }
      }
      const auto shares = split_b(split, core, layout.members, p.constraints[k].rhs);
      layout.b_share.resize(layout.members.size());
      for (std::size_t s = 0; s < layout.members.size(); ++s) {
        layout.b_share[s] = shares.at(layout.members[s]);
      }
      epoch.layouts.push_back(std::move(layout));
    }
    schedule.epochs.push_back(std::move(epoch));
  }
  return schedule;
}

TopologySchedule load_schedule_file(const std::string& path, const Problem& p,
                                    const SplitSpec& split) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open schedule file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schedule_json(buf.str(), p, split);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& tr, const Problem& p) {
  for (std::size_t e = 1; e < tr.epochs.size(); ++e) {
    for (std::size_t k = 0; k < tr.epochs[e].layouts.size(); ++k) {
      if (tr.epochs[e].layouts[k].members != tr.epochs[0].layouts[k].members) {
        throw std::runtime_error(
            "trajectory CSV requires a fixed member layout across epochs");
      }
    }
  }
  const auto names = tr.epochs[0].space.column_names(p, tr.epochs[0].layouts);
  os << "t";
  for (const auto& n : names) os << "," << n;
  os << "\n";
  for (int s = 0; s < tr.samples(); ++s) {
    os << format_double(tr.times[s]);
    const Eigen::VectorXd& row = tr.states[s];
    for (int i = 0; i < row.size(); ++i) os << "," << format_double(row(i));
    os << "\n";
  }
}

void write_trajectory_csv_file(const std::string& path, const TrajectoryRecord& tr,
                               const Problem& p) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_trajectory_csv(out, tr, p);
}

}  // namespace dra
