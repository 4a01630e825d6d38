#include "dra/model.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace dra {

bool AgentSpec::fully_boxed() const {
  for (int l = 0; l < dim(); ++l) {
    if (!lower_bound(l) || !upper_bound(l)) return false;
  }
  return true;
}

bool AgentSpec::has_any_bound() const {
  for (int l = 0; l < dim(); ++l) {
    if (lower_bound(l) || upper_bound(l)) return true;
  }
  return false;
}

int Problem::total_dim() const {
  int m = 0;
  for (const auto& a : agents) m += a.dim();
  return m;
}

const AgentSpec& Problem::agent(int id) const { return agents[agent_index(id)]; }

int Problem::agent_index(int id) const {
  for (int i = 0; i < num_agents(); ++i) {
    if (agents[i].id == id) return i;
  }
  throw std::invalid_argument("unknown agent id " + std::to_string(id));
}

int Problem::agent_offset(int id) const {
  int off = 0;
  for (const auto& a : agents) {
    if (a.id == id) return off;
    off += a.dim();
  }
  throw std::invalid_argument("unknown agent id " + std::to_string(id));
}

Eigen::MatrixXd Problem::stacked_weights() const {
  const int p = num_constraints();
  const int m = total_dim();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(p, m);
  for (int k = 0; k < p; ++k) {
    for (const auto& [id, row] : constraints[k].weights) {
      const auto& a = agent(id);
      if (row.size() != a.dim()) {
        throw std::invalid_argument("constraint weight row length does not match agent " +
                                    std::to_string(id));
      }
      w.block(k, agent_offset(id), 1, a.dim()) = row;
    }
  }
  return w;
}

Eigen::VectorXd Problem::rhs_vector() const {
  Eigen::VectorXd b(num_constraints());
  for (int k = 0; k < num_constraints(); ++k) b(k) = constraints[k].rhs;
  return b;
}

Eigen::RowVectorXd Problem::weight_row(int k, int agent_id) const {
  const auto& a = agent(agent_id);
  auto it = constraints[k].weights.find(agent_id);
  if (it == constraints[k].weights.end()) {
    return Eigen::RowVectorXd::Zero(a.dim());
  }
  return it->second;
}

std::vector<int> Problem::core_set(int k) const {
  std::vector<int> core;
  for (const auto& [id, row] : constraints[k].weights) {
    if (row.size() > 0 && row.cwiseAbs().maxCoeff() > 0.0) core.push_back(id);
  }
  std::sort(core.begin(), core.end());
  return core;
}

bool Problem::all_costs_quadratic() const {
  for (const auto& a : agents) {
    for (const auto& c : a.costs) {
      if (!c.is_quadratic()) return false;
    }
  }
  return true;
}

double Problem::cost_value(const Eigen::VectorXd& x) const {
  if (x.size() != total_dim()) throw std::invalid_argument("stacked dimension mismatch");
  double v = 0.0;
  int off = 0;
  for (const auto& a : agents) {
    for (int l = 0; l < a.dim(); ++l) v += a.costs[l].value(x(off + l));
    off += a.dim();
  }
  return v;
}

Eigen::VectorXd Problem::cost_gradient(const Eigen::VectorXd& x) const {
  if (x.size() != total_dim()) throw std::invalid_argument("stacked dimension mismatch");
  Eigen::VectorXd g(total_dim());
  int off = 0;
  for (const auto& a : agents) {
    for (int l = 0; l < a.dim(); ++l) g(off + l) = a.costs[l].derivative(x(off + l));
    off += a.dim();
  }
  return g;
}

double GainConfig::rho_of(int agent_id) const {
  auto it = rho.find(agent_id);
  return it == rho.end() ? default_rho : it->second;
}

double GainConfig::beta_of(int k) const {
  if (k < 0) throw std::invalid_argument("negative constraint index");
  if (k < static_cast<int>(beta.size())) return beta[k];
  return default_beta;
}

GainConfig GainConfig::uniform(double rho_value, double beta_value) {
  GainConfig g;
  g.default_rho = rho_value;
  g.default_beta = beta_value;
  return g;
}

ValidationReport validate(const Problem& p) {
  ValidationReport r;

  if (p.agents.empty()) {
    r.ok = false;
    r.issues.push_back("problem has no agents");
    return r;
  }
  for (int i = 1; i < p.num_agents(); ++i) {
    if (p.agents[i].id <= p.agents[i - 1].id) {
      r.ok = false;
      r.issues.push_back("agent ids must be strictly increasing");
      return r;
    }
  }

  // Bound ordering.
  for (const auto& a : p.agents) {
    for (int l = 0; l < a.dim(); ++l) {
      const auto lo = a.lower_bound(l);
      const auto hi = a.upper_bound(l);
      if (lo && hi && !(*lo < *hi)) {
        r.bounds_ordered = false;
        std::ostringstream os;
        os << "agent " << a.id << " subagent " << (l + 1) << ": lower bound " << *lo
           << " not strictly below upper bound " << *hi;
        r.issues.push_back(os.str());
      }
    }
  }

  // Graph: one node per agent, connected.
  if (p.physical.size() != p.num_agents()) {
    r.issues.push_back("physical graph must have one node per agent");
  } else {
    for (const auto& a : p.agents) {
      if (!p.physical.has_node(a.id)) {
        r.issues.push_back("physical graph is missing agent " + std::to_string(a.id));
      }
    }
  }
  r.graph_connected = p.physical.size() == p.num_agents() && is_connected(p.physical);
  if (!r.graph_connected) r.issues.push_back("physical graph is not connected");

  const int pcount = p.num_constraints();
  for (int k = 0; k < pcount; ++k) {
    r.core_sets.push_back(p.core_set(k));
    if (r.core_sets.back().empty()) {
      r.issues.push_back("constraint " + std::to_string(k + 1) + " has an all-zero weight row");
    }
  }

  // Row rank of W via singular values.
  if (pcount > 0) {
    const Eigen::MatrixXd w = p.stacked_weights();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sv = svd.singularValues();
    const double tol = 1e-10 * (sv.size() > 0 ? sv(0) : 0.0);
    r.rank = 0;
    for (int i = 0; i < sv.size(); ++i) {
      if (sv(i) > tol) ++r.rank;
    }
    r.smallest_singular_value = sv(sv.size() - 1);
    if (r.rank < pcount) {
      r.issues.push_back("stacked weight matrix is not full row rank (rank " +
                         std::to_string(r.rank) + " of " + std::to_string(pcount) + ")");
    }

    // Least-squares feasibility of the equality system alone.
    const Eigen::VectorXd b = p.rhs_vector();
    const Eigen::VectorXd xls = svd.solve(b);
    r.equality_residual = (w * xls - b).norm();
    r.equality_feasible = r.equality_residual <= 1e-8 * (1.0 + b.norm());
    if (!r.equality_feasible) {
      r.notes.push_back("equality system least-squares residual " +
                        std::to_string(r.equality_residual));
    }
  } else {
    r.rank = 0;
    r.equality_feasible = true;
  }

  bool any_bound = false;
  for (const auto& a : p.agents) any_bound |= a.has_any_bound();
  if (!any_bound) {
    r.box_feasibility = "trivial (no bounds)";
  } else if (p.all_costs_quadratic()) {
    r.box_feasibility = "deferred to the quadratic oracle";
  } else {
    r.box_feasibility = "not verified";
  }

  r.ok = r.issues.empty();
  return r;
}

void ensure_valid(const Problem& p) {
  const ValidationReport r = validate(p);
  if (r.ok) return;
  std::string msg = "problem validation failed:";
  for (const auto& s : r.issues) msg += "\n  - " + s;
  throw ValidationError(msg);
}

double cost_value(const AgentSpec& a, const Eigen::VectorXd& x) {
  if (x.size() != a.dim()) throw std::invalid_argument("agent dimension mismatch");
  double v = 0.0;
  for (int l = 0; l < a.dim(); ++l) v += a.costs[l].value(x(l));
  return v;
}

Eigen::VectorXd cost_grad(const AgentSpec& a, const Eigen::VectorXd& x) {
  if (x.size() != a.dim()) throw std::invalid_argument("agent dimension mismatch");
  Eigen::VectorXd g(a.dim());
  for (int l = 0; l < a.dim(); ++l) g(l) = a.costs[l].derivative(x(l));
  return g;
}

double grad_inf_bound(const AgentSpec& a) {
  double bound = 0.0;
  for (int l = 0; l < a.dim(); ++l) {
    const auto lo = a.lower_bound(l);
    const auto hi = a.upper_bound(l);
    if (!lo || !hi) {
      throw std::invalid_argument("grad_inf_bound requires both bounds on agent " +
                                  std::to_string(a.id) + " subagent " + std::to_string(l + 1));
    }
    bound = std::max(bound, a.costs[l].derivative_bound(*lo, *hi));
  }
  return bound;
}

SplitSpec SplitSpec::single(int node) {
  SplitSpec s;
  s.kind = Kind::single;
  s.single_node = node;
  return s;
}

SplitSpec SplitSpec::custom_map(std::map<int, double> shares) {
  SplitSpec s;
  s.kind = Kind::custom;
  s.custom = std::move(shares);
  return s;
}

std::map<int, double> split_b(const SplitSpec& spec, const std::vector<int>& core,
                              const std::vector<int>& cluster, double rhs) {
  for (int id : core) {
    if (std::find(cluster.begin(), cluster.end(), id) == cluster.end()) {
      throw std::invalid_argument("core member " + std::to_string(id) +
                                  " is outside the cluster");
    }
  }
  std::map<int, double> shares;
  for (int id : cluster) shares[id] = 0.0;

  switch (spec.kind) {
    case SplitSpec::Kind::equal_core: {
      if (core.empty()) throw std::invalid_argument("equal_core split needs a non-empty core");
      const double each = rhs / static_cast<double>(core.size());
      for (int id : core) shares[id] = each;
      break;
    }
    case SplitSpec::Kind::single: {
      if (shares.find(spec.single_node) == shares.end()) {
        throw std::invalid_argument("split target " + std::to_string(spec.single_node) +
                                    " is outside the cluster");
      }
      shares[spec.single_node] = rhs;
      break;
    }
    case SplitSpec::Kind::custom: {
      double total = 0.0;
      for (const auto& [id, v] : spec.custom) {
        if (shares.find(id) == shares.end()) {
          throw std::invalid_argument("custom split references node " + std::to_string(id) +
                                      " outside the cluster");
        }
        shares[id] = v;
        total += v;
      }
      if (std::abs(total - rhs) > 1e-12 * std::abs(rhs)) {
        throw std::invalid_argument("custom split does not sum to the constraint rhs");
      }
      break;
    }
  }

  // The largest member id absorbs the rounding residual so that the shares
  // sum to rhs bit-exactly in ascending accumulation order.
  double partial = 0.0;
  auto last = std::prev(shares.end());
  for (auto it = shares.begin(); it != last; ++it) partial += it->second;
  last->second = rhs - partial;
  return shares;
}

}  // namespace dra
