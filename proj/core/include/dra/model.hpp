#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dra/cost.hpp"
#include "dra/graph.hpp"

namespace dra {

/// A clustered agent: one scalar cost per subagent plus optional per-subagent
/// box bounds. Empty bound vectors mean "no bound anywhere".
struct AgentSpec {
  int id = 0;
  std::vector<CostFunction> costs;
  std::vector<std::optional<double>> lower;
  std::vector<std::optional<double>> upper;

  int dim() const { return static_cast<int>(costs.size()); }
  std::optional<double> lower_bound(int l) const {
    return l < static_cast<int>(lower.size()) ? lower[l] : std::nullopt;
  }
  std::optional<double> upper_bound(int l) const {
    return l < static_cast<int>(upper.size()) ? upper[l] : std::nullopt;
  }
  bool fully_boxed() const;
  bool has_any_bound() const;
};

/// One affine equality row: sum_i weights[i] . x^i = rhs. Agents absent from
/// the map have a zero weight row.
struct EqualityConstraint {
  std::map<int, Eigen::RowVectorXd> weights;
  double rhs = 0.0;
};

struct Problem {
  std::vector<AgentSpec> agents;  // ascending id
  std::vector<EqualityConstraint> constraints;
  Graph physical;

  int num_agents() const { return static_cast<int>(agents.size()); }
  int num_constraints() const { return static_cast<int>(constraints.size()); }
  int total_dim() const;

  const AgentSpec& agent(int id) const;
  int agent_index(int id) const;
  /// Offset of agent `id`'s block in the stacked decision vector.
  int agent_offset(int id) const;

  Eigen::MatrixXd stacked_weights() const;  // p x m
  Eigen::VectorXd rhs_vector() const;       // p

  /// Weight row of `agent_id` in constraint k (zero row when not involved).
  Eigen::RowVectorXd weight_row(int k, int agent_id) const;

  /// C_k: ids of agents with a nonzero weight row in constraint k.
  std::vector<int> core_set(int k) const;

  bool all_costs_quadratic() const;
  double cost_value(const Eigen::VectorXd& x) const;       // full stacked x
  Eigen::VectorXd cost_gradient(const Eigen::VectorXd& x) const;
};

/// Per-agent damping gains and per-constraint consensus gains.
struct GainConfig {
  std::map<int, double> rho;  // missing agents use default_rho
  std::vector<double> beta;   // missing entries use default_beta
  double default_rho = 1.0;
  double default_beta = 1.0;

  double rho_of(int agent_id) const;
  double beta_of(int k) const;
  static GainConfig uniform(double rho_value, double beta_value);
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> issues;          // hard failures
  std::vector<std::string> notes;           // informational findings
  int rank = 0;                             // numerical rank of W
  double smallest_singular_value = 0.0;
  bool graph_connected = false;
  bool bounds_ordered = true;
  std::vector<std::vector<int>> core_sets;  // C_k per constraint
  bool equality_feasible = false;           // least-squares residual check
  double equality_residual = 0.0;
  std::string box_feasibility;              // "verified" / "not verified" / reason
};

/// Checks the standing assumptions: full row rank of the stacked weight
/// matrix (tolerance 1e-10 * sigma_max), graph connectivity, bound ordering,
/// and least-squares feasibility of the equality system. Box feasibility is
/// left to the oracle on quadratic instances and reported as "not verified"
/// otherwise.
ValidationReport validate(const Problem& p);

/// Throws ValidationError when validate() finds hard failures.
void ensure_valid(const Problem& p);

double cost_value(const AgentSpec& a, const Eigen::VectorXd& x);
Eigen::VectorXd cost_grad(const AgentSpec& a, const Eigen::VectorXd& x);

/// max_l max_{x in [lower_l, upper_l]} |f_l'(x)|; requires every subagent of
/// `a` to carry both bounds.
double grad_inf_bound(const AgentSpec& a);

/// How the right-hand side of a constraint is split across cluster members.
struct SplitSpec {
  enum class Kind { equal_core, single, custom };
  Kind kind = Kind::equal_core;
  int single_node = 0;                 // for Kind::single
  std::map<int, double> custom;        // for Kind::custom
  static SplitSpec equal_core() { return {}; }
  static SplitSpec single(int node);
  static SplitSpec custom_map(std::map<int, double> shares);
};

/// Splits rhs over the cluster so the returned shares sum to rhs exactly
/// (the largest member id absorbs the rounding residual).
std::map<int, double> split_b(const SplitSpec& spec, const std::vector<int>& core,
                              const std::vector<int>& cluster, double rhs);

}  // namespace dra
