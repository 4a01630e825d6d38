#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dra/model.hpp"

namespace dra {

/// User-facing penalty configuration; gamma left empty means "choose it
/// automatically from the multiplier bound".
struct PenaltyConfig {
  double epsilon = 1e-3;
  std::optional<double> gamma;
  bool adjusted_bounds = false;  // tighten boxes by epsilon before penalizing
};

/// Penalty configuration with the weight resolved to a number.
struct ResolvedPenalty {
  double epsilon = 1e-3;
  double gamma = 1.0;
  bool adjusted_bounds = false;
};

/// Smooth one-sided penalty: 0 for y <= 0, y^2/(2 eps) on [0, eps],
/// y - eps/2 beyond. C^1 everywhere.
double p_eps(double y, double eps);
double p_eps_grad(double y, double eps);

/// Penalized cost f(x) + gamma * (sum p_eps(lower - x) + sum p_eps(x - upper))
/// over the agent's bounded subagents. With adjusted_bounds the boxes are
/// tightened to [lower + eps, upper - eps] first.
double penalized_value(const AgentSpec& a, const Eigen::VectorXd& x, const ResolvedPenalty& pen);
Eigen::VectorXd penalized_grad(const AgentSpec& a, const Eigen::VectorXd& x,
                               const ResolvedPenalty& pen);

double penalized_total_value(const Problem& p, const Eigen::VectorXd& x,
                             const ResolvedPenalty& pen);

struct EpsFeasibility {
  bool feasible = false;
  double equality_violation = 0.0;
  double max_box_violation = 0.0;
  std::vector<std::string> violations;
};

/// Membership in the eps-feasible set: equality rows within a scale-relative
/// tolerance of 1e-6 * (1 + |b|_inf), boxes violated by at most eps.
EpsFeasibility eps_feasible(const Eigen::VectorXd& x, const Problem& p, double eps);

struct MultiplierBound {
  enum class Method { single_constraint, licq };
  double value = 0.0;
  Method method = Method::single_constraint;
  double weight_max = 0.0;        // w_bar
  double weight_min_or_omega = 0.0;
  double grad_bound = 0.0;        // max_i grad_inf_bound(i)
};

/// Bound on all box multipliers for the single-constraint allocation problem
/// (p = 1, strictly positive weights, every subagent doubly bounded):
/// (1 + w_max / w_min) * max_i grad_inf_bound(i).
MultiplierBound mu_bound_single(const Problem& p);

/// Minimum of sigma_min over all invertible p x p submatrices of W^T.
/// Enumeration is exhaustive and guarded by `enumeration_limit` candidate
/// subsets.
double omega(const Eigen::MatrixXd& w, std::size_t enumeration_limit = 1000000);

/// Multiplier bound valid under the LICQ: (1 + w_max / omega) * grad bound.
/// The LICQ itself is not verified here.
MultiplierBound mu_bound_licq(const Problem& p);

/// Penalty weight satisfying the strict admissibility condition:
/// (1 + sqrt(N)) * bound * (1 + margin). A single agent degenerates the
/// factor to 1.
double gamma_auto(int num_agents, const MultiplierBound& mb, double margin = 1e-3);

/// Worst-case optimality gap of the eps-exact penalty method: eps*gamma*N.
double gap_bound(double eps, double gamma, int num_agents);

}  // namespace dra
