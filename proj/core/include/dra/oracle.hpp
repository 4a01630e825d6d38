#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dra/model.hpp"
#include "dra/penalty.hpp"

namespace dra {

/// Certified first-order point: primal minimizer, equality multipliers, and
/// box multipliers (zero on unbounded or inactive coordinates).
struct KKTPoint {
  Eigen::VectorXd x;         // m
  Eigen::VectorXd nu;        // p
  Eigen::VectorXd mu_lower;  // m
  Eigen::VectorXd mu_upper;  // m
  std::vector<int> active_lower;  // stacked coordinate indices
  std::vector<int> active_upper;

  double max_multiplier() const;
};

struct EqualitySolution {
  Eigen::VectorXd x;
  Eigen::VectorXd nu;
};

/// Solves the equality-constrained quadratic program through its linear KKT
/// system [H W^T; W 0] [x; nu] = [-q; b] with H = diag(2 a_l). Boxes are
/// ignored. Throws when the system is singular (strong convexity absent on
/// the constraint null space).
EqualitySolution solve_equality_qp(const Problem& p);

/// Active-set enumeration oracle for boxed quadratic programs: every
/// assignment of bounded coordinates to {free, at lower, at upper} is tried
/// in lexicographic order (free first) and the first assignment passing
/// primal feasibility and dual signs is returned. Strong convexity makes
/// that point unique. Guarded to at most 16 bounded coordinates.
KKTPoint solve_boxed_qp(const Problem& p);

/// Number of active-set assignments passing all KKT acceptance checks;
/// exactly one under strong convexity. Verification helper for that claim.
int count_kkt_assignments(const Problem& p);

struct FlowSolveOptions {
  double t_max = 300.0;
  double tol = 1e-6;
  double step = 0.0;  // 0 chooses a stability-safe step automatically
};

struct FlowSolveResult {
  Eigen::VectorXd x;
  Eigen::VectorXd nu;
  bool converged = false;
  double t_final = 0.0;
  double equality_residual = 0.0;
  double stationarity_residual = 0.0;
};

/// Second oracle: integrates the centralized saddle-point flow (penalized
/// costs when `pen` is set) until the residuals fall below tol or t_max is
/// reached. Works for any convex cost family.
FlowSolveResult centralized_flow_solve(const Problem& p, double rho,
                                       const std::optional<ResolvedPenalty>& pen = {},
                                       const FlowSolveOptions& opts = {});

struct KKTResidual {
  double stationarity = 0.0;      // ||grad f + W^T nu - mu_lo + mu_up||_inf
  double equality = 0.0;          // ||W x - b||_inf
  double complementarity = 0.0;   // max |mu * slack|
  double dual_sign = 0.0;         // max(0, -min mu)
  double primal_box = 0.0;        // max box violation

  bool certified(double tol = 1e-8) const {
    return stationarity <= tol && equality <= tol && complementarity <= tol &&
           dual_sign <= tol && primal_box <= tol;
  }
};

KKTResidual kkt_residual(const KKTPoint& pt, const Problem& p);

struct RecoveredMultipliers {
  Eigen::VectorXd mu_lower;
  Eigen::VectorXd mu_upper;
  bool ok = true;  // false when a recovered multiplier is below -1e-6
};

/// Reads the active sets off x (activity tolerance 1e-6) and recovers the
/// box multipliers from stationarity. Coordinates within tolerance of both
/// bounds are rejected as ambiguous.
RecoveredMultipliers recover_multipliers(const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                                         const Problem& p);

}  // namespace dra
