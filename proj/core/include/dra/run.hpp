#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dra/diagnostics.hpp"
#include "dra/scenario.hpp"

namespace dra {

/// Exit codes shared by the library entry points and the command line tool.
enum ExitCode : int { exit_ok = 0, exit_not_converged = 2, exit_validation = 3 };

struct OracleComparison {
  bool available = false;
  std::string skipped_reason;
  Eigen::VectorXd x;
  Eigen::VectorXd nu;
  double max_coordinate_gap = 0.0;  // ||x_final - x_oracle||_inf
  double cost_gap = 0.0;            // |f(x_oracle) - f(x_final)|
  double max_multiplier = 0.0;
};

struct SolveResult {
  int exit_code = exit_ok;
  ProblemBundle bundle;             // problem with resolved run parameters
  std::vector<ClusterLayout> layouts;
  std::optional<ResolvedPenalty> penalty;
  TrajectoryRecord trajectory;
  ConvergenceReport report;
  OracleComparison oracle;
  std::vector<int> communicated;    // |T^i| per agent
  std::optional<double> phase1_time_to_tolerance;  // two-phase scenarios
  std::string trajectory_path;      // empty when no out dir was given
  std::string report_path;
};

/// Builds the problem (builtin or file), resolves gains and the penalty
/// weight, constructs layouts, integrates, runs diagnostics and the oracle
/// comparison, and writes trajectory.csv + report.json when an output
/// directory is configured.
SolveResult run_solve(const ScenarioConfig& cfg);

struct BoundsReport {
  int exit_code = exit_ok;
  std::optional<MultiplierBound> single;
  std::string single_reason;  // why the single-constraint method is unavailable
  std::optional<MultiplierBound> licq;
  std::string licq_reason;
  std::optional<double> gamma;        // auto value from the tightest bound
  std::optional<double> gap;          // eps * gamma * N
  std::optional<double> oracle_mu_max;
  std::optional<double> ratio;        // bound / oracle mu_max
  bool used_consensus_emulation = false;
  std::string report_path;
};

/// Evaluates the multiplier bounds (both methods when their preconditions
/// hold), the automatic penalty weight, and the optimality-gap bound;
/// optionally cross-checks against the oracle's exact multipliers.
BoundsReport run_bounds(const ScenarioConfig& cfg);

struct OracleRunResult {
  int exit_code = exit_ok;
  KKTPoint point;
  KKTResidual residual;
  std::string report_path;
};

/// Solves the boxed problem exactly and emits the KKT point summary file.
OracleRunResult run_oracle(const ScenarioConfig& cfg);

/// Loads a builtin or file scenario without running anything.
ProblemBundle resolve_problem(const ScenarioConfig& cfg);

/// Applies CLI-style overrides (rho, beta, penalty, integration) on top of
/// the bundle defaults.
void apply_overrides(ProblemBundle& bundle, const ScenarioConfig& cfg);

/// Resolves the penalty weight for a problem with bounds: explicit gamma
/// wins; otherwise gamma_auto from the single-constraint bound when its
/// preconditions hold, else from the LICQ bound, else from the oracle's
/// exact multipliers on quadratic instances.
std::optional<ResolvedPenalty> resolve_penalty(const Problem& p, const PenaltyConfig& cfg);

}  // namespace dra
