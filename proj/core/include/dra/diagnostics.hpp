#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dra/dynamics.hpp"
#include "dra/oracle.hpp"

namespace dra {

/// Summary of one run, serialised into report.json by the scenario runner.
struct ConvergenceReport {
  std::optional<double> time_to_tolerance;
  bool converged = false;
  double final_equality_violation = 0.0;
  double final_consensus_error = 0.0;
  double final_stationarity = 0.0;  // ||x'||_inf at the last sample
  std::optional<double> fitted_rate;
  std::optional<double> fitted_r2;
  std::vector<double> conservation_drift_per_cluster;
  std::vector<std::string> notes;
};

/// max_t |sum_l y_k^l(t) - sum_l y_k^l(t_epoch_start)| per cluster. Epoch
/// boundaries reset the baseline because membership changes rebase the sum.
std::vector<double> conservation_drift(const TrajectoryRecord& tr);

/// max_t |centered-difference d/dt sum_l v_k^l - ([W]_k x(t) - b_k)| per
/// cluster; endpoints and epoch boundaries are excluded. Requires at least
/// three uniformly spaced samples.
std::vector<double> aggregate_dual_identity(const TrajectoryRecord& tr, const Problem& p);

/// disagreement(v_k) at every sample, one series per cluster.
std::vector<std::vector<double>> consensus_error(const TrajectoryRecord& tr);

struct EquilibriumResidual {
  double rhs_norm = 0.0;            // ||f(s)||_inf, fixed-point residual
  double consensus = 0.0;           // max_k disagreement(v_k)
  double stationarity = 0.0;        // ||grad f~ + sum_k w_k^T theta_k||_inf
  double y_mismatch = 0.0;          // max | y - ([w]x - b_share) | after mean removal
};

/// Structured distance of a state from the equilibrium set: the fixed-point
/// residual plus the individual equilibrium conditions, with theta_k taken
/// as the mean of the v_k block.
EquilibriumResidual equilibrium_residual(const AlgorithmState& s, const Problem& p,
                                         const std::vector<ClusterLayout>& layouts,
                                         const GainConfig& gains,
                                         const std::optional<ResolvedPenalty>& pen);

struct RateFit {
  bool available = false;
  double rate = 0.0;  // slope of log ||x - x*||; negative when decaying
  double r2 = 0.0;
  int points = 0;
  std::string reason;  // set when unavailable
};

/// Least-squares line through (t, log ||x(t) - x_ref||) over the window
/// where the error is inside [max(floor, 1e-8), 0.5 * initial error] and t
/// is past the first tenth of the horizon.
RateFit rate_fit(const TrajectoryRecord& tr, const Eigen::VectorXd& x_ref);

/// Assembles the standard report from a finished run.
ConvergenceReport summarize(const TrajectoryRecord& tr, const Problem& p,
                            const GainConfig& gains, const std::optional<ResolvedPenalty>& pen,
                            const std::optional<Eigen::VectorXd>& x_ref = {});

}  // namespace dra
