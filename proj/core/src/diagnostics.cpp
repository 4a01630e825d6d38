#include "dra/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dra/graph.hpp"

namespace dra {

std::vector<double> conservation_drift(const TrajectoryRecord& tr) {
  if (tr.samples() == 0) throw std::invalid_argument("empty trajectory");
  const int clusters = tr.epochs.front().space.num_clusters();
  std::vector<double> drift(clusters, 0.0);

  std::vector<double> baseline(clusters, 0.0);
  int current_epoch = -1;
  for (int s = 0; s < tr.samples(); ++s) {
    const auto& epoch = tr.epoch_of(s);
    for (int k = 0; k < clusters; ++k) {
      const double sum = epoch.space.y(tr.states[s], k).sum();
      if (tr.epoch_of_sample[s] != current_epoch) {
        baseline[k] = sum;
      } else {
        drift[k] = std::max(drift[k], std::abs(sum - baseline[k]));
      }
    }
    current_epoch = tr.epoch_of_sample[s];
  }
  return drift;
}

std::vector<double> aggregate_dual_identity(const TrajectoryRecord& tr, const Problem& p) {
  if (tr.samples() < 3) throw std::invalid_argument("need at least three samples");
  const double h0 = tr.times[1] - tr.times[0];
  for (int s = 1; s < tr.samples(); ++s) {
    if (std::abs(tr.times[s] - tr.times[s - 1] - h0) > 1e-9 * (1.0 + std::abs(tr.times[s]))) {
      throw std::invalid_argument("aggregate dual identity requires uniform sampling");
    }
  }

  const int clusters = tr.epochs.front().space.num_clusters();
  const Eigen::MatrixXd w = p.stacked_weights();
  const Eigen::VectorXd b = p.rhs_vector();
  std::vector<double> residual(clusters, 0.0);

  for (int s = 1; s + 1 < tr.samples(); ++s) {
    // Skip rows straddling an epoch boundary: the sum rebases there.
    if (tr.epoch_of_sample[s - 1] != tr.epoch_of_sample[s + 1]) continue;
    const auto& space = tr.epoch_of(s).space;
    const Eigen::VectorXd x = space.x(tr.states[s]);
    for (int k = 0; k < clusters; ++k) {
      const double before = space.v(tr.states[s - 1], k).sum();
      const double after = space.v(tr.states[s + 1], k).sum();
      const double fd = (after - before) / (2.0 * h0);
      const double expected = w.row(k).dot(x) - b(k);
      residual[k] = std::max(residual[k], std::abs(fd - expected));
    }
  }
  return residual;
}

std::vector<std::vector<double>> consensus_error(const TrajectoryRecord& tr) {
  const int clusters = tr.epochs.front().space.num_clusters();
  std::vector<std::vector<double>> series(clusters);
  for (int s = 0; s < tr.samples(); ++s) {
    const auto& space = tr.epoch_of(s).space;
    for (int k = 0; k < clusters; ++k) {
      series[k].push_back(disagreement(space.v(tr.states[s], k)));
    }
  }
  return series;
}

EquilibriumResidual equilibrium_residual(const AlgorithmState& s, const Problem& p,
                                         const std::vector<ClusterLayout>& layouts,
                                         const GainConfig& gains,
                                         const std::optional<ResolvedPenalty>& pen) {
  const StateSpace space(p, layouts);
  if (s.data.size() != space.dim()) throw std::invalid_argument("state dimension mismatch");

  EquilibriumResidual r;
  const Eigen::VectorXd deriv = distributed_rhs(space, s.data, p, layouts, gains, pen);
  r.rhs_norm = deriv.cwiseAbs().maxCoeff();

  // Consensus and per-cluster theta.
  Eigen::VectorXd theta(space.num_clusters());
  for (int k = 0; k < space.num_clusters(); ++k) {
    const auto vk = space.v(s.data, k);
    r.consensus = std::max(r.consensus, disagreement(vk));
    theta(k) = vk.mean();
  }

  // Stationarity with the consensus values in place of the multipliers.
  const Eigen::VectorXd x = space.x(s.data);
  Eigen::VectorXd stat(space.x_dim());
  int off = 0;
  for (const auto& a : p.agents) {
    const Eigen::VectorXd xa = x.segment(off, a.dim());
    Eigen::VectorXd g = pen ? penalized_grad(a, xa, *pen) : cost_grad(a, xa);
    for (int k = 0; k < p.num_constraints(); ++k) {
      const Eigen::RowVectorXd row = p.weight_row(k, a.id);
      if (row.cwiseAbs().maxCoeff() > 0.0) g += theta(k) * row.transpose();
    }
    stat.segment(off, a.dim()) = g;
    off += a.dim();
  }
  r.stationarity = stat.cwiseAbs().maxCoeff();

  // y_k = [w]x - b_share, compared after removing the common offset.
  for (int k = 0; k < space.num_clusters(); ++k) {
    const auto& layout = layouts[k];
    const auto yk = space.y(s.data, k);
    Eigen::VectorXd expect(layout.size());
    for (int slot = 0; slot < layout.size(); ++slot) {
      const int id = layout.members[slot];
      const Eigen::RowVectorXd row = p.weight_row(k, id);
      const double local =
          row.size() > 0 ? row.dot(x.segment(p.agent_offset(id), row.size())) : 0.0;
      expect(slot) = local - layout.b_share[slot];
    }
    const Eigen::VectorXd diff = yk - expect;
    const double mean = diff.mean();
    r.y_mismatch = std::max(r.y_mismatch, (diff.array() - mean).abs().maxCoeff());
  }
  return r;
}

RateFit rate_fit(const TrajectoryRecord& tr, const Eigen::VectorXd& x_ref) {
  RateFit fit;
  if (tr.samples() < 4) {
    fit.reason = "too few samples";
    return fit;
  }

  std::vector<double> ts;
  std::vector<double> logs;
  const double t_min = tr.times.front() + 0.1 * (tr.times.back() - tr.times.front());
  double initial = (tr.epoch_of(0).space.x(tr.states[0]) - x_ref).norm();
  if (initial <= 0.0) {
    fit.reason = "initial error is zero";
    return fit;
  }
  const double ceiling = 0.5 * initial;
  const double floor = 1e-8;

  for (int s = 0; s < tr.samples(); ++s) {
    const double err = (tr.epoch_of(s).space.x(tr.states[s]) - x_ref).norm();
    if (tr.times[s] < t_min) continue;
    if (err > ceiling || err < floor) continue;
    ts.push_back(tr.times[s]);
    logs.push_back(std::log(err));
  }
  if (ts.size() < 5) {
    fit.reason = "error never entered the fitting window";
    return fit;
  }

  const int n = static_cast<int>(ts.size());
  double st = 0, sl = 0, stt = 0, stl = 0, sll = 0;
  for (int i = 0; i < n; ++i) {
    st += ts[i];
    sl += logs[i];
    stt += ts[i] * ts[i];
    stl += ts[i] * logs[i];
    sll += logs[i] * logs[i];
  }
  const double denom = n * stt - st * st;
  if (std::abs(denom) < 1e-30) {
    fit.reason = "degenerate time window";
    return fit;
  }
  const double slope = (n * stl - st * sl) / denom;
  const double intercept = (sl - slope * st) / n;

  double ss_res = 0.0, ss_tot = 0.0;
  const double mean_l = sl / n;
  for (int i = 0; i < n; ++i) {
    const double pred = slope * ts[i] + intercept;
    ss_res += (logs[i] - pred) * (logs[i] - pred);
    ss_tot += (logs[i] - mean_l) * (logs[i] - mean_l);
  }
  fit.available = true;
  fit.rate = slope;
  fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.points = n;
  return fit;
}

ConvergenceReport summarize(const TrajectoryRecord& tr, const Problem& p,
                            const GainConfig& gains, const std::optional<ResolvedPenalty>& pen,
                            const std::optional<Eigen::VectorXd>& x_ref) {
  ConvergenceReport rep;
  rep.time_to_tolerance = tr.time_to_tolerance;
  rep.converged = tr.stop_reached;
  rep.conservation_drift_per_cluster = conservation_drift(tr);
  rep.notes = tr.notes;

  const int last = tr.samples() - 1;
  const auto& epoch = tr.epoch_of(last);
  const Eigen::VectorXd x = epoch.space.x(tr.states[last]);
  if (p.num_constraints() > 0) {
    rep.final_equality_violation =
        (p.stacked_weights() * x - p.rhs_vector()).cwiseAbs().maxCoeff();
  }
  for (int k = 0; k < epoch.space.num_clusters(); ++k) {
    rep.final_consensus_error =
        std::max(rep.final_consensus_error, disagreement(epoch.space.v(tr.states[last], k)));
  }
  const Eigen::VectorXd deriv =
      distributed_rhs(epoch.space, tr.states[last], p, epoch.layouts, gains, pen);
  rep.final_stationarity = epoch.space.x(deriv).cwiseAbs().maxCoeff();

  if (x_ref) {
    const RateFit fit = rate_fit(tr, *x_ref);
    if (fit.available) {
      rep.fitted_rate = fit.rate;
      rep.fitted_r2 = fit.r2;
    } else {
      rep.notes.push_back("rate fit unavailable: " + fit.reason);
    }
  }
  return rep;
}

}  // namespace dra
