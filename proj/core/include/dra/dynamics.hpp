#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dra/model.hpp"
#include "dra/penalty.hpp"

namespace dra {

/// Communication layout of one equality constraint: the ordered member set
/// V_k, the adjacency restricted to it, and the split of the constraint's
/// right-hand side across members. Helpers carry a zero share.
struct ClusterLayout {
  int constraint = 0;           // 0-based constraint index
  std::vector<int> members;     // ascending agent ids
  Eigen::MatrixXd adjacency;    // |V_k| x |V_k|
  std::vector<double> b_share;  // aligned with members

  int size() const { return static_cast<int>(members.size()); }
  int slot_of(int agent_id) const;  // -1 when absent
};

struct LayoutOptions {
  bool full_graph = false;  // use the whole physical graph for every cluster
  SplitSpec split;          // defaults to equal_core
  /// Explicit member sets per constraint (validated); empty entries fall
  /// back to connect_cluster on the core.
  std::vector<std::vector<int>> explicit_members;
};

/// Builds one layout per constraint: member set from connect_cluster on the
/// core (or overrides), adjacency induced from the physical graph, shares
/// from split_b.
std::vector<ClusterLayout> make_cluster_layouts(const Problem& p, const LayoutOptions& opts = {});

/// Number of dual-pair variables each agent maintains and communicates,
/// i.e. |{k : agent in V_k}| per agent, ascending by agent id.
std::vector<int> communicated_variable_counts(const Problem& p,
                                              const std::vector<ClusterLayout>& layouts);

/// Fixed flattening of the algorithm state: all y blocks by ascending
/// constraint, then all v blocks, then all agent x blocks by ascending id.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(const Problem& p, const std::vector<ClusterLayout>& layouts);

  int dim() const { return dim_; }
  int num_clusters() const { return static_cast<int>(cluster_sizes_.size()); }
  int cluster_size(int k) const { return cluster_sizes_[k]; }
  int y_offset(int k) const { return y_offsets_[k]; }
  int v_offset(int k) const { return v_offsets_[k]; }
  int x_offset() const { return x_offset_; }
  int x_dim() const { return x_dim_; }

  Eigen::VectorBlock<const Eigen::VectorXd> y(const Eigen::VectorXd& s, int k) const {
    return s.segment(y_offsets_[k], cluster_sizes_[k]);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> v(const Eigen::VectorXd& s, int k) const {
    return s.segment(v_offsets_[k], cluster_sizes_[k]);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> x(const Eigen::VectorXd& s) const {
    return s.segment(x_offset_, x_dim_);
  }
  Eigen::VectorBlock<Eigen::VectorXd> y(Eigen::VectorXd& s, int k) const {
    return s.segment(y_offsets_[k], cluster_sizes_[k]);
  }
  Eigen::VectorBlock<Eigen::VectorXd> v(Eigen::VectorXd& s, int k) const {
    return s.segment(v_offsets_[k], cluster_sizes_[k]);
  }
  Eigen::VectorBlock<Eigen::VectorXd> x(Eigen::VectorXd& s) const {
    return s.segment(x_offset_, x_dim_);
  }

  /// Column labels matching the flattening: y[k][slot], v[k][slot],
  /// x[agent][subagent] (all 1-based, agents by id).
  std::vector<std::string> column_names(const Problem& p,
                                        const std::vector<ClusterLayout>& layouts) const;

 private:
  std::vector<int> cluster_sizes_;
  std::vector<int> y_offsets_;
  std::vector<int> v_offsets_;
  int x_offset_ = 0;
  int x_dim_ = 0;
  int dim_ = 0;
};

struct AlgorithmState {
  double t = 0.0;
  Eigen::VectorXd data;
};

/// Zero-initialised state (the trivially conserving choice for y). Custom
/// initial y blocks must sum to zero per cluster; v and x are free.
AlgorithmState init_state(const Problem& p, const std::vector<ClusterLayout>& layouts,
                          const std::optional<Eigen::VectorXd>& x0 = {},
                          const std::optional<Eigen::VectorXd>& v0 = {},
                          const std::optional<Eigen::VectorXd>& y0 = {});

/// Right-hand side of the distributed saddle-point flow. `pen` selects the
/// penalized cost in the primal equation; with it absent the plain cost is
/// used. Node l of cluster k reads only its own state and the v copies of
/// its in-cluster neighbors.
Eigen::VectorXd distributed_rhs(const StateSpace& space, const Eigen::VectorXd& state,
                                const Problem& p, const std::vector<ClusterLayout>& layouts,
                                const GainConfig& gains,
                                const std::optional<ResolvedPenalty>& pen);

/// Precompiled evaluator used by the integrator; same mathematics as
/// distributed_rhs with the per-call setup hoisted out.
class DistributedSystem {
 public:
  DistributedSystem(const Problem& p, std::vector<ClusterLayout> layouts, GainConfig gains,
                    std::optional<ResolvedPenalty> pen);

  const StateSpace& space() const { return space_; }
  const std::vector<ClusterLayout>& layouts() const { return layouts_; }
  const Problem& problem() const { return *problem_; }
  const GainConfig& gains() const { return gains_; }
  const std::optional<ResolvedPenalty>& penalty() const { return pen_; }
  const Eigen::MatrixXd& stacked_weights() const { return weights_; }
  const Eigen::VectorXd& rhs_vector() const { return b_; }

  void rhs_into(const Eigen::VectorXd& state, Eigen::VectorXd& out) const;
  Eigen::VectorXd rhs(const Eigen::VectorXd& state) const;

 private:
  struct Edge {
    int a, b;
    double weight;
  };
  struct ClusterPlan {
    double beta;
    std::vector<Edge> edges;
    // per slot: stacked offset of the member's x block, its weight row, share
    std::vector<int> member_x_offset;
    std::vector<Eigen::RowVectorXd> weight_rows;
    std::vector<double> shares;
    std::vector<double> member_rho;
  };
  // Flattened per-coordinate cost data for the allocation-free gradient.
  struct CoordCost {
    bool quadratic;
    double a, b;      // quadratic coefficients, or halfwidth/blend
    double lo, hi;    // effective penalty bounds, NaN when absent
    double one_plus_rho;
  };

  double coordinate_gradient(const CoordCost& c, double x) const;

  const Problem* problem_;
  std::vector<ClusterLayout> layouts_;
  GainConfig gains_;
  std::optional<ResolvedPenalty> pen_;
  StateSpace space_;
  std::vector<ClusterPlan> plans_;
  std::vector<CoordCost> coords_;
  mutable std::vector<Eigen::VectorXd> consensus_buf_;
  Eigen::MatrixXd weights_;
  Eigen::VectorXd b_;
};

/// Right-hand side of the centralized augmented-Lagrangian flow:
/// nu' = W x - b,  x' = -grad f~ - W^T nu - rho W^T (W x - b).
/// State layout: [nu; x].
Eigen::VectorXd centralized_rhs(const Eigen::VectorXd& nu, const Eigen::VectorXd& x,
                                const Problem& p, double rho,
                                const std::optional<ResolvedPenalty>& pen);

using FlowRhs = std::function<Eigen::VectorXd(double t, const Eigen::VectorXd&)>;

/// One classical fourth-order Runge-Kutta step.
AlgorithmState rk4_step(const FlowRhs& rhs, const AlgorithmState& s, double h);

/// Piecewise-constant topology: the layout list active from each switch
/// time onward. The first entry must start at t = 0.
struct TopologySchedule {
  struct Epoch {
    double t_switch = 0.0;
    std::vector<ClusterLayout> layouts;
  };
  std::vector<Epoch> epochs;
};

struct TrajectoryEpoch {
  double t_start = 0.0;
  std::vector<ClusterLayout> layouts;
  StateSpace space;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  std::vector<int> epoch_of_sample;
  std::vector<TrajectoryEpoch> epochs;
  std::optional<double> time_to_tolerance;
  bool stop_reached = false;
  bool diverged = false;
  double divergence_time = 0.0;
  std::vector<std::string> notes;

  int samples() const { return static_cast<int>(times.size()); }
  const TrajectoryEpoch& epoch_of(int sample) const { return epochs[epoch_of_sample[sample]]; }
};

struct IntegrateOptions {
  double step = 1e-3;
  double t_end = 60.0;
  int sample_stride = 1;      // record every n-th step (plus t=0 and the end)
  double stop_tol = 1e-6;     // 0 disables the stop criterion
  bool halt_on_stop = true;   // otherwise only time_to_tolerance is recorded
};

/// Fixed-step RK4 integration of the distributed flow, with optional
/// topology switching. Switch times are snapped to the step grid (noted in
/// the record); on a switch, y and v values carry over by agent id, agents
/// entering a cluster start at zero, and agents leaving drop their slot.
/// The stop criterion is the one from diagnostics: equality violation,
/// per-cluster consensus error, and primal velocity all below stop_tol.
TrajectoryRecord integrate(const Problem& p, const std::vector<ClusterLayout>& layouts,
                           const GainConfig& gains, const std::optional<ResolvedPenalty>& pen,
                           const AlgorithmState& s0, const IntegrateOptions& opts,
                           const std::optional<TopologySchedule>& schedule = {});

/// Generic fixed-step RK4 driver for plain vector flows (used by the
/// centralized solver and in tests).
struct FlowTrace {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;
  bool stopped_early = false;
};
FlowTrace integrate_flow(const FlowRhs& rhs, const Eigen::VectorXd& y0, double h, double t_end,
                         int sample_stride = 1,
                         const std::function<bool(double, const Eigen::VectorXd&)>& stop = {});

}  // namespace dra
