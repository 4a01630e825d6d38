#include "dra/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dra/graph.hpp"

namespace dra {

int ClusterLayout::slot_of(int agent_id) const {
  auto it = std::lower_bound(members.begin(), members.end(), agent_id);
  if (it == members.end() || *it != agent_id) return -1;
  return static_cast<int>(it - members.begin());
}

std::vector<ClusterLayout> make_cluster_layouts(const Problem& p, const LayoutOptions& opts) {
  std::vector<ClusterLayout> layouts;
  for (int k = 0; k < p.num_constraints(); ++k) {
    ClusterLayout layout;
    layout.constraint = k;

    const std::vector<int> core = p.core_set(k);
    if (core.empty()) {
      throw std::invalid_argument("constraint " + std::to_string(k + 1) +
                                  " has no agents with nonzero weights");
    }
    if (opts.full_graph) {
      layout.members = p.physical.node_ids();
    } else if (k < static_cast<int>(opts.explicit_members.size()) &&
               !opts.explicit_members[k].empty()) {
      layout.members = opts.explicit_members[k];
      std::sort(layout.members.begin(), layout.members.end());
      for (int id : core) {
        if (layout.slot_of(id) < 0) {
          throw std::invalid_argument("explicit cluster for constraint " + std::to_string(k + 1) +
                                      " omits core agent " + std::to_string(id));
        }
      }
    } else {
      layout.members = connect_cluster(p.physical, core);
    }

    const Graph sub = p.physical.induced(layout.members);
    if (!is_connected(sub)) {
      throw std::invalid_argument("cluster for constraint " + std::to_string(k + 1) +
                                  " induces a disconnected subgraph");
    }
    layout.adjacency = sub.adjacency();

    const auto shares = split_b(opts.split, core, layout.members, p.constraints[k].rhs);
    layout.b_share.resize(layout.members.size());
    for (std::size_t s = 0; s < layout.members.size(); ++s) {
      layout.b_share[s] = shares.at(layout.members[s]);
    }
    layouts.push_back(std::move(layout));
  }
  return layouts;
}

std::vector<int> communicated_variable_counts(const Problem& p,
                                              const std::vector<ClusterLayout>& layouts) {
  std::vector<int> counts(p.num_agents(), 0);
  for (int i = 0; i < p.num_agents(); ++i) {
    for (const auto& layout : layouts) {
      if (layout.slot_of(p.agents[i].id) >= 0) ++counts[i];
    }
  }
  return counts;
}

StateSpace::StateSpace(const Problem& p, const std::vector<ClusterLayout>& layouts) {
  int off = 0;
  for (const auto& layout : layouts) {
    cluster_sizes_.push_back(layout.size());
    y_offsets_.push_back(off);
    off += layout.size();
  }
  for (std::size_t k = 0; k < layouts.size(); ++k) {
    v_offsets_.push_back(off);
    off += layouts[k].size();
  }
  x_offset_ = off;
  x_dim_ = p.total_dim();
  dim_ = off + x_dim_;
}

std::vector<std::string> StateSpace::column_names(const Problem& p,
                                                  const std::vector<ClusterLayout>& layouts) const {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < layouts.size(); ++k) {
    for (int s = 0; s < layouts[k].size(); ++s) {
      names.push_back("y[" + std::to_string(k + 1) + "][" + std::to_string(s + 1) + "]");
    }
  }
  for (std::size_t k = 0; k < layouts.size(); ++k) {
    for (int s = 0; s < layouts[k].size(); ++s) {
      names.push_back("v[" + std::to_string(k + 1) + "][" + std::to_string(s + 1) + "]");
    }
  }
  for (const auto& a : p.agents) {
    for (int l = 0; l < a.dim(); ++l) {
      names.push_back("x[" + std::to_string(a.id) + "][" + std::to_string(l + 1) + "]");
    }
  }
  return names;
}

AlgorithmState init_state(const Problem& p, const std::vector<ClusterLayout>& layouts,
                          const std::optional<Eigen::VectorXd>& x0,
                          const std::optional<Eigen::VectorXd>& v0,
                          const std::optional<Eigen::VectorXd>& y0) {
  const StateSpace space(p, layouts);
  AlgorithmState s;
  s.t = 0.0;
  s.data = Eigen::VectorXd::Zero(space.dim());

  if (x0) {
    if (x0->size() != space.x_dim()) throw std::invalid_argument("x0 dimension mismatch");
    space.x(s.data) = *x0;
  }
  const int dual_dim = space.x_offset() / 2;  // y blocks and v blocks are equally sized
  if (v0) {
    if (v0->size() != dual_dim) throw std::invalid_argument("v0 dimension mismatch");
    if (dual_dim > 0) s.data.segment(dual_dim, dual_dim) = *v0;
  }
  if (y0) {
    if (y0->size() != dual_dim) throw std::invalid_argument("y0 dimension mismatch");
    if (dual_dim > 0) s.data.segment(0, dual_dim) = *y0;
    for (int k = 0; k < space.num_clusters(); ++k) {
      const double total = space.y(s.data, k).sum();
      if (std::abs(total) > 1e-12 * (1.0 + y0->cwiseAbs().maxCoeff())) {
        throw std::invalid_argument(
            "initial y block of cluster " + std::to_string(k + 1) +
            " must sum to zero (conservation makes a nonzero sum permanent)");
      }
    }
  }
  return s;
}

DistributedSystem::DistributedSystem(const Problem& p, std::vector<ClusterLayout> layouts,
                                     GainConfig gains, std::optional<ResolvedPenalty> pen)
    : problem_(&p),
      layouts_(std::move(layouts)),
      gains_(std::move(gains)),
      pen_(std::move(pen)),
      space_(p, layouts_),
      weights_(p.stacked_weights()),
      b_(p.rhs_vector()) {
  for (const auto& layout : layouts_) {
    ClusterPlan plan;
    plan.beta = gains_.beta_of(layout.constraint);
    for (int a = 0; a < layout.size(); ++a) {
      for (int b = a + 1; b < layout.size(); ++b) {
        if (layout.adjacency(a, b) > 0.0) plan.edges.push_back({a, b, layout.adjacency(a, b)});
      }
    }
    for (int s = 0; s < layout.size(); ++s) {
      const int id = layout.members[s];
      plan.member_x_offset.push_back(p.agent_offset(id));
      plan.weight_rows.push_back(p.weight_row(layout.constraint, id));
      plan.shares.push_back(layout.b_share[s]);
      plan.member_rho.push_back(gains_.rho_of(id));
    }
    consensus_buf_.emplace_back(Eigen::VectorXd::Zero(layout.size()));
    plans_.push_back(std::move(plan));
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& a : p.agents) {
    const double one_plus_rho = 1.0 + gains_.rho_of(a.id);
    for (int l = 0; l < a.dim(); ++l) {
      CoordCost c;
      c.quadratic = a.costs[l].is_quadratic();
      if (c.quadratic) {
        c.a = a.costs[l].quad_curvature();
        c.b = a.costs[l].quad_slope();
      } else {
        c.a = a.costs[l].deadzone_halfwidth();
        c.b = a.costs[l].deadzone_blend();
      }
      c.lo = nan;
      c.hi = nan;
      if (pen_) {
        if (auto lo = a.lower_bound(l)) c.lo = pen_->adjusted_bounds ? *lo + pen_->epsilon : *lo;
        if (auto hi = a.upper_bound(l)) c.hi = pen_->adjusted_bounds ? *hi - pen_->epsilon : *hi;
      }
      c.one_plus_rho = one_plus_rho;
      coords_.push_back(c);
    }
  }
}

double DistributedSystem::coordinate_gradient(const CoordCost& c, double x) const {
  double g;
  if (c.quadratic) {
    g = 2.0 * c.a * x + c.b;
  } else {
    const double m = std::abs(x);
    double d = 0.0;
    if (m > c.a + c.b) {
      d = 1.0;
    } else if (m > c.a) {
      d = (m - c.a) / c.b;
    }
    g = x < 0.0 ? -d : d;
  }
  if (pen_) {
    const double eps = pen_->epsilon;
    const double gamma = pen_->gamma;
    if (!std::isnan(c.lo)) {
      const double y = c.lo - x;
      if (y > 0.0) g -= gamma * (y <= eps ? y / eps : 1.0);
    }
    if (!std::isnan(c.hi)) {
      const double y = x - c.hi;
      if (y > 0.0) g += gamma * (y <= eps ? y / eps : 1.0);
    }
  }
  return g;
}

void DistributedSystem::rhs_into(const Eigen::VectorXd& state, Eigen::VectorXd& out) const {
  out.resize(space_.dim());

  const double* x_all = state.data() + space_.x_offset();
  double* xdot = out.data() + space_.x_offset();

  // Primal blocks: gradient term first, constraint terms folded in while the
  // clusters are visited.
  for (int i = 0; i < space_.x_dim(); ++i) {
    const CoordCost& c = coords_[i];
    xdot[i] = -c.one_plus_rho * coordinate_gradient(c, x_all[i]);
  }

  for (int k = 0; k < static_cast<int>(plans_.size()); ++k) {
    const ClusterPlan& plan = plans_[k];
    const int nk = static_cast<int>(plan.shares.size());
    const double* vk = state.data() + space_.v_offset(k);
    const double* yk = state.data() + space_.y_offset(k);
    double* ydot = out.data() + space_.y_offset(k);
    double* vdot = out.data() + space_.v_offset(k);

    // Laplacian coupling accumulated edgewise so cluster sums of y' cancel
    // exactly up to rounding.
    Eigen::VectorXd& consensus = consensus_buf_[k];
    consensus.setZero();
    for (const Edge& e : plan.edges) {
      const double flow = e.weight * (vk[e.a] - vk[e.b]);
      consensus(e.a) += flow;
      consensus(e.b) -= flow;
    }

    for (int s = 0; s < nk; ++s) {
      const Eigen::RowVectorXd& row = plan.weight_rows[s];
      const int xoff = plan.member_x_offset[s];
      const int width = static_cast<int>(row.size());
      double local = 0.0;
      for (int c = 0; c < width; ++c) local += row(c) * x_all[xoff + c];
      const double mismatch = local - plan.shares[s];
      ydot[s] = plan.beta * consensus(s);
      vdot[s] = mismatch - plan.beta * consensus(s) - yk[s];

      // Constraint terms of the member's primal equation; helpers carry a
      // zero row and leave the primal untouched.
      const double rho = plan.member_rho[s];
      const double scale = -rho * mismatch + rho * yk[s] - (1.0 + rho) * vk[s];
      for (int c = 0; c < width; ++c) xdot[xoff + c] += scale * row(c);
    }
  }
}

Eigen::VectorXd DistributedSystem::rhs(const Eigen::VectorXd& state) const {
  Eigen::VectorXd out;
  rhs_into(state, out);
  return out;
}

Eigen::VectorXd distributed_rhs(const StateSpace& space, const Eigen::VectorXd& state,
                                const Problem& p, const std::vector<ClusterLayout>& layouts,
                                const GainConfig& gains,
                                const std::optional<ResolvedPenalty>& pen) {
  if (state.size() != space.dim()) throw std::invalid_argument("state dimension mismatch");
  DistributedSystem system(p, layouts, gains, pen);
  return system.rhs(state);
}

Eigen::VectorXd centralized_rhs(const Eigen::VectorXd& nu, const Eigen::VectorXd& x,
                                const Problem& p, double rho,
                                const std::optional<ResolvedPenalty>& pen) {
  const int m = p.total_dim();
  const int pc = p.num_constraints();
  if (x.size() != m || nu.size() != pc) throw std::invalid_argument("dimension mismatch");

  Eigen::VectorXd out(pc + m);
  Eigen::VectorXd grad(m);
  int off = 0;
  for (const auto& a : p.agents) {
    const Eigen::VectorXd xa = x.segment(off, a.dim());
    grad.segment(off, a.dim()) = pen ? penalized_grad(a, xa, *pen) : cost_grad(a, xa);
    off += a.dim();
  }

  if (pc > 0) {
    const Eigen::MatrixXd w = p.stacked_weights();
    const Eigen::VectorXd violation = w * x - p.rhs_vector();
    out.head(pc) = violation;
    out.tail(m) = -grad - w.transpose() * nu - rho * (w.transpose() * violation);
  } else {
    out.tail(m) = -grad;
  }
  return out;
}

AlgorithmState rk4_step(const FlowRhs& rhs, const AlgorithmState& s, double h) {
  if (h <= 0.0) throw std::invalid_argument("step size must be positive");
  const Eigen::VectorXd k1 = rhs(s.t, s.data);
  const Eigen::VectorXd k2 = rhs(s.t + h / 2.0, s.data + (h / 2.0) * k1);
  const Eigen::VectorXd k3 = rhs(s.t + h / 2.0, s.data + (h / 2.0) * k2);
  const Eigen::VectorXd k4 = rhs(s.t + h, s.data + h * k3);
  AlgorithmState out;
  out.t = s.t + h;
  out.data = s.data + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return out;
}

namespace {

// In-place RK4 with preallocated stages.
class Rk4Scratch {
 public:
  explicit Rk4Scratch(int dim) : k1_(dim), k2_(dim), k3_(dim), k4_(dim), tmp_(dim) {}

  void step(const DistributedSystem& system, Eigen::VectorXd& state, double h) {
    system.rhs_into(state, k1_);
    tmp_ = state + (h / 2.0) * k1_;
    system.rhs_into(tmp_, k2_);
    tmp_ = state + (h / 2.0) * k2_;
    system.rhs_into(tmp_, k3_);
    tmp_ = state + h * k3_;
    system.rhs_into(tmp_, k4_);
    state += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }

  const Eigen::VectorXd& last_k1() const { return k1_; }

 private:
  Eigen::VectorXd k1_, k2_, k3_, k4_, tmp_;
};

struct StopCheck {
  bool met = false;
  double equality = 0.0;
  double consensus = 0.0;
  double xdot = 0.0;
};

StopCheck evaluate_stop(const DistributedSystem& system, const Eigen::VectorXd& state,
                        double tol) {
  StopCheck c;
  const StateSpace& space = system.space();
  const Problem& p = system.problem();

  const Eigen::VectorXd x = space.x(state);
  if (p.num_constraints() > 0) {
    const Eigen::VectorXd res = system.stacked_weights() * x - system.rhs_vector();
    c.equality = res.cwiseAbs().maxCoeff();
  }
  for (int k = 0; k < space.num_clusters(); ++k) {
    c.consensus = std::max(c.consensus, disagreement(space.v(state, k)));
  }
  const Eigen::VectorXd deriv = system.rhs(state);
  c.xdot = space.x(deriv).cwiseAbs().maxCoeff();
  c.met = c.equality <= tol && c.consensus <= tol && c.xdot <= tol;
  return c;
}

// Carries y/v values across a layout switch by agent id; x is untouched.
Eigen::VectorXd remap_state(const StateSpace& old_space,
                            const std::vector<ClusterLayout>& old_layouts,
                            const Eigen::VectorXd& old_state, const StateSpace& new_space,
                            const std::vector<ClusterLayout>& new_layouts) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(new_space.dim());
  for (std::size_t k = 0; k < new_layouts.size(); ++k) {
    const auto& nl = new_layouts[k];
    const auto& ol = old_layouts[k];
    auto ny = new_space.y(out, static_cast<int>(k));
    auto nv = new_space.v(out, static_cast<int>(k));
    for (int s = 0; s < nl.size(); ++s) {
      const int old_slot = ol.slot_of(nl.members[s]);
      if (old_slot >= 0) {
        ny(s) = old_space.y(old_state, static_cast<int>(k))(old_slot);
        nv(s) = old_space.v(old_state, static_cast<int>(k))(old_slot);
      }
    }
  }
  new_space.x(out) = old_space.x(old_state);
  return out;
}

}  // namespace

TrajectoryRecord integrate(const Problem& p, const std::vector<ClusterLayout>& layouts,
                           const GainConfig& gains, const std::optional<ResolvedPenalty>& pen,
                           const AlgorithmState& s0, const IntegrateOptions& opts,
                           const std::optional<TopologySchedule>& schedule) {
  if (opts.step <= 0.0) throw std::invalid_argument("step size must be positive");
  if (opts.sample_stride < 1) throw std::invalid_argument("sample stride must be >= 1");

  TrajectoryRecord rec;

  // Epoch plan: switch times snapped onto the step grid.
  struct EpochPlan {
    long step_index;
    std::vector<ClusterLayout> layouts;
  };
  std::vector<EpochPlan> plan;
  if (schedule && !schedule->epochs.empty()) {
    if (schedule->epochs.front().t_switch != 0.0) {
      throw std::invalid_argument("topology schedule must start at t = 0");
    }
    double prev = -1.0;
    for (const auto& e : schedule->epochs) {
      if (e.t_switch <= prev) {
        throw std::invalid_argument("topology switch times must be strictly increasing");
      }
      prev = e.t_switch;
      const long idx = std::lround(e.t_switch / opts.step);
      if (std::abs(idx * opts.step - e.t_switch) > 1e-9 * (1.0 + std::abs(e.t_switch))) {
        std::ostringstream os;
        os << "switch time " << e.t_switch << " snapped to step grid at " << idx * opts.step;
        rec.notes.push_back(os.str());
      }
      plan.push_back({idx, e.layouts});
    }
  } else {
    plan.push_back({0, layouts});
  }

  const long total_steps = std::lround(opts.t_end / opts.step);

  auto make_system = [&](const std::vector<ClusterLayout>& ls) {
    return DistributedSystem(p, ls, gains, pen);
  };

  std::size_t epoch_idx = 0;
  DistributedSystem system = make_system(plan[0].layouts);
  rec.epochs.push_back({0.0, plan[0].layouts, system.space()});

  Eigen::VectorXd state = s0.data;
  if (state.size() != system.space().dim()) {
    throw std::invalid_argument("initial state does not match the first layout");
  }

  Rk4Scratch scratch(system.space().dim());

  auto record_sample = [&](double t) {
    rec.times.push_back(t);
    rec.states.push_back(state);
    rec.epoch_of_sample.push_back(static_cast<int>(rec.epochs.size()) - 1);
  };

  record_sample(0.0);
  if (opts.stop_tol > 0.0) {
    const StopCheck c0 = evaluate_stop(system, state, opts.stop_tol);
    if (c0.met) {
      rec.time_to_tolerance = 0.0;
      rec.stop_reached = true;
      if (opts.halt_on_stop) return rec;
    }
  }

  for (long step = 0; step < total_steps; ++step) {
    // Activate a scheduled layout change at this grid point.
    if (epoch_idx + 1 < plan.size() && plan[epoch_idx + 1].step_index == step) {
      ++epoch_idx;
      DistributedSystem next = make_system(plan[epoch_idx].layouts);
      state = remap_state(system.space(), rec.epochs.back().layouts, state, next.space(),
                          plan[epoch_idx].layouts);
      system = std::move(next);
      rec.epochs.push_back({step * opts.step, plan[epoch_idx].layouts, system.space()});
      scratch = Rk4Scratch(system.space().dim());
    }

    scratch.step(system, state, opts.step);
    const double t = (step + 1) * opts.step;

    if (!state.allFinite()) {
      rec.diverged = true;
      rec.divergence_time = t;
      rec.notes.push_back("non-finite state at t = " + std::to_string(t));
      record_sample(t);
      return rec;
    }

    const bool is_sample = ((step + 1) % opts.sample_stride == 0) || (step + 1 == total_steps);
    if (is_sample) {
      record_sample(t);
      if (opts.stop_tol > 0.0 && (!rec.time_to_tolerance || opts.halt_on_stop)) {
        const StopCheck c = evaluate_stop(system, state, opts.stop_tol);
        if (c.met) {
          if (!rec.time_to_tolerance) rec.time_to_tolerance = t;
          rec.stop_reached = true;
          if (opts.halt_on_stop) return rec;
        }
      }
    }
  }
  return rec;
}

FlowTrace integrate_flow(const FlowRhs& rhs, const Eigen::VectorXd& y0, double h, double t_end,
                         int sample_stride,
                         const std::function<bool(double, const Eigen::VectorXd&)>& stop) {
  if (h <= 0.0) throw std::invalid_argument("step size must be positive");
  FlowTrace trace;
  AlgorithmState s{0.0, y0};
  trace.times.push_back(0.0);
  trace.states.push_back(y0);
  const long total = std::lround(t_end / h);
  for (long i = 0; i < total; ++i) {
    s = rk4_step(rhs, s, h);
    if (!s.data.allFinite()) {
      throw std::runtime_error("flow diverged at t = " + std::to_string(s.t));
    }
    if ((i + 1) % sample_stride == 0 || i + 1 == total) {
      trace.times.push_back(s.t);
      trace.states.push_back(s.data);
      if (stop && stop(s.t, s.data)) {
        trace.stopped_early = true;
        break;
      }
    }
  }
  return trace;
}

}  // namespace dra
