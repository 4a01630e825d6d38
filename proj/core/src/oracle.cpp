#include "dra/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dra/dynamics.hpp"

namespace dra {

double KKTPoint::max_multiplier() const {
  double m = 0.0;
  if (mu_lower.size() > 0) m = std::max(m, mu_lower.maxCoeff());
  if (mu_upper.size() > 0) m = std::max(m, mu_upper.maxCoeff());
  return m;
}

namespace {

struct QuadData {
  Eigen::VectorXd curvature;  // a_l (so the Hessian is diag(2 a_l))
  Eigen::VectorXd slope;      // b_l
  Eigen::VectorXd lower;      // NaN when absent
  Eigen::VectorXd upper;
};

QuadData gather_quadratic(const Problem& p) {
  const int m = p.total_dim();
  QuadData q{Eigen::VectorXd(m), Eigen::VectorXd(m),
             Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN()),
             Eigen::VectorXd::Constant(m, std::numeric_limits<double>::quiet_NaN())};
  int off = 0;
  for (const auto& a : p.agents) {
    for (int l = 0; l < a.dim(); ++l) {
      if (!a.costs[l].is_quadratic()) {
        throw std::invalid_argument("oracle requires quadratic costs");
      }
      q.curvature(off + l) = a.costs[l].quad_curvature();
      q.slope(off + l) = a.costs[l].quad_slope();
      if (auto lo = a.lower_bound(l)) q.lower(off + l) = *lo;
      if (auto hi = a.upper_bound(l)) q.upper(off + l) = *hi;
    }
    off += a.dim();
  }
  return q;
}

}  // namespace

EqualitySolution solve_equality_qp(const Problem& p) {
  const QuadData q = gather_quadratic(p);
  const int m = p.total_dim();
  const int pc = p.num_constraints();

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(m + pc, m + pc);
  for (int i = 0; i < m; ++i) kkt(i, i) = 2.0 * q.curvature(i);
  Eigen::VectorXd rhs(m + pc);
  rhs.head(m) = -q.slope;
  if (pc > 0) {
    const Eigen::MatrixXd w = p.stacked_weights();
    kkt.block(0, m, m, pc) = w.transpose();
    kkt.block(m, 0, pc, m) = w;
    rhs.tail(pc) = p.rhs_vector();
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  if (!lu.isInvertible()) {
    throw std::runtime_error(
        "equality KKT system is singular; the cost is not strongly convex on the "
        "constraint null space");
  }
  const Eigen::VectorXd sol = lu.solve(rhs);

  EqualitySolution out;
  out.x = sol.head(m);
  out.nu = sol.tail(pc);

  const double scale = 1.0 + rhs.cwiseAbs().maxCoeff();
  if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw std::runtime_error("equality KKT solve residual above tolerance");
  }
  return out;
}

namespace {

enum class Assign : int { free_coord = 0, at_lower = 1, at_upper = 2 };

struct BoxedEnumeration {
  std::optional<KKTPoint> first;
  int accepted = 0;
};

BoxedEnumeration enumerate_boxed(const Problem& p, bool stop_at_first) {
  const QuadData q = gather_quadratic(p);
  const int m = p.total_dim();
  const int pc = p.num_constraints();
  const Eigen::MatrixXd w = pc > 0 ? p.stacked_weights() : Eigen::MatrixXd(0, m);
  const Eigen::VectorXd b = p.rhs_vector();

  std::vector<int> bounded;
  for (int i = 0; i < m; ++i) {
    if (!std::isnan(q.lower(i)) || !std::isnan(q.upper(i))) bounded.push_back(i);
  }
  if (bounded.size() > 16) {
    throw std::runtime_error("active-set enumeration guard: more than 16 bounded coordinates");
  }

  const double accept_tol = 1e-8;
  std::vector<Assign> assign(bounded.size(), Assign::free_coord);
  BoxedEnumeration out;

  auto advance = [&]() -> bool {
    // Mixed-radix increment, least significant digit last, so the order is
    // lexicographic with free < lower < upper per coordinate.
    for (int d = static_cast<int>(assign.size()) - 1; d >= 0; --d) {
      const int coord = bounded[d];
      while (true) {
        int next = static_cast<int>(assign[d]) + 1;
        if (next > 2) break;
        assign[d] = static_cast<Assign>(next);
        if (assign[d] == Assign::at_lower && std::isnan(q.lower(coord))) continue;
        if (assign[d] == Assign::at_upper && std::isnan(q.upper(coord))) continue;
        return true;
      }
      assign[d] = Assign::free_coord;
    }
    return false;
  };

  do {
    // Clamped and free index sets for this assignment.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    std::vector<int> free_idx;
    std::vector<int> clamped_idx;
    free_idx.reserve(m);
    {
      std::vector<char> clamped(m, 0);
      for (std::size_t d = 0; d < bounded.size(); ++d) {
        if (assign[d] == Assign::at_lower) {
          x(bounded[d]) = q.lower(bounded[d]);
          clamped[bounded[d]] = 1;
        } else if (assign[d] == Assign::at_upper) {
          x(bounded[d]) = q.upper(bounded[d]);
          clamped[bounded[d]] = 1;
        }
      }
      for (int i = 0; i < m; ++i) {
        if (clamped[i]) {
          clamped_idx.push_back(i);
        } else {
          free_idx.push_back(i);
        }
      }
    }

    const int nf = static_cast<int>(free_idx.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nf + pc, nf + pc);
    Eigen::VectorXd rhs(nf + pc);
    for (int i = 0; i < nf; ++i) {
      kkt(i, i) = 2.0 * q.curvature(free_idx[i]);
      rhs(i) = -q.slope(free_idx[i]);
    }
    if (pc > 0) {
      Eigen::MatrixXd wf(pc, nf);
      for (int i = 0; i < nf; ++i) wf.col(i) = w.col(free_idx[i]);
      kkt.block(0, nf, nf, pc) = wf.transpose();
      kkt.block(nf, 0, pc, nf) = wf;
      Eigen::VectorXd residual_b = b;
      for (int idx : clamped_idx) residual_b -= w.col(idx) * x(idx);
      rhs.tail(pc) = residual_b;
    }

    Eigen::VectorXd sol = Eigen::VectorXd::Zero(nf + pc);
    if (nf + pc > 0) {
      Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
      if (!lu.isInvertible()) continue;  // degenerate assignment
      sol = lu.solve(rhs);
      if ((kkt * sol - rhs).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + rhs.cwiseAbs().maxCoeff())) {
        continue;
      }
    }
    for (int i = 0; i < nf; ++i) x(free_idx[i]) = sol(i);
    const Eigen::VectorXd nu = pc > 0 ? Eigen::VectorXd(sol.tail(pc)) : Eigen::VectorXd(0);

    // Primal feasibility of the free coordinates.
    bool ok = true;
    for (int i = 0; i < nf && ok; ++i) {
      const int c = free_idx[i];
      if (!std::isnan(q.lower(c)) && x(c) < q.lower(c) - accept_tol) ok = false;
      if (!std::isnan(q.upper(c)) && x(c) > q.upper(c) + accept_tol) ok = false;
    }
    if (!ok) continue;

    // Dual feasibility on the clamped coordinates.
    KKTPoint pt;
    pt.x = x;
    pt.nu = nu;
    pt.mu_lower = Eigen::VectorXd::Zero(m);
    pt.mu_upper = Eigen::VectorXd::Zero(m);
    for (std::size_t d = 0; d < bounded.size() && ok; ++d) {
      const int c = bounded[d];
      if (assign[d] == Assign::free_coord) continue;
      double grad = 2.0 * q.curvature(c) * x(c) + q.slope(c);
      if (pc > 0) grad += w.col(c).dot(nu);
      if (assign[d] == Assign::at_lower) {
        if (grad < -accept_tol) {
          ok = false;
        } else {
          pt.mu_lower(c) = grad;
          pt.active_lower.push_back(c);
        }
      } else {
        if (-grad < -accept_tol) {
          ok = false;
        } else {
          pt.mu_upper(c) = -grad;
          pt.active_upper.push_back(c);
        }
      }
    }
    if (!ok) continue;

    if (!out.first) out.first = pt;
    ++out.accepted;
    if (stop_at_first) return out;
  } while (advance());

  return out;
}

}  // namespace

KKTPoint solve_boxed_qp(const Problem& p) {
  BoxedEnumeration e = enumerate_boxed(p, true);
  if (!e.first) {
    throw std::runtime_error(
        "no active-set assignment satisfies the KKT conditions; the boxed problem "
        "appears infeasible");
  }
  return *e.first;
}

int count_kkt_assignments(const Problem& p) { return enumerate_boxed(p, false).accepted; }

FlowSolveResult centralized_flow_solve(const Problem& p, double rho,
                                       const std::optional<ResolvedPenalty>& pen,
                                       const FlowSolveOptions& opts) {
  const int m = p.total_dim();
  const int pc = p.num_constraints();

  double h = opts.step;
  if (h <= 0.0) {
    // Stability-safe step for classical RK4 on the stiffest local mode.
    double curv = 0.0;
    for (const auto& a : p.agents) {
      for (const auto& c : a.costs) curv = std::max(curv, c.curvature_bound());
    }
    if (pen) curv += pen->gamma / pen->epsilon;
    double coupling = 1.0;
    if (pc > 0) {
      const Eigen::MatrixXd w = p.stacked_weights();
      coupling += (1.0 + rho) * w.squaredNorm();
    }
    h = std::min(1e-3, 2.0 / (curv + coupling));
  }

  const Eigen::MatrixXd w = pc > 0 ? p.stacked_weights() : Eigen::MatrixXd(0, m);
  const Eigen::VectorXd b = p.rhs_vector();

  auto rhs = [&](double, const Eigen::VectorXd& s) {
    return centralized_rhs(s.head(pc), s.tail(m), p, rho, pen);
  };
  auto stop = [&](double, const Eigen::VectorXd& s) {
    const Eigen::VectorXd d = rhs(0.0, s);
    const double eq = pc > 0 ? d.head(pc).cwiseAbs().maxCoeff() : 0.0;
    const double st = d.tail(m).cwiseAbs().maxCoeff();
    return eq <= opts.tol && st <= opts.tol;
  };

  Eigen::VectorXd s0 = Eigen::VectorXd::Zero(pc + m);
  const int stride = std::max(1, static_cast<int>(std::lround(0.05 / h)));
  const FlowTrace trace = integrate_flow(rhs, s0, h, opts.t_max, stride, stop);

  FlowSolveResult out;
  const Eigen::VectorXd final_state = trace.states.back();
  out.nu = final_state.head(pc);
  out.x = final_state.tail(m);
  out.t_final = trace.times.back();
  const Eigen::VectorXd d = rhs(0.0, final_state);
  out.equality_residual = pc > 0 ? d.head(pc).cwiseAbs().maxCoeff() : 0.0;
  out.stationarity_residual = d.tail(m).cwiseAbs().maxCoeff();
  out.converged = trace.stopped_early;
  return out;
}

KKTResidual kkt_residual(const KKTPoint& pt, const Problem& p) {
  const int m = p.total_dim();
  const int pc = p.num_constraints();
  if (pt.x.size() != m) throw std::invalid_argument("KKT point dimension mismatch");

  KKTResidual r;
  Eigen::VectorXd stat = p.cost_gradient(pt.x);
  if (pc > 0) {
    const Eigen::MatrixXd w = p.stacked_weights();
    stat += w.transpose() * pt.nu;
    r.equality = (w * pt.x - p.rhs_vector()).cwiseAbs().maxCoeff();
  }
  stat -= pt.mu_lower;
  stat += pt.mu_upper;
  r.stationarity = stat.cwiseAbs().maxCoeff();

  int off = 0;
  for (const auto& a : p.agents) {
    for (int l = 0; l < a.dim(); ++l) {
      const int c = off + l;
      if (auto lo = a.lower_bound(l)) {
        r.complementarity = std::max(r.complementarity, std::abs(pt.mu_lower(c) * (*lo - pt.x(c))));
        r.primal_box = std::max(r.primal_box, *lo - pt.x(c));
      }
      if (auto hi = a.upper_bound(l)) {
        r.complementarity = std::max(r.complementarity, std::abs(pt.mu_upper(c) * (pt.x(c) - *hi)));
        r.primal_box = std::max(r.primal_box, pt.x(c) - *hi);
      }
      r.dual_sign = std::max({r.dual_sign, -pt.mu_lower(c), -pt.mu_upper(c)});
    }
    off += a.dim();
  }
  return r;
}

RecoveredMultipliers recover_multipliers(const Eigen::VectorXd& x, const Eigen::VectorXd& nu,
                                         const Problem& p) {
  const int m = p.total_dim();
  const int pc = p.num_constraints();
  if (x.size() != m || nu.size() != pc) throw std::invalid_argument("dimension mismatch");
  const double activity_tol = 1e-6;

  Eigen::VectorXd grad = p.cost_gradient(x);
  if (pc > 0) grad += p.stacked_weights().transpose() * nu;

  RecoveredMultipliers out;
  out.mu_lower = Eigen::VectorXd::Zero(m);
  out.mu_upper = Eigen::VectorXd::Zero(m);

  int off = 0;
  for (const auto& a : p.agents) {
    for (int l = 0; l < a.dim(); ++l) {
      const int c = off + l;
      const auto lo = a.lower_bound(l);
      const auto hi = a.upper_bound(l);
      const bool near_lower = lo && std::abs(x(c) - *lo) <= activity_tol;
      const bool near_upper = hi && std::abs(x(c) - *hi) <= activity_tol;
      if (near_lower && near_upper) {
        throw std::runtime_error("ambiguous activity: coordinate within tolerance of both bounds");
      }
      if (near_lower) {
        out.mu_lower(c) = grad(c);
        if (grad(c) < -1e-6) out.ok = false;
      } else if (near_upper) {
        out.mu_upper(c) = -grad(c);
        if (-grad(c) < -1e-6) out.ok = false;
      }
    }
    off += a.dim();
  }
  return out;
}

}  // namespace dra
