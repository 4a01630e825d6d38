#include "dra/penalty.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace dra {

double p_eps(double y, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("p_eps requires eps > 0");
  if (y <= 0.0) return 0.0;
  if (y <= eps) return y * y / (2.0 * eps);
  return y - 0.5 * eps;
}

double p_eps_grad(double y, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("p_eps requires eps > 0");
  if (y <= 0.0) return 0.0;
  if (y <= eps) return y / eps;
  return 1.0;
}

namespace {

// Effective bounds after the optional tightening.
inline double lower_used(double lo, const ResolvedPenalty& pen) {
  return pen.adjusted_bounds ? lo + pen.epsilon : lo;
}
inline double upper_used(double hi, const ResolvedPenalty& pen) {
  return pen.adjusted_bounds ? hi - pen.epsilon : hi;
}

}  // namespace

double penalized_value(const AgentSpec& a, const Eigen::VectorXd& x, const ResolvedPenalty& pen) {
  if (x.size() != a.dim()) throw std::invalid_argument("agent dimension mismatch");
  double v = cost_value(a, x);
  for (int l = 0; l < a.dim(); ++l) {
    if (auto lo = a.lower_bound(l)) {
      v += pen.gamma * p_eps(lower_used(*lo, pen) - x(l), pen.epsilon);
    }
    if (auto hi = a.upper_bound(l)) {
      v += pen.gamma * p_eps(x(l) - upper_used(*hi, pen), pen.epsilon);
    }
  }
  return v;
}

Eigen::VectorXd penalized_grad(const AgentSpec& a, const Eigen::VectorXd& x,
                               const ResolvedPenalty& pen) {
  if (x.size() != a.dim()) throw std::invalid_argument("agent dimension mismatch");
  Eigen::VectorXd g = cost_grad(a, x);
  for (int l = 0; l < a.dim(); ++l) {
    if (auto lo = a.lower_bound(l)) {
      g(l) -= pen.gamma * p_eps_grad(lower_used(*lo, pen) - x(l), pen.epsilon);
    }
    if (auto hi = a.upper_bound(l)) {
      g(l) += pen.gamma * p_eps_grad(x(l) - upper_used(*hi, pen), pen.epsilon);
    }
  }
  return g;
}

double penalized_total_value(const Problem& p, const Eigen::VectorXd& x,
                             const ResolvedPenalty& pen) {
  double v = 0.0;
  int off = 0;
  for (const auto& a : p.agents) {
    v += penalized_value(a, x.segment(off, a.dim()), pen);
    off += a.dim();
  }
  return v;
}

EpsFeasibility eps_feasible(const Eigen::VectorXd& x, const Problem& p, double eps) {
  if (x.size() != p.total_dim()) throw std::invalid_argument("stacked dimension mismatch");
  EpsFeasibility r;

  if (p.num_constraints() > 0) {
    const Eigen::VectorXd b = p.rhs_vector();
    const Eigen::VectorXd res = p.stacked_weights() * x - b;
    r.equality_violation = res.cwiseAbs().maxCoeff();
    const double tol = 1e-6 * (1.0 + b.cwiseAbs().maxCoeff());
    for (int k = 0; k < res.size(); ++k) {
      if (std::abs(res(k)) > tol) {
        std::ostringstream os;
        os << "equality " << (k + 1) << " violated by " << res(k);
        r.violations.push_back(os.str());
      }
    }
  }

  int off = 0;
  for (const auto& a : p.agents) {
    for (int l = 0; l < a.dim(); ++l) {
      const double xl = x(off + l);
      if (auto lo = a.lower_bound(l)) {
        const double v = *lo - xl;
        r.max_box_violation = std::max(r.max_box_violation, v);
        if (v > eps) {
          std::ostringstream os;
          os << "agent " << a.id << " subagent " << (l + 1) << " below lower bound by " << v;
          r.violations.push_back(os.str());
        }
      }
      if (auto hi = a.upper_bound(l)) {
        const double v = xl - *hi;
        r.max_box_violation = std::max(r.max_box_violation, v);
        if (v > eps) {
          std::ostringstream os;
          os << "agent " << a.id << " subagent " << (l + 1) << " above upper bound by " << v;
          r.violations.push_back(os.str());
        }
      }
    }
    off += a.dim();
  }

  r.feasible = r.violations.empty();
  return r;
}

MultiplierBound mu_bound_single(const Problem& p) {
  if (p.num_constraints() != 1) {
    throw std::invalid_argument("mu_bound_single requires exactly one equality constraint");
  }
  double wmin = std::numeric_limits<double>::infinity();
  double wmax = 0.0;
  double gbound = 0.0;
  for (const auto& a : p.agents) {
    const Eigen::RowVectorXd row = p.weight_row(0, a.id);
    for (int l = 0; l < row.size(); ++l) {
      if (row(l) <= 0.0) {
        throw std::invalid_argument(
            "mu_bound_single requires strictly positive constraint weights (agent " +
            std::to_string(a.id) + ")");
      }
      wmin = std::min(wmin, row(l));
      wmax = std::max(wmax, row(l));
    }
    gbound = std::max(gbound, grad_inf_bound(a));  // throws when not doubly bounded
  }
  MultiplierBound mb;
  mb.method = MultiplierBound::Method::single_constraint;
  mb.weight_max = wmax;
  mb.weight_min_or_omega = wmin;
  mb.grad_bound = gbound;
  mb.value = (1.0 + wmax / wmin) * gbound;
  return mb;
}

namespace {

double binomial_guard(int n, int k, std::size_t limit) {
  double c = 1.0;
  for (int i = 0; i < k; ++i) {
    c *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (c > static_cast<double>(limit) * 4.0) return c;
  }
  return c;
}

}  // namespace

double omega(const Eigen::MatrixXd& w, std::size_t enumeration_limit) {
  const int p = static_cast<int>(w.rows());
  const int m = static_cast<int>(w.cols());
  if (p == 0) throw std::invalid_argument("omega of an empty constraint set");
  if (m < p) throw std::invalid_argument("omega requires at least p columns");
  const double count = binomial_guard(m, p, enumeration_limit);
  if (count > static_cast<double>(enumeration_limit)) {
    std::ostringstream os;
    os << "omega enumeration needs " << count << " subsets, above the limit of "
       << enumeration_limit << "; raise the limit explicitly to proceed";
    throw std::runtime_error(os.str());
  }

  double best = std::numeric_limits<double>::infinity();
  std::vector<int> pick(p);
  for (int i = 0; i < p; ++i) pick[i] = i;
  Eigen::MatrixXd sub(p, p);
  while (true) {
    for (int c = 0; c < p; ++c) sub.col(c) = w.col(pick[c]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(sub);
    const double smin = svd.singularValues()(p - 1);
    if (smin > 1e-10) best = std::min(best, smin);

    int i = p - 1;
    while (i >= 0 && pick[i] == m - p + i) --i;
    if (i < 0) break;
    ++pick[i];
    for (int j = i + 1; j < p; ++j) pick[j] = pick[j - 1] + 1;
  }
  if (!std::isfinite(best)) {
    throw std::runtime_error("no invertible p x p submatrix found; W is rank deficient");
  }
  return best;
}

MultiplierBound mu_bound_licq(const Problem& p) {
  if (p.num_constraints() == 0) {
    throw std::invalid_argument("mu_bound_licq requires at least one equality constraint");
  }
  double gbound = 0.0;
  for (const auto& a : p.agents) gbound = std::max(gbound, grad_inf_bound(a));

  const Eigen::MatrixXd w = p.stacked_weights();
  const double wmax = w.cwiseAbs().maxCoeff();
  const double om = omega(w);

  MultiplierBound mb;
  mb.method = MultiplierBound::Method::licq;
  mb.weight_max = wmax;
  mb.weight_min_or_omega = om;
  mb.grad_bound = gbound;
  mb.value = (1.0 + wmax / om) * gbound;
  return mb;
}

double gamma_auto(int num_agents, const MultiplierBound& mb, double margin) {
  if (num_agents < 1) throw std::invalid_argument("gamma_auto requires at least one agent");
  if (!std::isfinite(mb.value)) throw std::invalid_argument("multiplier bound must be finite");
  // (1 - N) / (1 - sqrt(N)) = 1 + sqrt(N); degenerate single-agent factor is 1.
  const double factor = num_agents == 1 ? 1.0 : 1.0 + std::sqrt(static_cast<double>(num_agents));
  return factor * mb.value * (1.0 + margin);
}

double gap_bound(double eps, double gamma, int num_agents) {
  if (eps <= 0.0 || gamma <= 0.0 || num_agents <= 0) {
    throw std::invalid_argument("gap_bound requires positive inputs");
  }
  return eps * gamma * static_cast<double>(num_agents);
}

}  // namespace dra
