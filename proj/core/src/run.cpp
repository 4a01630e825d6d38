#include "dra/run.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "dra/problem_io.hpp"

namespace dra {

using nlohmann::json;

ProblemBundle resolve_problem(const ScenarioConfig& cfg) {
  if (!cfg.builtin.empty() && !cfg.problem_file.empty()) {
    throw std::invalid_argument("give either a builtin scenario or a problem file, not both");
  }
  if (cfg.builtin.empty() && cfg.problem_file.empty()) {
    throw std::invalid_argument("no scenario selected");
  }
  if (!cfg.builtin.empty()) return make_builtin(cfg.builtin, cfg.seed);
  return load_problem_file(cfg.problem_file);
}

void apply_overrides(ProblemBundle& bundle, const ScenarioConfig& cfg) {
  if (cfg.rho) {
    bundle.gains.rho.clear();
    bundle.gains.default_rho = *cfg.rho;
  }
  if (cfg.beta) {
    bundle.gains.beta.clear();
    bundle.gains.default_beta = *cfg.beta;
  }
  if (cfg.gamma) bundle.penalty.gamma = cfg.gamma;
  if (cfg.gamma_auto_requested) bundle.penalty.gamma = std::nullopt;
  if (cfg.epsilon) bundle.penalty.epsilon = *cfg.epsilon;
  if (cfg.adjusted_bounds) bundle.penalty.adjusted_bounds = true;
  if (cfg.step) bundle.integration.step = *cfg.step;
  if (cfg.t_end) bundle.integration.t_end = *cfg.t_end;
  if (cfg.tol) bundle.integration.stop_tol = *cfg.tol;
  if (cfg.sample_stride) bundle.integration.sample_stride = *cfg.sample_stride;
  if (cfg.full_graph) bundle.layout.full_graph = true;
}

std::optional<ResolvedPenalty> resolve_penalty(const Problem& p, const PenaltyConfig& cfg) {
  bool any_bound = false;
  for (const auto& a : p.agents) any_bound |= a.has_any_bound();
  if (!any_bound) return std::nullopt;

  ResolvedPenalty pen;
  pen.epsilon = cfg.epsilon;
  pen.adjusted_bounds = cfg.adjusted_bounds;
  if (cfg.gamma) {
    pen.gamma = *cfg.gamma;
    return pen;
  }

  const int n = p.num_agents();
  try {
    pen.gamma = gamma_auto(n, mu_bound_single(p));
    return pen;
  } catch (const std::exception&) {
    // preconditions not met; fall through
  }
  try {
    pen.gamma = gamma_auto(n, mu_bound_licq(p));
    return pen;
  } catch (const std::exception&) {
  }
  if (p.all_costs_quadratic()) {
    // Last resort on instances with unbounded coordinates: the exact
    // multipliers from the oracle stand in for the unavailable closed-form
    // bound.
    const KKTPoint pt = solve_boxed_qp(p);
    MultiplierBound mb;
    mb.value = pt.max_multiplier();
    pen.gamma = gamma_auto(n, mb);
    return pen;
  }
  throw std::runtime_error(
      "penalty weight: no explicit gamma and no applicable multiplier bound");
}

namespace {

json report_to_json(const SolveResult& res) {
  const ConvergenceReport& rep = res.report;
  json j;
  j["scenario"] = res.bundle.name;
  j["converged"] = rep.converged;
  j["exit_code"] = res.exit_code;
  if (rep.time_to_tolerance) j["time_to_tolerance"] = *rep.time_to_tolerance;
  if (res.phase1_time_to_tolerance) j["phase1_time_to_tolerance"] = *res.phase1_time_to_tolerance;
  j["final"] = {{"equality_violation", rep.final_equality_violation},
                {"consensus_error", rep.final_consensus_error},
                {"stationarity", rep.final_stationarity}};
  if (rep.fitted_rate) j["rate"] = {{"value", *rep.fitted_rate}, {"r2", *rep.fitted_r2}};
  j["conservation_drift"] = rep.conservation_drift_per_cluster;
  j["communicated_variables"] = res.communicated;
  if (res.penalty) {
    j["penalty"] = {{"epsilon", res.penalty->epsilon},
                    {"gamma", res.penalty->gamma},
                    {"adjusted_bounds", res.penalty->adjusted_bounds}};
  }
  if (res.oracle.available) {
    json jo;
    jo["max_coordinate_gap"] = res.oracle.max_coordinate_gap;
    jo["cost_gap"] = res.oracle.cost_gap;
    jo["max_multiplier"] = res.oracle.max_multiplier;
    json jx = json::array();
    for (int i = 0; i < res.oracle.x.size(); ++i) jx.push_back(res.oracle.x(i));
    jo["x"] = jx;
    j["oracle"] = jo;
  } else if (!res.oracle.skipped_reason.empty()) {
    j["oracle"] = {{"skipped", res.oracle.skipped_reason}};
  }
  j["notes"] = rep.notes;
  return j;
}

}  // namespace

SolveResult run_solve(const ScenarioConfig& cfg) {
  SolveResult res;
  res.bundle = resolve_problem(cfg);
  apply_overrides(res.bundle, cfg);
  Problem& problem = res.bundle.problem;

  try {
    ensure_valid(problem);
    if (res.bundle.phase2) ensure_valid(*res.bundle.phase2);
  } catch (const ValidationError& err) {
    res.exit_code = exit_validation;
    res.report.notes.push_back(err.what());
    return res;
  }

  res.penalty = resolve_penalty(problem, res.bundle.penalty);
  res.layouts = make_cluster_layouts(problem, res.bundle.layout);
  res.communicated = communicated_variable_counts(problem, res.layouts);

  std::optional<TopologySchedule> schedule;
  if (!cfg.schedule_file.empty()) {
    schedule = load_schedule_file(cfg.schedule_file, problem, res.bundle.layout.split);
  }

  const AlgorithmState s0 = init_state(problem, res.layouts);
  IntegrateOptions opts = res.bundle.integration;

  if (res.bundle.phase2) {
    // Scheduled cost swap: integrate the first phase without halting, swap
    // the cost coefficients, and continue from the carried state.
    IntegrateOptions phase1 = opts;
    phase1.t_end = res.bundle.cost_switch_time;
    phase1.halt_on_stop = false;
    TrajectoryRecord rec1 =
        integrate(problem, res.layouts, res.bundle.gains, res.penalty, s0, phase1, schedule);
    res.phase1_time_to_tolerance = rec1.time_to_tolerance;

    IntegrateOptions phase2 = opts;
    phase2.t_end = opts.t_end - res.bundle.cost_switch_time;
    phase2.halt_on_stop = false;
    AlgorithmState s1;
    s1.t = 0.0;
    s1.data = rec1.states.back();
    TrajectoryRecord rec2 = integrate(*res.bundle.phase2, res.layouts, res.bundle.gains,
                                      res.penalty, s1, phase2, schedule);

    // Stitch the records; phase-2 times are shifted behind the switch.
    res.trajectory = rec1;
    for (int s = 1; s < rec2.samples(); ++s) {
      res.trajectory.times.push_back(rec2.times[s] + res.bundle.cost_switch_time);
      res.trajectory.states.push_back(rec2.states[s]);
      res.trajectory.epoch_of_sample.push_back(res.trajectory.epoch_of_sample.front());
    }
    // The first phase is a fixed-length tracking segment; the run counts as
    // converged when the final phase settles.
    res.trajectory.stop_reached = rec2.time_to_tolerance.has_value();
    res.trajectory.time_to_tolerance =
        rec2.time_to_tolerance
            ? std::optional<double>(*rec2.time_to_tolerance + res.bundle.cost_switch_time)
            : std::nullopt;
    res.trajectory.diverged = rec1.diverged || rec2.diverged;

    // Diagnostics against the active (second) phase.
    res.report = summarize(res.trajectory, *res.bundle.phase2, res.bundle.gains, res.penalty);
    res.report.notes.push_back("two-phase run; diagnostics refer to the final phase");
  } else {
    res.trajectory =
        integrate(problem, res.layouts, res.bundle.gains, res.penalty, s0, opts, schedule);
    res.report = summarize(res.trajectory, problem, res.bundle.gains, res.penalty);
  }

  // Oracle comparison on quadratic instances.
  const Problem& final_problem = res.bundle.phase2 ? *res.bundle.phase2 : problem;
  if (final_problem.all_costs_quadratic()) {
    try {
      const KKTPoint pt = solve_boxed_qp(final_problem);
      res.oracle.available = true;
      res.oracle.x = pt.x;
      res.oracle.nu = pt.nu;
      res.oracle.max_multiplier = pt.max_multiplier();
      const auto& epoch = res.trajectory.epoch_of(res.trajectory.samples() - 1);
      const Eigen::VectorXd xf = epoch.space.x(res.trajectory.states.back());
      res.oracle.max_coordinate_gap = (xf - pt.x).cwiseAbs().maxCoeff();
      res.oracle.cost_gap =
          std::abs(final_problem.cost_value(pt.x) - final_problem.cost_value(xf));

      const RateFit fit = rate_fit(res.trajectory, pt.x);
      if (fit.available) {
        res.report.fitted_rate = fit.rate;
        res.report.fitted_r2 = fit.r2;
      }
    } catch (const std::exception& err) {
      res.oracle.skipped_reason = err.what();
    }
  } else {
    res.oracle.skipped_reason = "cost family outside the exact oracle";
  }

  if (res.trajectory.diverged) {
    res.exit_code = exit_not_converged;
  } else {
    res.exit_code = res.trajectory.stop_reached ? exit_ok : exit_not_converged;
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    res.trajectory_path = (fs::path(cfg.out_dir) / "trajectory.csv").string();
    write_trajectory_csv_file(res.trajectory_path, res.trajectory, final_problem);
    res.report_path = (fs::path(cfg.out_dir) / "report.json").string();
    std::ofstream out(res.report_path, std::ios::binary);
    out << report_to_json(res).dump(2) << "\n";
  }
  return res;
}

BoundsReport run_bounds(const ScenarioConfig& cfg) {
  BoundsReport rep;
  ProblemBundle bundle = resolve_problem(cfg);
  apply_overrides(bundle, cfg);
  const Problem& p = bundle.problem;

  ensure_valid(p);

  try {
    MultiplierBound mb = mu_bound_single(p);
    if (cfg.emulate_consensus) {
      // Distributed evaluation: every agent contributes its local gradient
      // bound and weight extremes, reduced over the physical graph.
      std::vector<double> grad_locals, wmax_locals, wmin_neg;
      for (const auto& a : p.agents) {
        grad_locals.push_back(grad_inf_bound(a));
        const Eigen::RowVectorXd row = p.weight_row(0, a.id);
        wmax_locals.push_back(row.maxCoeff());
        wmin_neg.push_back(-row.minCoeff());
      }
      const double g = max_consensus(p.physical, grad_locals).front();
      const double wmax = max_consensus(p.physical, wmax_locals).front();
      const double wmin = -max_consensus(p.physical, wmin_neg).front();
      mb.grad_bound = g;
      mb.weight_max = wmax;
      mb.weight_min_or_omega = wmin;
      mb.value = (1.0 + wmax / wmin) * g;
      rep.used_consensus_emulation = true;
    }
    rep.single = mb;
  } catch (const std::exception& err) {
    rep.single_reason = err.what();
  }

  try {
    rep.licq = mu_bound_licq(p);
  } catch (const std::exception& err) {
    rep.licq_reason = err.what();
  }

  const MultiplierBound* tightest = nullptr;
  if (rep.single) tightest = &*rep.single;
  if (rep.licq && (!tightest || rep.licq->value < tightest->value)) tightest = &*rep.licq;
  if (tightest) {
    rep.gamma = gamma_auto(p.num_agents(), *tightest);
    rep.gap = gap_bound(bundle.penalty.epsilon, *rep.gamma, p.num_agents());
  }

  if (p.all_costs_quadratic()) {
    try {
      const KKTPoint pt = solve_boxed_qp(p);
      rep.oracle_mu_max = pt.max_multiplier();
      if (tightest && *rep.oracle_mu_max > 0.0) {
        rep.ratio = tightest->value / *rep.oracle_mu_max;
      }
    } catch (const std::exception&) {
    }
  }

  if (!tightest && !rep.oracle_mu_max) rep.exit_code = exit_not_converged;

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    json j;
    auto bound_json = [](const MultiplierBound& mb) {
      return json{{"value", mb.value},
                  {"method", mb.method == MultiplierBound::Method::single_constraint
                                 ? "single_constraint"
                                 : "licq"},
                  {"weight_max", mb.weight_max},
                  {"weight_min_or_omega", mb.weight_min_or_omega},
                  {"grad_bound", mb.grad_bound}};
    };
    if (rep.single) j["single"] = bound_json(*rep.single);
    else j["single_unavailable"] = rep.single_reason;
    if (rep.licq) j["licq"] = bound_json(*rep.licq);
    else j["licq_unavailable"] = rep.licq_reason;
    if (rep.gamma) j["gamma_auto"] = *rep.gamma;
    if (rep.gap) j["gap_bound"] = *rep.gap;
    if (rep.oracle_mu_max) j["oracle_mu_max"] = *rep.oracle_mu_max;
    if (rep.ratio) j["bound_to_actual_ratio"] = *rep.ratio;
    j["consensus_emulation"] = rep.used_consensus_emulation;
    rep.report_path = (fs::path(cfg.out_dir) / "bounds.json").string();
    std::ofstream out(rep.report_path, std::ios::binary);
    out << j.dump(2) << "\n";
  }
  return rep;
}

OracleRunResult run_oracle(const ScenarioConfig& cfg) {
  OracleRunResult res;
  ProblemBundle bundle = resolve_problem(cfg);
  apply_overrides(bundle, cfg);
  ensure_valid(bundle.problem);

  res.point = solve_boxed_qp(bundle.problem);
  res.residual = kkt_residual(res.point, bundle.problem);

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    json j;
    auto vec = [](const Eigen::VectorXd& v) {
      json a = json::array();
      for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
      return a;
    };
    j["x"] = vec(res.point.x);
    j["nu"] = vec(res.point.nu);
    j["mu_lower"] = vec(res.point.mu_lower);
    j["mu_upper"] = vec(res.point.mu_upper);
    j["active_lower"] = res.point.active_lower;
    j["active_upper"] = res.point.active_upper;
    j["cost"] = bundle.problem.cost_value(res.point.x);
    j["residual"] = {{"stationarity", res.residual.stationarity},
                     {"equality", res.residual.equality},
                     {"complementarity", res.residual.complementarity},
                     {"dual_sign", res.residual.dual_sign},
                     {"primal_box", res.residual.primal_box}};
    res.report_path = (fs::path(cfg.out_dir) / "kkt.json").string();
    std::ofstream out(res.report_path, std::ios::binary);
    out << j.dump(2) << "\n";
  }
  return res;
}

}  // namespace dra
