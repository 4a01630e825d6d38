// dra: scenario runner for the cluster-based distributed allocation solver.
//
// Subcommands:
//   solve   integrate the distributed flow and emit trajectory + report
//   bounds  multiplier bounds, automatic penalty weight, gap bound
//   oracle  exact KKT point of the boxed problem
//   check   cross-module invariant suite
//
// Exit codes: 0 converged / ok, 2 not converged, 3 validation error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "dra/checks.hpp"
#include "dra/problem_io.hpp"
#include "dra/run.hpp"

namespace {

void add_common_options(CLI::App* cmd, dra::ScenarioConfig& cfg, std::string& gamma_text) {
  cmd->add_option("--scenario", cfg.builtin, "builtin scenario: example1|example2|appendixB|table1");
  cmd->add_option("--problem", cfg.problem_file, "problem JSON file");
  cmd->add_option("--rho", cfg.rho, "uniform augmentation gain override");
  cmd->add_option("--beta", cfg.beta, "uniform consensus gain override");
  cmd->add_option("--epsilon", cfg.epsilon, "penalty smoothing width");
  cmd->add_option("--gamma", gamma_text, "penalty weight (number or 'auto')");
  cmd->add_flag("--adjusted-bounds", cfg.adjusted_bounds, "tighten boxes by epsilon");
  cmd->add_option("--step", cfg.step, "integration step");
  cmd->add_option("--t-end", cfg.t_end, "simulated horizon");
  cmd->add_option("--tol", cfg.tol, "stop tolerance");
  cmd->add_option("--sample-stride", cfg.sample_stride, "record every n-th step");
  cmd->add_flag("--full-graph", cfg.full_graph, "use the whole physical graph per cluster");
  cmd->add_option("--topology-schedule", cfg.schedule_file, "piecewise-constant topology JSON");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--seed", cfg.seed, "seed for randomized constructions");
}

void resolve_gamma_text(const std::string& text, dra::ScenarioConfig& cfg) {
  if (text.empty()) return;
  if (text == "auto") {
    cfg.gamma_auto_requested = true;
    return;
  }
  cfg.gamma = std::stod(text);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cluster-based distributed resource allocation simulator"};
  app.require_subcommand(1);

  dra::ScenarioConfig cfg;
  std::string gamma_text;

  CLI::App* solve = app.add_subcommand("solve", "run the distributed algorithm");
  add_common_options(solve, cfg, gamma_text);

  CLI::App* bounds = app.add_subcommand("bounds", "multiplier bounds and penalty weight");
  add_common_options(bounds, cfg, gamma_text);
  bounds->add_flag("--emulate-consensus", cfg.emulate_consensus,
                   "reduce the bound ingredients via max-consensus rounds");

  CLI::App* oracle = app.add_subcommand("oracle", "exact KKT point of the boxed problem");
  add_common_options(oracle, cfg, gamma_text);

  CLI::App* check = app.add_subcommand("check", "run the invariant suite");
  check->add_option("--seed", cfg.seed, "suite seed");
  check->add_option("--out", cfg.out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    resolve_gamma_text(gamma_text, cfg);

    if (solve->parsed()) {
      const dra::SolveResult res = dra::run_solve(cfg);
      const auto& rep = res.report;
      std::printf("scenario          : %s\n", res.bundle.name.c_str());
      std::printf("converged         : %s\n", rep.converged ? "yes" : "no");
      if (rep.time_to_tolerance) {
        std::printf("time to tolerance : %g\n", *rep.time_to_tolerance);
      }
      if (res.phase1_time_to_tolerance) {
        std::printf("phase-1 time      : %g\n", *res.phase1_time_to_tolerance);
      }
      std::printf("equality violation: %.3e\n", rep.final_equality_violation);
      std::printf("consensus error   : %.3e\n", rep.final_consensus_error);
      std::printf("primal velocity   : %.3e\n", rep.final_stationarity);
      if (res.penalty) {
        std::printf("penalty           : epsilon=%g gamma=%g%s\n", res.penalty->epsilon,
                    res.penalty->gamma, res.penalty->adjusted_bounds ? " (adjusted bounds)" : "");
      }
      if (rep.fitted_rate) {
        std::printf("fitted rate       : %.4f (r2 %.4f)\n", *rep.fitted_rate, *rep.fitted_r2);
      }
      if (res.oracle.available) {
        std::printf("oracle gap        : max|x - x*| = %.3e, cost gap %.3e\n",
                    res.oracle.max_coordinate_gap, res.oracle.cost_gap);
      } else if (!res.oracle.skipped_reason.empty()) {
        std::printf("oracle comparison : skipped (%s)\n", res.oracle.skipped_reason.c_str());
      }
      std::printf("communicated vars :");
      for (int c : res.communicated) std::printf(" %d", c);
      std::printf("\n");
      for (const auto& note : rep.notes) std::printf("note: %s\n", note.c_str());
      if (!res.trajectory_path.empty()) {
        std::printf("wrote %s and %s\n", res.trajectory_path.c_str(), res.report_path.c_str());
      }
      return res.exit_code;
    }

    if (bounds->parsed()) {
      const dra::BoundsReport rep = dra::run_bounds(cfg);
      auto print_bound = [](const char* name, const dra::MultiplierBound& mb) {
        std::printf("%s: %.6g  (weight_max %.4g, %s %.4g, grad bound %.6g)\n", name, mb.value,
                    mb.weight_max,
                    mb.method == dra::MultiplierBound::Method::single_constraint ? "weight_min"
                                                                                 : "omega",
                    mb.weight_min_or_omega, mb.grad_bound);
      };
      if (rep.single) print_bound("mu_bound (single constraint)", *rep.single);
      else std::printf("mu_bound (single constraint): unavailable — %s\n", rep.single_reason.c_str());
      if (rep.licq) print_bound("mu_bound (LICQ)             ", *rep.licq);
      else std::printf("mu_bound (LICQ): unavailable — %s\n", rep.licq_reason.c_str());
      if (rep.gamma) std::printf("gamma (auto)                : %.6g\n", *rep.gamma);
      if (rep.gap) std::printf("gap bound eps*gamma*N       : %.6g\n", *rep.gap);
      if (rep.oracle_mu_max) std::printf("oracle mu_max               : %.6g\n", *rep.oracle_mu_max);
      if (rep.ratio) std::printf("bound / actual              : %.3g\n", *rep.ratio);
      if (rep.used_consensus_emulation) std::printf("(ingredients reduced via max-consensus)\n");
      return rep.exit_code;
    }

    if (oracle->parsed()) {
      const dra::OracleRunResult res = dra::run_oracle(cfg);
      std::printf("x* :");
      for (int i = 0; i < res.point.x.size(); ++i) std::printf(" %.6g", res.point.x(i));
      std::printf("\nnu*:");
      for (int i = 0; i < res.point.nu.size(); ++i) std::printf(" %.6g", res.point.nu(i));
      std::printf("\nactive lower: %zu, active upper: %zu, max multiplier %.6g\n",
                  res.point.active_lower.size(), res.point.active_upper.size(),
                  res.point.max_multiplier());
      std::printf("residuals: stationarity %.2e, equality %.2e, complementarity %.2e\n",
                  res.residual.stationarity, res.residual.equality, res.residual.complementarity);
      if (!res.report_path.empty()) std::printf("wrote %s\n", res.report_path.c_str());
      return res.exit_code;
    }

    if (check->parsed()) {
      const auto results = dra::run_check_suite(cfg.seed);
      int failures = 0;
      nlohmann::json j = nlohmann::json::array();
      for (const auto& r : results) {
        std::printf("%-55s %s%s%s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL",
                    r.detail.empty() ? "" : "  — ", r.detail.c_str());
        if (!r.passed) ++failures;
        j.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
      }
      if (!cfg.out_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(cfg.out_dir);
        std::ofstream out(fs::path(cfg.out_dir) / "check.json");
        out << j.dump(2) << "\n";
      }
      std::printf("%d/%zu checks passed\n", static_cast<int>(results.size()) - failures,
                  results.size());
      return failures == 0 ? 0 : 1;
    }
  } catch (const dra::ValidationError& err) {
    std::fprintf(stderr, "validation error: %s\n", err.what());
    return dra::exit_validation;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
