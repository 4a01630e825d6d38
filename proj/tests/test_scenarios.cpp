#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dra/problem_io.hpp"
#include "dra/run.hpp"
#include "dra/scenario.hpp"

using namespace dra;

namespace {

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// Canonical rendering of the dispatch scenario's numeric content: cost rows,
// limits, constraint weights and demands, in agent order.
std::string canonical_example1() {
  const ProblemBundle bundle = builtin_example1();
  std::ostringstream os;
  for (const auto& a : bundle.problem.agents) {
    os << a.id << ":";
    for (int l = 0; l < a.dim(); ++l) {
      os << format_double(a.costs[l].quad_curvature()) << ","
         << format_double(a.costs[l].quad_slope()) << ","
         << format_double(a.costs[l].quad_offset()) << ","
         << format_double(*a.lower_bound(l)) << "," << format_double(*a.upper_bound(l)) << ";";
    }
  }
  for (const auto& c : bundle.problem.constraints) {
    os << "|" << format_double(c.rhs);
    for (const auto& [id, row] : c.weights) {
      os << " " << id << "=";
      for (int l = 0; l < row.size(); ++l) os << format_double(row(l)) << ",";
    }
  }
  return os.str();
}

}  // namespace

TEST_CASE("dispatch scenario embeds the generator table verbatim") {
  const ProblemBundle bundle = builtin_example1();
  const Problem& p = bundle.problem;

  // One row per agent: (curvature, slope, offset, lower, upper).
  struct Row {
    int id, dim;
    double a, b, c, lo, hi;
  };
  const Row table[] = {
      {1, 2, 0.0696629, 26.24382, 31.67, 5.0, 30.0},
      {2, 1, 0.003, 10.76, 32.96, 100.0, 350.0},
      {3, 3, 0.0024014, 12.32989, 28.0, 50.0, 250.0},
      {4, 3, 0.0128, 17.82, 10.15, 25.0, 100.0},
      {5, 2, 0.010875, 12.8875, 6.78, 150.0, 300.0},
      {6, 1, 0.010875, 12.8875, 6.78, 80.0, 300.0},
  };
  REQUIRE(p.num_agents() == 6);
  for (const Row& row : table) {
    const AgentSpec& a = p.agent(row.id);
    REQUIRE(a.dim() == row.dim);
    for (int l = 0; l < a.dim(); ++l) {
      CHECK(a.costs[l].quad_curvature() == row.a);
      CHECK(a.costs[l].quad_slope() == row.b);
      CHECK(a.costs[l].quad_offset() == row.c);
      CHECK(*a.lower_bound(l) == row.lo);
      CHECK(*a.upper_bound(l) == row.hi);
    }
  }
  CHECK(p.constraints[0].rhs == 450.0);
  CHECK(p.constraints[1].rhs == 700.0);
  CHECK(p.constraints[0].weights.at(3).isApprox(Eigen::RowVectorXd::Constant(3, 0.5)));
  CHECK(p.constraints[1].weights.at(3).isApprox(Eigen::RowVectorXd::Constant(3, 0.5)));
  CHECK(p.constraints[0].weights.count(5) == 0);
  CHECK(p.constraints[1].weights.count(1) == 0);

  // Frozen checksum of the canonical serialization guards against silent
  // edits of the embedded table.
  CHECK(fnv1a(canonical_example1()) == 0x16486c501cb66b47ull);
}

TEST_CASE("sensor scenario embeds both target phases and the slack reformulation") {
  const ProblemBundle bundle = builtin_example2();
  REQUIRE(bundle.phase2.has_value());
  CHECK(bundle.cost_switch_time == 100.0);

  // Phase 1 watcher costs: sum over targets of (x - p)^2.
  const Problem& p1 = bundle.problem;
  CHECK(p1.agent(1).costs[0].quad_curvature() == 3.0);
  CHECK(p1.agent(1).costs[0].quad_slope() == -64.0);   // -2 (12 + 11 + 9)
  CHECK(p1.agent(1).costs[0].quad_offset() == 346.0);  // 144 + 121 + 81
  CHECK(p1.agent(3).costs[0].quad_curvature() == 4.0);
  CHECK(p1.agent(3).costs[0].quad_slope() == -4.0);
  CHECK(p1.agent(3).costs[0].quad_offset() == 18.0);
  CHECK(p1.agent(5).costs[0].quad_slope() == 64.0);
  CHECK(p1.agent(5).costs[0].quad_offset() == 354.0);

  const Problem& p2 = *bundle.phase2;
  CHECK(p2.agent(1).costs[0].quad_slope() == -126.0);
  CHECK(p2.agent(1).costs[0].quad_offset() == 1349.0);
  CHECK(p2.agent(3).costs[0].quad_slope() == -86.0);
  CHECK(p2.agent(5).costs[0].quad_slope() == 6.0);

  // Slack variables: nonnegative, zero cost, one per link constraint.
  for (int id : {1, 2, 3, 4}) {
    const AgentSpec& a = p1.agent(id);
    REQUIRE(a.dim() == 2);
    CHECK(a.costs[1].quad_curvature() == 0.0);
    CHECK(*a.lower_bound(1) == 0.0);
    CHECK_FALSE(a.upper_bound(1).has_value());
  }
  CHECK(p1.agent(5).dim() == 1);
  REQUIRE(p1.num_constraints() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(p1.constraints[k].rhs == 5.0);
    const auto& own = p1.constraints[k].weights.at(k + 1);
    CHECK(own(0) == 1.0);
    CHECK(own(1) == 1.0);
    const auto& next = p1.constraints[k].weights.at(k + 2);
    CHECK(next(0) == -1.0);
  }

  // relays carry no cost at all
  CHECK(p1.agent(2).costs[0].quad_curvature() == 0.0);
  CHECK(p1.agent(4).costs[0].quad_slope() == 0.0);
}

TEST_CASE("unknown builtin names are rejected") {
  CHECK_THROWS_AS(make_builtin("example9", 0), std::invalid_argument);
}

TEST_CASE("problem json round trip") {
  const ProblemBundle original = builtin_example1();
  const std::string text = problem_to_json(original);
  const ProblemBundle parsed = parse_problem_json(text);
  const Problem& p = parsed.problem;
  REQUIRE(p.num_agents() == 6);
  CHECK(p.total_dim() == 12);
  CHECK(p.agent(1).costs[0].quad_curvature() == 0.0696629);
  CHECK(*p.agent(5).lower_bound(1) == 150.0);
  CHECK(p.constraints[1].rhs == 700.0);
  CHECK(p.physical.weight(5, 6) == 1.0);
  CHECK(validate(p).ok);
  // stacked weights agree entry by entry
  CHECK((p.stacked_weights() - original.problem.stacked_weights()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("problem json accepts dead-zone costs, gains, and penalty blocks") {
  const std::string text = R"({
    "agents": [
      {"id": 1, "costs": [{"type": "smooth_deadzone", "halfwidth": 2.0, "blend": 0.01}]},
      {"id": 2, "costs": [{"type": "quadratic", "a": 1.0, "b": 0.5}],
       "lower": [0.0], "upper": [3.0]}
    ],
    "constraints": [{"b": 2.0, "weights": {"1": [1.0], "2": [1.0]}}],
    "graph": {"edges": [[1, 2]]},
    "gains": {"rho": 2.0, "beta": [1.5]},
    "penalty": {"epsilon": 0.02, "gamma": "auto", "adjusted_bounds": true},
    "integration": {"step": 0.0005, "t_end": 10.0, "tol": 1e-5}
  })";
  const ProblemBundle bundle = parse_problem_json(text);
  CHECK_FALSE(bundle.problem.agents[0].costs[0].is_quadratic());
  CHECK(bundle.gains.default_rho == 2.0);
  CHECK(bundle.gains.beta == std::vector<double>{1.5});
  CHECK(bundle.penalty.epsilon == 0.02);
  CHECK_FALSE(bundle.penalty.gamma.has_value());  // "auto" resolves at run time
  CHECK(bundle.penalty.adjusted_bounds);
  CHECK(bundle.integration.step == 0.0005);
  CHECK(bundle.integration.stop_tol == 1e-5);
  CHECK(validate(bundle.problem).ok);
}

TEST_CASE("schedule json parses layouts and validates connectivity") {
  const ProblemBundle bundle = builtin_example1();
  const std::string text = R"({
    "switches": [
      {"t": 0.0, "clusters": [{"members": [1, 2, 3, 4]}, {"members": [3, 4, 5, 6]}]},
      {"t": 5.0, "clusters": [
        {"members": [1, 2, 3, 4], "edges": [[1, 2], [2, 3], [3, 4]]},
        {"members": [3, 4, 5, 6]}]}
    ]
  })";
  const TopologySchedule schedule =
      parse_schedule_json(text, bundle.problem, SplitSpec::equal_core());
  REQUIRE(schedule.epochs.size() == 2);
  CHECK(schedule.epochs[1].t_switch == 5.0);
  CHECK(schedule.epochs[1].layouts[0].adjacency(0, 3) == 0.0);  // path override

  const std::string missing_core = R"({
    "switches": [{"t": 0.0, "clusters": [{"members": [1, 2]}, {"members": [3, 4, 5, 6]}]}]
  })";
  CHECK_THROWS_AS(parse_schedule_json(missing_core, bundle.problem, SplitSpec::equal_core()),
                  std::invalid_argument);

  const std::string disconnected = R"({
    "switches": [{"t": 0.0, "clusters": [
      {"members": [1, 2, 3, 4], "edges": [[1, 2]]},
      {"members": [3, 4, 5, 6]}]}]
  })";
  CHECK_THROWS_AS(parse_schedule_json(disconnected, bundle.problem, SplitSpec::equal_core()),
                  std::invalid_argument);
}

TEST_CASE("trajectory csv carries the documented header and is deterministic") {
  ScenarioConfig cfg;
  cfg.builtin = "appendixB";
  cfg.t_end = 3.0;
  cfg.sample_stride = 500;

  const SolveResult first = run_solve(cfg);
  std::ostringstream a;
  write_trajectory_csv(a, first.trajectory, first.bundle.problem);
  const std::string text = a.str();
  CHECK(text.rfind("t,y[1][1],y[1][2],v[1][1],v[1][2],x[1][1],x[2][1]\n", 0) == 0);

  const SolveResult second = run_solve(cfg);
  std::ostringstream b;
  write_trajectory_csv(b, second.trajectory, second.bundle.problem);
  CHECK(text == b.str());
}

TEST_CASE("run_solve writes artifacts and reports exit codes") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dra_run_solve_test";
  fs::remove_all(dir);

  ScenarioConfig cfg;
  cfg.builtin = "appendixB";
  cfg.t_end = 120.0;
  cfg.out_dir = dir.string();
  const SolveResult res = run_solve(cfg);
  CHECK(res.exit_code == exit_ok);
  CHECK(fs::exists(dir / "trajectory.csv"));
  CHECK(fs::exists(dir / "report.json"));

  // not converged within a short horizon
  ScenarioConfig brief = cfg;
  brief.out_dir.clear();
  brief.t_end = 1.0;
  CHECK(run_solve(brief).exit_code == exit_not_converged);
  fs::remove_all(dir);
}

TEST_CASE("run_solve surfaces validation failures as exit code 3") {
  namespace fs = std::filesystem;
  const fs::path file = fs::temp_directory_path() / "dra_invalid_problem.json";
  {
    std::ofstream out(file);
    out << R"({
      "agents": [
        {"id": 1, "costs": [{"type": "quadratic", "a": 1.0, "b": 0.0}],
         "lower": [2.0], "upper": [1.0]}
      ],
      "constraints": [{"b": 1.0, "weights": {"1": [1.0]}}],
      "graph": {"edges": []}
    })";
  }
  ScenarioConfig cfg;
  cfg.problem_file = file.string();
  const SolveResult res = run_solve(cfg);
  CHECK(res.exit_code == exit_validation);
  fs::remove(file);
}

TEST_CASE("run_bounds emits both methods and the oracle comparison") {
  ScenarioConfig cfg;
  cfg.builtin = "table1";
  cfg.seed = 7;
  const BoundsReport rep = run_bounds(cfg);
  REQUIRE(rep.single.has_value());
  REQUIRE(rep.licq.has_value());
  // p = 1 with positive weights: omega equals the smallest weight, so the
  // two bounds coincide
  CHECK(rep.licq->value == doctest::Approx(rep.single->value));
  REQUIRE(rep.oracle_mu_max.has_value());
  CHECK(*rep.oracle_mu_max <= rep.single->value);
  REQUIRE(rep.gamma.has_value());
  CHECK(*rep.gamma >= (1.0 + 2.0) * rep.single->value);  // 1 + sqrt(10) > 3

  // consensus emulation reproduces the same numbers
  ScenarioConfig emu = cfg;
  emu.emulate_consensus = true;
  const BoundsReport emurep = run_bounds(emu);
  CHECK(emurep.used_consensus_emulation);
  CHECK(emurep.single->value == doctest::Approx(rep.single->value));
}

TEST_CASE("run_bounds names the failed precondition") {
  ScenarioConfig cfg;
  cfg.builtin = "appendixB";  // unbounded variables
  const BoundsReport rep = run_bounds(cfg);
  CHECK_FALSE(rep.single.has_value());
  CHECK(rep.single_reason.find("both bounds") != std::string::npos);
  CHECK_FALSE(rep.licq.has_value());
}

TEST_CASE("run_oracle reports the dispatch KKT point") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dra_oracle_test";
  fs::remove_all(dir);
  ScenarioConfig cfg;
  cfg.builtin = "example1";
  cfg.out_dir = dir.string();
  const OracleRunResult res = run_oracle(cfg);
  CHECK(res.residual.certified(1e-8));
  CHECK(res.point.x(0) == doctest::Approx(5.0));
  CHECK(fs::exists(dir / "kkt.json"));
  fs::remove_all(dir);
}

TEST_CASE("gamma auto resolution falls back to oracle multipliers") {
  // The sensor scenario has unbounded coordinates, so neither closed-form
  // bound applies; the resolver uses the exact multipliers instead.
  ProblemBundle bundle = builtin_example2();
  PenaltyConfig cfg;
  cfg.epsilon = 0.01;
  const auto pen = resolve_penalty(bundle.problem, cfg);
  REQUIRE(pen.has_value());
  CHECK(pen->gamma > 0.0);
  CHECK(pen->gamma < 200.0);  // the published weight is comfortably admissible
}

TEST_CASE("table1 scenario varies with the seed but not within it") {
  const ProblemBundle a1 = builtin_table1(5);
  const ProblemBundle a2 = builtin_table1(5);
  const ProblemBundle b = builtin_table1(6);
  CHECK(a1.problem.constraints[0].rhs == a2.problem.constraints[0].rhs);
  CHECK(a1.problem.constraints[0].rhs != b.problem.constraints[0].rhs);
}
