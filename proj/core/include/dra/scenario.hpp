#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dra/diagnostics.hpp"
#include "dra/dynamics.hpp"
#include "dra/model.hpp"
#include "dra/oracle.hpp"
#include "dra/penalty.hpp"

namespace dra {

/// Everything needed to run one experiment; builtin scenarios fill in their
/// own defaults and CLI flags override field by field.
struct ScenarioConfig {
  std::string builtin;       // example1 | example2 | appendixB | table1 | ""
  std::string problem_file;  // used when builtin is empty

  std::optional<double> rho;   // uniform override
  std::optional<double> beta;  // uniform override
  std::optional<double> epsilon;
  std::optional<double> gamma;  // empty with gamma_auto set = recompute
  bool gamma_auto_requested = false;
  bool adjusted_bounds = false;
  std::optional<double> step;
  std::optional<double> t_end;
  std::optional<double> tol;
  std::optional<int> sample_stride;
  bool full_graph = false;
  std::string schedule_file;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool emulate_consensus = false;  // bounds: reduce via max-consensus rounds
};

/// A problem together with the run parameters resolved for it.
struct ProblemBundle {
  Problem problem;
  GainConfig gains;
  PenaltyConfig penalty;
  IntegrateOptions integration;
  LayoutOptions layout;
  /// Second cost phase activated at cost_switch_time (sensor scenario).
  std::optional<Problem> phase2;
  double cost_switch_time = 0.0;
  std::string name;
};

// ---- built-in scenarios -------------------------------------------------

/// Six-generator dispatch over the two-constraint network with the IEEE-118
/// cost rows; demands 450 and 700.
ProblemBundle builtin_example1();

/// Line deployment of three sensors and two relays with slack-variable
/// range constraints and a target switch at t = 100.
ProblemBundle builtin_example2();

/// Two-agent dead-zone instance whose flow converges only with a positive
/// augmentation gain.
ProblemBundle builtin_appendix_b();

/// One Table-1-style random single-constraint allocation instance.
ProblemBundle builtin_table1(std::uint64_t seed);

ProblemBundle make_builtin(const std::string& name, std::uint64_t seed);

// ---- seeded instance generators (bound studies, acceptance) -------------

struct Rng {
  explicit Rng(std::uint64_t seed) : engine(seed) {}
  std::mt19937_64 engine;
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);
};

/// 10 scalar agents, p = 1, weights in (0, 2], boxes [0, 1], quadratic
/// costs with curvature in (0, 1] and slope in (0, 3]; rhs redrawn until
/// strictly inside the box-feasible range.
Problem make_table1_instance(Rng& rng);

/// Strongly convex quadratic instance without boxes: up to `max_agents`
/// agents of dimension <= 3, p <= 2 constraints, curvature in [0.1, 1].
Problem make_strongly_convex_instance(Rng& rng, int max_agents = 5, int max_p = 2);

/// Fully boxed quadratic instance with p = 1 and positive weights (the
/// mu_bound_single preconditions); boxes are placed so bounds are active
/// with some probability.
Problem make_boxed_allocation_instance(Rng& rng, int max_agents = 4);

/// Fully boxed instance with m <= 6, p <= 2 and mixed-sign weights; the rhs
/// is generated from an interior point so the instance is feasible.
Problem make_licq_candidate_instance(Rng& rng);

/// Small fully boxed instance with m <= 4 and p = m - 2 or m - 1, sized for
/// grid-search cross checks.
Problem make_grid_check_instance(Rng& rng);

}  // namespace dra
