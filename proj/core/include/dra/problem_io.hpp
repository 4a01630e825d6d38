#pragma once

#include <iosfwd>
#include <string>

#include "dra/scenario.hpp"

namespace dra {

/// Reads a problem file: top-level keys `agents`, `constraints`, `graph`,
/// and optional `clusters`, `gains`, `penalty`, `integration`. See the
/// README for the field-by-field schema.
ProblemBundle load_problem_file(const std::string& path);
ProblemBundle parse_problem_json(const std::string& text);

std::string problem_to_json(const ProblemBundle& bundle);

/// Schedule file: {"switches": [{"t": 0.0, "clusters": [{"members": [...],
/// "edges": [[u,v,w], ...]}, ...]}, ...]}. Omitted edges fall back to the
/// adjacency induced by the physical graph.
TopologySchedule load_schedule_file(const std::string& path, const Problem& p,
                                    const SplitSpec& split);
TopologySchedule parse_schedule_json(const std::string& text, const Problem& p,
                                     const SplitSpec& split);

/// trajectory.csv: header `t,y[k][slot]...,v[k][slot]...,x[agent][l]...`,
/// one row per sample, %.17g formatting. Requires every epoch to share the
/// member layout (column meaning would change otherwise).
void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& tr, const Problem& p);
void write_trajectory_csv_file(const std::string& path, const TrajectoryRecord& tr,
                               const Problem& p);

/// Deterministic %.17g rendering used by every writer.
std::string format_double(double v);

}  // namespace dra
