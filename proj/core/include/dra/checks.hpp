#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dra {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Desk-scale invariant suite covering every module: Laplacian structure,
/// connectivity cross checks, gradient/convexity spot checks, penalty
/// smoothness, multiplier-bound validity against the oracle, conservation
/// and aggregate-dual identities along trajectories, oracle exactness, and
/// artifact determinism. Failures never abort the suite.
std::vector<CheckResult> run_check_suite(std::uint64_t seed);

}  // namespace dra
