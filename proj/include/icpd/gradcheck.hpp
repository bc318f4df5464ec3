// Finite-difference verification of every reverse-mode primitive and both
// task losses. Shared by the gradcheck CLI subcommand and the acceptance
// suite.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace icpd {

struct GradCheckCase {
  std::string name;
  double max_rel_err = 0.0;
  int points = 0;
  bool pass = false;
};

// Runs every case at `points_per_case` random inputs with central
// differences (h = 1e-5) and the given per-coordinate relative tolerance.
std::vector<GradCheckCase> run_gradient_checks(int points_per_case, std::uint64_t seed,
                                               double tolerance = 1e-4);

}  // namespace icpd
