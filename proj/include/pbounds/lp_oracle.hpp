// Exhaustive basic-feasible-solution enumeration for very small programs.
// Testing utility only: it cross-checks the simplex on an independent path.
#pragma once

#include "pbounds/lp.hpp"

namespace pbounds {

struct OracleResult {
  LpStatus status = LpStatus::Infeasible;  // Optimal or Infeasible
  double objective = std::numeric_limits<double>::quiet_NaN();
};

/// Enumerates every choice of num_vars active constraints (inequality rows,
/// equality rows, finite variable bounds), solves the square system and keeps
/// the best feasible vertex. Requires a pointed feasible region to be exact;
/// reports Infeasible when no feasible vertex exists.
///
/// Guard: num_vars + constraint rows must stay small (<= 16 combined).
OracleResult enumerate_vertices_oracle(const LinearProgram& lp);

}  // namespace pbounds
