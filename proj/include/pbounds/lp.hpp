// Dense linear-program representation and a self-contained two-phase primal
// simplex. All bound and identified-set constructions run on this solver.
//
// Determinism: Dantzig pricing with lowest-index tie-breaking, switching to
// Bland's rule after a stall, so identical inputs give identical solutions.
#pragma once

#include "pbounds/math.hpp"

#include <iosfwd>
#include <string>

namespace pbounds {

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

const char* to_string(LpStatus s);

// minimize c.v  subject to  a_ub v <= b_ub,  a_eq v = b_eq,  lo <= v <= hi
struct LinearProgram {
  Vector c;
  Matrix a_ub;
  Vector b_ub;
  Matrix a_eq;   // zero rows when absent
  Vector b_eq;
  Vector lo;     // -inf allowed
  Vector hi;     // +inf allowed

  // Optional warm-start hint: a feasible point whose components all sit on a
  // finite variable bound. When present, the simplex starts from the slack
  // basis anchored there and skips phase one.
  Vector anchor;

  Index num_vars() const { return c.size(); }
  void validate() const;
};

struct SolveOptions {
  double feas_tol = 1e-9;
  double gap_tol = 1e-8;
  int max_iter = 0;     // 0 = derived from problem size
  int bland_stall = 40; // degenerate pivots tolerated before Bland's rule
};

struct LpSolution {
  LpStatus status = LpStatus::IterLimit;
  Vector v;
  double objective = std::numeric_limits<double>::quiet_NaN();
  // One multiplier per a_ub row followed by one per a_eq row; the sensitivity
  // of the optimum to the corresponding right-hand side.
  Vector dual;
  double max_primal_residual = std::numeric_limits<double>::infinity();
  double duality_gap = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

LpSolution solve_lp(const LinearProgram& lp, const SolveOptions& opts = {});

/// Row-generation outer loop for programs with many inequality rows and few
/// variables: solves on a working subset of a_ub, adds violated rows until
/// the full set is satisfied. Exact once it terminates (the relaxation
/// optimum is feasible for the full program).
LpSolution solve_lp_cutting(const LinearProgram& lp, const SolveOptions& opts = {});

/// Debug dump in CPLEX LP text format (objective, constraint rows, bounds).
void write_lp_text(const LinearProgram& lp, std::ostream& os);
std::string lp_to_text(const LinearProgram& lp);

// Adapter point for plugging in an external solver behind the same
// contract; the reference simplex is always available and is the default
// everywhere in this library.
struct LpSolverAdapter {
  virtual ~LpSolverAdapter() = default;
  virtual LpSolution solve(const LinearProgram& lp, const SolveOptions& opts) const = 0;
};

struct ReferenceSimplex final : LpSolverAdapter {
  LpSolution solve(const LinearProgram& lp, const SolveOptions& opts) const override {
    return solve_lp(lp, opts);
  }
};

}  // namespace pbounds
