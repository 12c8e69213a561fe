// Sharp identified set for the average effect given conditional choice
// probabilities, and the population / empirical probability tables it
// consumes. Serves as the comparison oracle for the outer bounds.
#pragma once

#include "pbounds/bounds.hpp"
#include "pbounds/dgp.hpp"
#include "pbounds/estimation.hpp"

namespace pbounds {

struct ChoiceProbTable {
  struct Cell {
    ConditioningValue z;
    double weight = 0.0;  // mass of this conditioning value
    Vector probs;         // over outcome masks, sums to one
    int unit_count = 0;   // observations behind an estimated cell
    bool thin = false;    // below the minimum cell count
  };
  int T = 0;
  std::vector<Cell> cells;

  void validate() const;
};

struct IdentifiedSet {
  double lower = 0.0;
  double upper = 0.0;
  std::vector<std::pair<double, double>> per_z;
  double feasibility_slack = 0.0;  // largest slack actually used
};

enum class SlackPolicy {
  EscalateThenFail,  // x10 escalation up to 1e-3, then error
  MinimalFeasible,   // fall back to the smallest feasible slack per cell
};

/// Per conditioning value, minimizes and maximizes the average effect over
/// heterogeneity distributions on the grid that reproduce the cell's choice
/// probabilities within `slack`; aggregates by the cell weights. Estimated
/// tables are generally infeasible at tiny slack, hence the policy knob.
IdentifiedSet sharp_idset(const ChoiceProbTable& table, const ModelSpec& model,
                          const EffectSpec& effect, const Vector& beta0,
                          const HeterogeneityGrid& grid, double slack = 1e-6,
                          SlackPolicy policy = SlackPolicy::EscalateThenFail);

/// Exact conditional choice probabilities under a shipped DGP, integrating
/// the kernel against the true heterogeneity law by Gauss-Hermite
/// quadrature. Only DGPs with discrete conditioning support have a table
/// form; continuous designs need an explicit list of values to condition on
/// (those cells then carry equal weights).
ChoiceProbTable population_choice_probs(const DgpSpec& dgp, int gh_nodes = 64,
                                        const std::vector<ConditioningValue>&
                                            condition_on = {});

/// Empirical frequencies of outcome patterns within each observed covariate
/// cell; cells with fewer than `min_cell_count` units are flagged.
ChoiceProbTable estimated_choice_probs(const PanelDataset& panel,
                                       int min_cell_count = 5);

/// Population outer bounds: expected bound functions under the table's
/// probabilities, which are linear in them.
std::pair<double, double> population_outer_bounds(
    const ChoiceProbTable& table, const ModelSpec& model, const EffectSpec& effect,
    const std::vector<Vector>& betas, const HeterogeneityGrid& grid,
    BoundObjective objective, int threads = 0);

}  // namespace pbounds
