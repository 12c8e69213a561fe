// Construction of outer-bound functions ell(.), u(.) per conditioning value:
// program assembly, sufficient-statistic reduction, the uniform variant, the
// confidence-set variant, two-grid refinement and validity checks.
#pragma once

#include "pbounds/lp.hpp"
#include "pbounds/model.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace pbounds {

struct HeterogeneityGrid {
  std::vector<Vector> points;       // construction grid A_g
  std::vector<Vector> fine_points;  // refinement grid A_G (may be empty)

  void validate(int dim) const;

  /// Equidistant scalar grid; fine grid has factor x the point count.
  static HeterogeneityGrid scalar(double lo, double hi, int n, int fine_factor = 10);
  /// Tensor grid for (A_1, A_2); the fine grid multiplies the total point
  /// count by roughly fine_factor.
  static HeterogeneityGrid random_coef(double lo1, double hi1, int n1, double lo2,
                                       double hi2, int n2, int fine_factor = 10);
  /// Paper defaults: 100 points on [-5,5], or 50x50 on [-5,5]x[-7,7].
  static HeterogeneityGrid default_for(const ModelSpec& model);
};

enum class BoundObjective { Baseline, Uniform };

BoundObjective default_objective(Family family);

// Partition of the outcome space into classes on which the bound functions
// are constant.
struct OutcomeClasses {
  std::vector<int> class_of;               // outcome mask -> class
  std::vector<std::vector<int>> members;   // class -> outcome masks

  int count() const { return static_cast<int>(members.size()); }
  static OutcomeClasses identity(int T);
};

struct UnsupportedReductionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Collapses the outcome space by the logit sufficient statistics: outcomes
/// sharing (sum_t y_t, sum_t y_t x_t [, sum_t y_t y_{t-1}]) have kernels with
/// identical dependence on the heterogeneity, so class-constant bound
/// functions lose nothing. Throws UnsupportedReductionError for non-logit
/// links (and for random-coefficient models with non-binary covariates);
/// callers fall back to the identity partition.
OutcomeClasses reduce_by_sufficient_statistic(const ModelSpec& model,
                                              const ConditioningValue& z,
                                              const Vector& beta);

struct BoundFunction {
  OutcomeClasses classes;
  Vector ell;  // per class
  Vector u;    // per class
  std::vector<Vector> beta_anchor;
  BoundObjective objective_kind = BoundObjective::Uniform;
  bool refined = false;
  bool box_capped = false;  // refinement fell back to the worst-case constants
  double b_min = -1.0;
  double b_max = 1.0;
  ConditioningValue z;

  double lower_at(int outcome_mask) const { return ell[classes.class_of[outcome_mask]]; }
  double upper_at(int outcome_mask) const { return u[classes.class_of[outcome_mask]]; }
};

// A built program plus the variable layout: ell variables first, then u
// variables, then the auxiliary scalar for the uniform objective.
struct BoundProgram {
  LinearProgram lp;
  OutcomeClasses classes;
  Index ell_start = 0;
  Index u_start = 0;
  Index s_index = -1;  // -1 for the baseline objective
};

/// Assembles the bound program for one conditioning value. `betas` is a
/// singleton for the plain bound condition or a finite anchor set for the
/// set-version; the objective is evaluated at the anchor mean. An empty
/// `prior` means the improper uniform prior over the grid.
BoundProgram build_bound_program(const ModelSpec& model, const EffectSpec& effect,
                                 const ConditioningValue& z,
                                 const std::vector<Vector>& betas,
                                 const HeterogeneityGrid& grid,
                                 BoundObjective objective,
                                 const Vector& prior = Vector(),
                                 const OutcomeClasses* classes = nullptr);

BoundFunction solve_bound_function(const ModelSpec& model, const EffectSpec& effect,
                                   const ConditioningValue& z,
                                   const std::vector<Vector>& betas,
                                   const HeterogeneityGrid& grid,
                                   BoundObjective objective,
                                   const Vector& prior = Vector(),
                                   const OutcomeClasses* classes = nullptr);

/// Shifts a solved bound function by its worst violation on the fine grid,
/// restoring validity there. If the shift would leave the admissible box the
/// affected side collapses to the always-valid constant and box_capped is
/// set.
BoundFunction refine_to_fine_grid(const BoundFunction& bf, const ModelSpec& model,
                                  const EffectSpec& effect, const ConditioningValue& z,
                                  const std::vector<Vector>& betas,
                                  const std::vector<Vector>& fine_points);

/// Maximum signed violation of the bound condition over grid x betas;
/// non-positive means valid.
double verify_bound_condition(const BoundFunction& bf, const ModelSpec& model,
                              const EffectSpec& effect, const ConditioningValue& z,
                              const std::vector<Vector>& betas,
                              const std::vector<Vector>& points);

/// Nonparametric bounds for the binary-covariate static model: average of
/// outcomes over treated/untreated periods with worst-case fill-ins for
/// never-observed treatment states.
std::pair<double, double> analytic_cfhn_bounds(const Eigen::VectorXi& x,
                                               const Eigen::VectorXi& y);

/// Shares solved bound functions between observations with identical
/// conditioning values (quantized to 12 decimal digits). Safe to use from
/// concurrent workers.
class BoundFunctionCache {
 public:
  using Builder = std::function<BoundFunction(const ConditioningValue&)>;

  std::shared_ptr<const BoundFunction> get(const ConditioningValue& z,
                                           const Builder& builder);
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<const BoundFunction>> map_;
};

std::string quantized_z_key(const ConditioningValue& z);

}  // namespace pbounds
