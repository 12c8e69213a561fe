// Common-parameter estimation and sample bound aggregation: conditional
// logit for the static model, the half-sample split, cross-fitted bound
// estimators and their set-constrained variant.
#pragma once

#include "pbounds/bounds.hpp"

#include <functional>

namespace pbounds {

struct PanelDataset {
  int n = 0;
  int T = 0;
  int K = 0;
  Eigen::MatrixXi y;   // n x T binary outcomes
  Matrix x;            // (n*T) x K covariates, row i*T + t
  Eigen::VectorXi y0;  // initial outcomes; empty for static panels

  bool has_y0() const { return y0.size() == n && n > 0; }
  Eigen::Block<const Matrix> x_unit(int i) const { return x.block(i * T, 0, T, K); }
  ConditioningValue z_of(int i) const {
    return {x_unit(i), has_y0() ? std::optional<int>(y0[i]) : std::nullopt};
  }
  int outcome_mask(int i) const {
    int mask = 0;
    for (int t = 0; t < T; ++t) mask |= (y(i, t) & 1) << t;
    return mask;
  }
  void validate() const;
};

struct IdentificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BetaEstimate {
  Vector beta;
  Matrix vcov;
  int n_used = 0;
  bool converged = false;
  double grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

/// Maximizes the conditional likelihood given sum_t Y_it for the static
/// logit model. Denominators (sums over same-count outcome patterns) are
/// computed exactly by dynamic programming over periods; Newton iterations
/// stop at gradient norm 1e-8.
BetaEstimate conditional_logit_mle(const PanelDataset& panel,
                                   const std::vector<int>& subset);

using BetaEstimator =
    std::function<BetaEstimate(const PanelDataset&, const std::vector<int>&)>;

/// I1 = {0,...,floor(n/2)-1}, I2 = the rest; the opposite half estimates the
/// parameter a unit is evaluated at.
std::pair<std::vector<int>, std::vector<int>> split_half(int n);

enum class BoundsMethod { KnownBeta, CrossFit, CrossFitSet };

struct BoundsEstimate {
  double L_hat = 0.0;
  double U_hat = 0.0;
  double sigma_L = 0.0;  // divisor n, as in the variance definition used
  double sigma_U = 0.0;
  std::vector<std::pair<double, double>> per_unit;
  BoundsMethod method = BoundsMethod::KnownBeta;

  // cross-fit extras
  std::vector<Vector> beta_by_half;  // beta_hat_1, beta_hat_2 when estimated

  // set-variant extras (Bonferroni boxes and per-half dispersion)
  std::vector<std::vector<Vector>> set_by_half;
  double sigma_L_half[2] = {0.0, 0.0};
  double sigma_U_half[2] = {0.0, 0.0};
  double set_diameter[2] = {0.0, 0.0};
};

struct EstimationOptions {
  int threads = 0;        // 0 = hardware concurrency
  Vector prior;           // empty = uniform over the grid
};

BoundsEstimate estimate_bounds_known_beta(const PanelDataset& panel,
                                          const ModelSpec& model,
                                          const EffectSpec& effect,
                                          const Vector& beta0,
                                          const HeterogeneityGrid& grid,
                                          BoundObjective objective,
                                          const EstimationOptions& opts = {});

/// Units in each half are evaluated at the parameter fitted on the opposite
/// half, restoring cross-sectional independence of the bound draws.
BoundsEstimate estimate_bounds_crossfit(const PanelDataset& panel,
                                        const ModelSpec& model,
                                        const EffectSpec& effect,
                                        const HeterogeneityGrid& grid,
                                        BoundObjective objective,
                                        const BetaEstimator& estimator,
                                        const EstimationOptions& opts = {});

/// Set-constrained cross-fit: per half, a Bonferroni product of component
/// confidence bounds at joint level 1 - gamma/2 anchors the bound programs.
/// `override_sets`, when nonempty, replaces the estimated vertex sets (used
/// for collapsed-set checks).
BoundsEstimate estimate_bounds_crossfit_set(
    const PanelDataset& panel, const ModelSpec& model, const EffectSpec& effect,
    const HeterogeneityGrid& grid, BoundObjective objective, double gamma,
    const BetaEstimator& estimator, const EstimationOptions& opts = {},
    const std::vector<std::vector<Vector>>& override_sets = {});

// Distinct-z bookkeeping shared by the estimators and the inference sweeps:
// units grouped by quantized conditioning value, with outcome-pattern counts
// per group.
struct ZGroups {
  std::vector<ConditioningValue> distinct;
  std::vector<std::vector<int>> units;                     // per group
  std::vector<std::vector<std::pair<int, int>>> patterns;  // (mask, count)

  static ZGroups build(const PanelDataset& panel);
};

// Fast aggregate path: bounds and dispersions for one anchor set without
// materializing per-unit values. Used by the Method-1 grid sweep.
struct BoundsMoments {
  double L_hat, U_hat, sigma_L, sigma_U;
};
BoundsMoments bounds_moments(const ZGroups& groups, int n, const ModelSpec& model,
                             const EffectSpec& effect, const std::vector<Vector>& betas,
                             const HeterogeneityGrid& grid, BoundObjective objective,
                             const Vector& prior = Vector());

}  // namespace pbounds
