// Confidence intervals on the average effect: the known-parameter normal
// interval, the union-over-a-confidence-set method, and the Bonferroni
// half-sample method with set-constrained bound programs.
#pragma once

#include "pbounds/estimation.hpp"

namespace pbounds {

enum class CiMethod { Theorem1, Method1, Method2 };

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.05;
  double gamma = 0.0;  // 0 for the known-parameter interval
  CiMethod method = CiMethod::Theorem1;

  struct Diagnostics {
    double c_value = 0.0;
    double sigma_L = 0.0;
    double sigma_U = 0.0;
    int beta_grid_size = 0;     // Method 1
    double beta_grid_step = 0.0;
    double set_diameter[2] = {0.0, 0.0};  // Method 2
    bool degenerate_variance = false;
    double winning_alpha = 0.0;  // trade-off search
    double winning_gamma = 0.0;
    double L_hat = 0.0;
    double U_hat = 0.0;
  } diagnostics;
};

/// [L - c sigma_L / sqrt(n), U + c sigma_U / sqrt(n)] with c the two-sided
/// normal critical value. A zero dispersion degenerates to the raw bounds
/// and is flagged rather than rejected.
ConfidenceInterval ci_theorem1(const BoundsEstimate& be, int n, double alpha);

struct Method1Options {
  int beta_grid_size = 5000;  // per the one-dimensional grid search
  BoundObjective objective = BoundObjective::Uniform;
  int threads = 0;
  Vector prior;
};

/// Union of known-parameter intervals over a Wald confidence set for the
/// common parameter, scanned on an equidistant grid. Guarantees asymptotic
/// level 1 - alpha - gamma. Supports one- and (via a Bonferroni product box)
/// two-dimensional parameters.
ConfidenceInterval ci_method1(const PanelDataset& panel, const ModelSpec& model,
                              const EffectSpec& effect, const HeterogeneityGrid& grid,
                              const BetaEstimate& beta_hat, double alpha, double gamma,
                              const Method1Options& opts = {});

struct Method2Options {
  BoundObjective objective = BoundObjective::Uniform;
  int threads = 0;
  Vector prior;
};

/// Cross-fit bounds anchored on per-half confidence-set vertices, with the
/// Bonferroni critical value c_{alpha/4} and half-sample dispersions.
/// Asymptotic level 1 - alpha - gamma.
ConfidenceInterval ci_method2(const PanelDataset& panel, const ModelSpec& model,
                              const EffectSpec& effect, const HeterogeneityGrid& grid,
                              double alpha, double gamma, const BetaEstimator& estimator,
                              const Method2Options& opts = {});

/// Runs Method 2 across (alpha, gamma) splits of a total error budget and
/// returns the narrowest interval; the winning split is recorded in the
/// diagnostics.
ConfidenceInterval tradeoff_search_method2(
    const PanelDataset& panel, const ModelSpec& model, const EffectSpec& effect,
    const HeterogeneityGrid& grid, double c_total,
    const std::vector<std::pair<double, double>>& split_grid,
    const BetaEstimator& estimator, const Method2Options& opts = {});

}  // namespace pbounds
