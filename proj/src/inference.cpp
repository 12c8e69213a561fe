#include "pbounds/inference.hpp"

#include "pbounds/parallel.hpp"

namespace pbounds {

ConfidenceInterval ci_theorem1(const BoundsEstimate& be, int n, double alpha) {
  if (n < 1) throw std::invalid_argument("ci_theorem1: need n >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("ci_theorem1: alpha must lie in [0,1]");
  const double c = alpha >= 1.0 ? 0.0 : alpha <= 0.0
                       ? std::numeric_limits<double>::infinity()
                       : normal_quantile(1.0 - alpha / 2.0);
  ConfidenceInterval ci;
  ci.method = CiMethod::Theorem1;
  ci.alpha = alpha;
  ci.gamma = 0.0;
  ci.lower = be.L_hat - c * be.sigma_L / std::sqrt(n);
  ci.upper = be.U_hat + c * be.sigma_U / std::sqrt(n);
  ci.diagnostics.c_value = c;
  ci.diagnostics.sigma_L = be.sigma_L;
  ci.diagnostics.sigma_U = be.sigma_U;
  ci.diagnostics.degenerate_variance = be.sigma_L == 0.0 || be.sigma_U == 0.0;
  ci.diagnostics.L_hat = be.L_hat;
  ci.diagnostics.U_hat = be.U_hat;
  if (ci.diagnostics.degenerate_variance) {
    // constant bound draws: the interval degenerates to the raw bounds
    if (be.sigma_L == 0.0) ci.lower = be.L_hat;
    if (be.sigma_U == 0.0) ci.upper = be.U_hat;
  }
  return ci;
}

ConfidenceInterval ci_method1(const PanelDataset& panel, const ModelSpec& model,
                              const EffectSpec& effect, const HeterogeneityGrid& grid,
                              const BetaEstimate& beta_hat, double alpha, double gamma,
                              const Method1Options& opts) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("ci_method1: gamma must lie in (0,1)");
  if (!(alpha + gamma < 1.0))
    throw std::invalid_argument("ci_method1: alpha + gamma must stay below 1");
  const int dim = static_cast<int>(beta_hat.beta.size());
  if (dim > 2)
    throw std::invalid_argument(
        "ci_method1: grid search is limited to dim(beta) <= 2; use Method 2");
  if (opts.beta_grid_size < 1)
    throw std::invalid_argument("ci_method1: beta grid must be nonempty");

  // Wald set: scalar interval, or a Bonferroni product box for dim 2
  const double crit = normal_quantile(1.0 - gamma / (2.0 * dim));
  Vector se(dim);
  for (int k = 0; k < dim; ++k) {
    const double var = beta_hat.vcov(k, k);
    if (!std::isfinite(var) || var < 0.0)
      throw std::invalid_argument("ci_method1: degenerate parameter variance");
    se[k] = std::sqrt(var);
  }

  std::vector<Vector> beta_grid;
  double step = 0.0;
  if (dim == 1) {
    const int g = opts.beta_grid_size;
    const double lo = beta_hat.beta[0] - crit * se[0];
    const double hi = beta_hat.beta[0] + crit * se[0];
    step = g > 1 ? (hi - lo) / (g - 1) : 0.0;
    for (int i = 0; i < g; ++i) {
      Vector b(1);
      b[0] = g == 1 ? beta_hat.beta[0] : lo + step * i;
      beta_grid.push_back(b);
    }
  } else {
    const int per_dim = std::max(
        2, static_cast<int>(std::lround(std::sqrt(double(opts.beta_grid_size)))));
    step = 2.0 * crit * se.maxCoeff() / (per_dim - 1);
    for (int i = 0; i < per_dim; ++i)
      for (int j = 0; j < per_dim; ++j) {
        Vector b(2);
        b[0] = beta_hat.beta[0] + crit * se[0] * (2.0 * i / (per_dim - 1) - 1.0);
        b[1] = beta_hat.beta[1] + crit * se[1] * (2.0 * j / (per_dim - 1) - 1.0);
        beta_grid.push_back(b);
      }
  }

  const ZGroups groups = ZGroups::build(panel);
  const double c = alpha >= 1.0 ? 0.0 : normal_quantile(1.0 - alpha / 2.0);
  const double root_n = std::sqrt(static_cast<double>(panel.n));

  std::vector<double> lo_env(beta_grid.size()), hi_env(beta_grid.size());
  parallel_for(static_cast<long long>(beta_grid.size()), opts.threads, [&](long long i) {
    const BoundsMoments m =
        bounds_moments(groups, panel.n, model, effect, {beta_grid[static_cast<size_t>(i)]},
                       grid, opts.objective, opts.prior);
    lo_env[static_cast<size_t>(i)] = m.L_hat - c * m.sigma_L / root_n;
    hi_env[static_cast<size_t>(i)] = m.U_hat + c * m.sigma_U / root_n;
  });

  ConfidenceInterval ci;
  ci.method = CiMethod::Method1;
  ci.alpha = alpha;
  ci.gamma = gamma;
  ci.lower = *std::min_element(lo_env.begin(), lo_env.end());
  ci.upper = *std::max_element(hi_env.begin(), hi_env.end());
  ci.diagnostics.c_value = c;
  ci.diagnostics.beta_grid_size = static_cast<int>(beta_grid.size());
  ci.diagnostics.beta_grid_step = step;
  return ci;
}

namespace {

ConfidenceInterval method2_from_estimate(const BoundsEstimate& be, int n,
                                         double alpha, double gamma) {
  const double c = alpha >= 1.0 ? 0.0 : normal_quantile(1.0 - alpha / 4.0);
  const double root_half_n = std::sqrt(n / 2.0);
  ConfidenceInterval ci;
  ci.method = CiMethod::Method2;
  ci.alpha = alpha;
  ci.gamma = gamma;
  const double sl = 0.5 * (be.sigma_L_half[0] + be.sigma_L_half[1]);
  const double su = 0.5 * (be.sigma_U_half[0] + be.sigma_U_half[1]);
  ci.lower = be.L_hat - c * sl / root_half_n;
  ci.upper = be.U_hat + c * su / root_half_n;
  ci.diagnostics.c_value = c;
  ci.diagnostics.sigma_L = sl;
  ci.diagnostics.sigma_U = su;
  ci.diagnostics.set_diameter[0] = be.set_diameter[0];
  ci.diagnostics.set_diameter[1] = be.set_diameter[1];
  ci.diagnostics.degenerate_variance = sl == 0.0 || su == 0.0;
  ci.diagnostics.L_hat = be.L_hat;
  ci.diagnostics.U_hat = be.U_hat;
  return ci;
}

}  // namespace

ConfidenceInterval ci_method2(const PanelDataset& panel, const ModelSpec& model,
                              const EffectSpec& effect, const HeterogeneityGrid& grid,
                              double alpha, double gamma, const BetaEstimator& estimator,
                              const Method2Options& opts) {
  EstimationOptions eopts;
  eopts.threads = opts.threads;
  eopts.prior = opts.prior;
  const BoundsEstimate be = estimate_bounds_crossfit_set(
      panel, model, effect, grid, opts.objective, gamma, estimator, eopts);
  return method2_from_estimate(be, panel.n, alpha, gamma);
}

ConfidenceInterval tradeoff_search_method2(
    const PanelDataset& panel, const ModelSpec& model, const EffectSpec& effect,
    const HeterogeneityGrid& grid, double c_total,
    const std::vector<std::pair<double, double>>& split_grid,
    const BetaEstimator& estimator, const Method2Options& opts) {
  if (split_grid.empty())
    throw std::invalid_argument("tradeoff_search_method2: empty split grid");
  for (const auto& [a, g] : split_grid)
    if (std::abs(a + g - c_total) > 1e-9)
      throw std::invalid_argument(
          "tradeoff_search_method2: every (alpha, gamma) must sum to the total");

  ConfidenceInterval best;
  bool have = false;
  for (const auto& [a, g] : split_grid) {
    ConfidenceInterval ci = ci_method2(panel, model, effect, grid, a, g, estimator, opts);
    if (!have || ci.upper - ci.lower < best.upper - best.lower) {
      best = ci;
      best.diagnostics.winning_alpha = a;
      best.diagnostics.winning_gamma = g;
      have = true;
    }
  }
  return best;
}

}  // namespace pbounds
