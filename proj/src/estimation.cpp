#include "pbounds/estimation.hpp"

#include "pbounds/parallel.hpp"

#include <unordered_map>

namespace pbounds {

namespace {

// per-unit conditional likelihood pieces via DP over periods:
// D = sum over same-count patterns of exp(beta' S_d), plus first and second
// moment accumulators for the gradient and Hessian
struct CondLogitTerms {
  double loglik;
  Vector grad;
  Matrix hess;
};

CondLogitTerms unit_terms(const Matrix& xc, const Eigen::VectorXi& yrow,
                          const Vector& beta) {
  const int T = static_cast<int>(xc.rows());
  const int K = static_cast<int>(xc.cols());
  int k = 0;
  Vector s = Vector::Zero(K);
  for (int t = 0; t < T; ++t)
    if (yrow[t] == 1) {
      ++k;
      s += xc.row(t);
    }

  std::vector<double> d(static_cast<size_t>(k) + 1, 0.0);
  std::vector<Vector> g(static_cast<size_t>(k) + 1, Vector::Zero(K));
  std::vector<Matrix> h(static_cast<size_t>(k) + 1, Matrix::Zero(K, K));
  d[0] = 1.0;
  for (int t = 0; t < T; ++t) {
    const Vector xt = xc.row(t);
    const double w = std::exp(beta.dot(xt));
    for (int j = std::min(k, t + 1); j >= 1; --j) {
      h[j] += w * (h[j - 1] + g[j - 1] * xt.transpose() + xt * g[j - 1].transpose() +
                   d[j - 1] * xt * xt.transpose());
      g[j] += w * (g[j - 1] + d[j - 1] * xt);
      d[j] += w * d[j - 1];
    }
  }
  const double D = d[static_cast<size_t>(k)];
  const Vector mean = g[static_cast<size_t>(k)] / D;
  CondLogitTerms out;
  out.loglik = beta.dot(s) - std::log(D);
  out.grad = s - mean;
  out.hess = -(h[static_cast<size_t>(k)] / D - mean * mean.transpose());
  return out;
}

}  // namespace

void PanelDataset::validate() const {
  if (n < 1 || T < 1 || K < 0)
    throw std::invalid_argument("PanelDataset: bad dimensions");
  if (y.rows() != n || y.cols() != T)
    throw std::invalid_argument("PanelDataset: outcome matrix must be n x T");
  if (x.rows() != static_cast<Index>(n) * T || x.cols() != K)
    throw std::invalid_argument("PanelDataset: covariate array must be (n*T) x K");
  if (y0.size() != 0 && y0.size() != n)
    throw std::invalid_argument("PanelDataset: initial outcomes must cover all units");
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < T; ++t)
      if (y(i, t) != 0 && y(i, t) != 1)
        throw std::invalid_argument("PanelDataset: outcomes must be binary");
  if (!x.allFinite())
    throw std::invalid_argument("PanelDataset: non-finite covariates");
}

BetaEstimate conditional_logit_mle(const PanelDataset& panel,
                                   const std::vector<int>& subset) {
  panel.validate();
  if (subset.empty())
    throw std::invalid_argument("conditional_logit_mle: empty subset");
  if (panel.has_y0())
    throw std::invalid_argument(
        "conditional_logit_mle: static logit only; dynamic models need an "
        "externally supplied parameter");
  const int K = panel.K;
  if (K < 1) throw IdentificationError("conditional_logit_mle: no covariates");

  // informative units: 0 < sum_t y < T; covariates centered within unit
  // (the conditional likelihood is invariant to the shift)
  std::vector<Matrix> xs;
  std::vector<Eigen::VectorXi> ys;
  for (int i : subset) {
    if (i < 0 || i >= panel.n)
      throw std::invalid_argument("conditional_logit_mle: subset index out of range");
    const int k = panel.y.row(i).sum();
    if (k == 0 || k == panel.T) continue;
    Matrix xc = panel.x_unit(i);
    xc.rowwise() -= xc.colwise().mean();
    if (xc.cwiseAbs().maxCoeff() < 1e-14) continue;  // no within variation
    xs.push_back(std::move(xc));
    ys.push_back(panel.y.row(i));
  }
  // canonical accumulation order: the fit depends on the data multiset, not
  // on how the caller happened to arrange the units
  {
    std::vector<size_t> order(xs.size());
    for (size_t u = 0; u < order.size(); ++u) order[u] = u;
    auto key_less = [&](size_t a, size_t b) {
      for (int t = 0; t < panel.T; ++t)
        if (ys[a][t] != ys[b][t]) return ys[a][t] < ys[b][t];
      for (Index r = 0; r < xs[a].size(); ++r)
        if (xs[a](r) != xs[b](r)) return xs[a](r) < xs[b](r);
      return false;
    };
    std::sort(order.begin(), order.end(), key_less);
    std::vector<Matrix> xs2(xs.size());
    std::vector<Eigen::VectorXi> ys2(ys.size());
    for (size_t u = 0; u < order.size(); ++u) {
      xs2[u] = std::move(xs[order[u]]);
      ys2[u] = std::move(ys[order[u]]);
    }
    xs.swap(xs2);
    ys.swap(ys2);
  }
  if (xs.empty())
    throw IdentificationError(
        "conditional_logit_mle: no informative units (every unit has a "
        "constant outcome or constant covariates)");

  BetaEstimate est;
  est.beta = Vector::Zero(K);
  est.n_used = static_cast<int>(xs.size());

  auto evaluate = [&](const Vector& beta, Vector* grad, Matrix* hess) {
    double ll = 0.0;
    if (grad) grad->setZero();
    if (hess) hess->setZero();
    for (size_t u = 0; u < xs.size(); ++u) {
      const CondLogitTerms t = unit_terms(xs[u], ys[u], beta);
      ll += t.loglik;
      if (grad) *grad += t.grad;
      if (hess) *hess += t.hess;
    }
    return ll;
  };

  Vector grad(K);
  Matrix hess(K, K);
  double ll = evaluate(est.beta, &grad, &hess);
  for (est.iterations = 0; est.iterations < 100; ++est.iterations) {
    est.grad_norm = grad.cwiseAbs().maxCoeff();
    if (est.grad_norm <= 1e-8) {
      est.converged = true;
      break;
    }
    Eigen::LDLT<Matrix> ldlt(-hess);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw IdentificationError(
          "conditional_logit_mle: Hessian is singular; parameter not identified");
    const Vector dir = ldlt.solve(grad);
    // step halving with an acceptance slack at the likelihood's own
    // floating-point resolution
    const double slack = 1e-12 * (1.0 + std::abs(ll));
    double step = 1.0;
    Vector trial;
    double ll_new = -std::numeric_limits<double>::infinity();
    for (int half = 0; half < 40; ++half) {
      trial = est.beta + step * dir;
      ll_new = evaluate(trial, nullptr, nullptr);
      if (ll_new > ll - slack) break;
      step *= 0.5;
    }
    est.beta = trial;
    ll = evaluate(est.beta, &grad, &hess);
    if (est.beta.cwiseAbs().maxCoeff() > 50.0) break;  // separation guard
  }
  est.grad_norm = grad.cwiseAbs().maxCoeff();
  est.converged = est.grad_norm <= 1e-8;
  Eigen::LDLT<Matrix> ldlt(-hess);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive())
    est.vcov = ldlt.solve(Matrix::Identity(K, K));
  else
    est.vcov = Matrix::Constant(K, K, std::numeric_limits<double>::quiet_NaN());
  return est;
}

std::pair<std::vector<int>, std::vector<int>> split_half(int n) {
  if (n < 2) throw std::invalid_argument("split_half: need n >= 2");
  std::vector<int> first, second;
  for (int i = 0; i < n / 2; ++i) first.push_back(i);
  for (int i = n / 2; i < n; ++i) second.push_back(i);
  return {first, second};
}

ZGroups ZGroups::build(const PanelDataset& panel) {
  panel.validate();
  ZGroups groups;
  std::unordered_map<std::string, int> index;
  for (int i = 0; i < panel.n; ++i) {
    const ConditioningValue z = panel.z_of(i);
    const std::string key = quantized_z_key(z);
    auto [it, inserted] = index.try_emplace(key, static_cast<int>(groups.distinct.size()));
    if (inserted) {
      groups.distinct.push_back(z);
      groups.units.emplace_back();
      groups.patterns.emplace_back();
    }
    groups.units[static_cast<size_t>(it->second)].push_back(i);
  }
  for (size_t g = 0; g < groups.units.size(); ++g) {
    std::unordered_map<int, int> counts;
    for (int i : groups.units[g]) ++counts[panel.outcome_mask(i)];
    groups.patterns[g].assign(counts.begin(), counts.end());
    std::sort(groups.patterns[g].begin(), groups.patterns[g].end());
  }
  return groups;
}

namespace {

// Solves one bound function per distinct z (in parallel) and returns them
// aligned with groups.distinct.
std::vector<BoundFunction> solve_group_bounds(
    const ZGroups& groups, const ModelSpec& model, const EffectSpec& effect,
    const std::vector<Vector>& betas, const HeterogeneityGrid& grid,
    BoundObjective objective, const Vector& prior, int threads) {
  std::vector<BoundFunction> out(groups.distinct.size());
  parallel_for(static_cast<long long>(groups.distinct.size()), threads,
               [&](long long g) {
                 try {
                   out[static_cast<size_t>(g)] =
                       solve_bound_function(model, effect, groups.distinct[static_cast<size_t>(g)],
                                            betas, grid, objective, prior);
                 } catch (const std::exception& e) {
                   throw std::runtime_error(
                       "bound construction failed at distinct z #" +
                       std::to_string(g) + ": " + e.what());
                 }
               });
  return out;
}

BoundsEstimate aggregate_per_unit(const PanelDataset& panel,
                                  const std::vector<const BoundFunction*>& per_unit_bf) {
  BoundsEstimate est;
  est.per_unit.resize(static_cast<size_t>(panel.n));
  double sl = 0.0, su = 0.0;
  for (int i = 0; i < panel.n; ++i) {
    const int mask = panel.outcome_mask(i);
    const double li = per_unit_bf[static_cast<size_t>(i)]->lower_at(mask);
    const double ui = per_unit_bf[static_cast<size_t>(i)]->upper_at(mask);
    est.per_unit[static_cast<size_t>(i)] = {li, ui};
    est.L_hat += li;
    est.U_hat += ui;
  }
  est.L_hat /= panel.n;
  est.U_hat /= panel.n;
  for (const auto& [li, ui] : est.per_unit) {
    sl += (li - est.L_hat) * (li - est.L_hat);
    su += (ui - est.U_hat) * (ui - est.U_hat);
  }
  est.sigma_L = std::sqrt(sl / panel.n);
  est.sigma_U = std::sqrt(su / panel.n);
  return est;
}

}  // namespace

BoundsEstimate estimate_bounds_known_beta(const PanelDataset& panel,
                                          const ModelSpec& model,
                                          const EffectSpec& effect,
                                          const Vector& beta0,
                                          const HeterogeneityGrid& grid,
                                          BoundObjective objective,
                                          const EstimationOptions& opts) {
  const ZGroups groups = ZGroups::build(panel);
  const std::vector<BoundFunction> bfs =
      solve_group_bounds(groups, model, effect, {beta0}, grid, objective,
                         opts.prior, opts.threads);
  std::vector<const BoundFunction*> per_unit(static_cast<size_t>(panel.n));
  for (size_t g = 0; g < groups.units.size(); ++g)
    for (int i : groups.units[g]) per_unit[static_cast<size_t>(i)] = &bfs[g];
  BoundsEstimate est = aggregate_per_unit(panel, per_unit);
  est.method = BoundsMethod::KnownBeta;
  est.beta_by_half = {beta0, beta0};
  return est;
}

BoundsMoments bounds_moments(const ZGroups& groups, int n, const ModelSpec& model,
                             const EffectSpec& effect, const std::vector<Vector>& betas,
                             const HeterogeneityGrid& grid, BoundObjective objective,
                             const Vector& prior) {
  double sum_l = 0.0, sum_u = 0.0, sum_l2 = 0.0, sum_u2 = 0.0;
  for (size_t g = 0; g < groups.distinct.size(); ++g) {
    const BoundFunction bf = solve_bound_function(model, effect, groups.distinct[g],
                                                  betas, grid, objective, prior);
    for (const auto& [mask, count] : groups.patterns[g]) {
      const double li = bf.lower_at(mask), ui = bf.upper_at(mask);
      sum_l += count * li;
      sum_u += count * ui;
      sum_l2 += count * li * li;
      sum_u2 += count * ui * ui;
    }
  }
  BoundsMoments m;
  m.L_hat = sum_l / n;
  m.U_hat = sum_u / n;
  m.sigma_L = std::sqrt(std::max(0.0, sum_l2 / n - m.L_hat * m.L_hat));
  m.sigma_U = std::sqrt(std::max(0.0, sum_u2 / n - m.U_hat * m.U_hat));
  return m;
}

namespace {

PanelDataset subset_panel(const PanelDataset& panel, const std::vector<int>& idx) {
  PanelDataset sub;
  sub.n = static_cast<int>(idx.size());
  sub.T = panel.T;
  sub.K = panel.K;
  sub.y.resize(sub.n, sub.T);
  sub.x.resize(static_cast<Index>(sub.n) * sub.T, sub.K);
  if (panel.has_y0()) sub.y0.resize(sub.n);
  for (int r = 0; r < sub.n; ++r) {
    const int i = idx[static_cast<size_t>(r)];
    sub.y.row(r) = panel.y.row(i);
    sub.x.block(r * sub.T, 0, sub.T, sub.K) = panel.x_unit(i);
    if (panel.has_y0()) sub.y0[r] = panel.y0[i];
  }
  return sub;
}

std::vector<BetaEstimate> fit_halves(const PanelDataset& panel,
                                     const BetaEstimator& estimator) {
  const auto [first, second] = split_half(panel.n);
  std::vector<BetaEstimate> fits(2);
  const std::vector<int>* halves[2] = {&first, &second};
  for (int s = 0; s < 2; ++s) {
    try {
      fits[static_cast<size_t>(s)] = estimator(panel, *halves[s]);
    } catch (const std::exception& e) {
      throw std::runtime_error("estimation failed on half-sample " +
                               std::to_string(s + 1) + ": " + e.what());
    }
    if (!fits[static_cast<size_t>(s)].converged)
      throw std::runtime_error("estimation did not converge on half-sample " +
                               std::to_string(s + 1));
  }
  return fits;
}

// evaluates every unit at the anchor set assigned to its half
BoundsEstimate crossfit_core(const PanelDataset& panel, const ModelSpec& model,
                             const EffectSpec& effect, const HeterogeneityGrid& grid,
                             BoundObjective objective,
                             const std::vector<std::vector<Vector>>& anchor_by_half,
                             const EstimationOptions& opts) {
  const auto [first, second] = split_half(panel.n);
  const PanelDataset sub1 = subset_panel(panel, first);
  const PanelDataset sub2 = subset_panel(panel, second);
  // units in I1 use the anchor estimated on I2 and vice versa
  const ZGroups g1 = ZGroups::build(sub1);
  const ZGroups g2 = ZGroups::build(sub2);
  const std::vector<BoundFunction> bf1 = solve_group_bounds(
      g1, model, effect, anchor_by_half[1], grid, objective, opts.prior, opts.threads);
  const std::vector<BoundFunction> bf2 = solve_group_bounds(
      g2, model, effect, anchor_by_half[0], grid, objective, opts.prior, opts.threads);

  BoundsEstimate est;
  est.per_unit.resize(static_cast<size_t>(panel.n));
  double half_sum_l[2] = {0, 0}, half_sum_u[2] = {0, 0};
  double half_sum_l2[2] = {0, 0}, half_sum_u2[2] = {0, 0};
  auto accumulate = [&](const PanelDataset& sub, const ZGroups& groups,
                        const std::vector<BoundFunction>& bfs,
                        const std::vector<int>& orig_idx, int s) {
    for (size_t g = 0; g < groups.units.size(); ++g)
      for (int r : groups.units[g]) {
        const int mask = sub.outcome_mask(r);
        const double li = bfs[g].lower_at(mask), ui = bfs[g].upper_at(mask);
        est.per_unit[static_cast<size_t>(orig_idx[static_cast<size_t>(r)])] = {li, ui};
        half_sum_l[s] += li;
        half_sum_u[s] += ui;
        half_sum_l2[s] += li * li;
        half_sum_u2[s] += ui * ui;
      }
  };
  accumulate(sub1, g1, bf1, first, 0);
  accumulate(sub2, g2, bf2, second, 1);

  const double n = panel.n;
  est.L_hat = (half_sum_l[0] + half_sum_l[1]) / n;
  est.U_hat = (half_sum_u[0] + half_sum_u[1]) / n;
  double sl = 0.0, su = 0.0;
  for (const auto& [li, ui] : est.per_unit) {
    sl += (li - est.L_hat) * (li - est.L_hat);
    su += (ui - est.U_hat) * (ui - est.U_hat);
  }
  est.sigma_L = std::sqrt(sl / n);
  est.sigma_U = std::sqrt(su / n);
  // per-half dispersion with the 2/n convention
  for (int s = 0; s < 2; ++s) {
    const double ml = 2.0 * half_sum_l[s] / n, mu = 2.0 * half_sum_u[s] / n;
    est.sigma_L_half[s] = std::sqrt(std::max(0.0, 2.0 * half_sum_l2[s] / n - ml * ml));
    est.sigma_U_half[s] = std::sqrt(std::max(0.0, 2.0 * half_sum_u2[s] / n - mu * mu));
  }
  return est;
}

}  // namespace

BoundsEstimate estimate_bounds_crossfit(const PanelDataset& panel,
                                        const ModelSpec& model,
                                        const EffectSpec& effect,
                                        const HeterogeneityGrid& grid,
                                        BoundObjective objective,
                                        const BetaEstimator& estimator,
                                        const EstimationOptions& opts) {
  const std::vector<BetaEstimate> fits = fit_halves(panel, estimator);
  BoundsEstimate est = crossfit_core(panel, model, effect, grid, objective,
                                     {{fits[0].beta}, {fits[1].beta}}, opts);
  est.method = BoundsMethod::CrossFit;
  est.beta_by_half = {fits[0].beta, fits[1].beta};
  return est;
}

BoundsEstimate estimate_bounds_crossfit_set(
    const PanelDataset& panel, const ModelSpec& model, const EffectSpec& effect,
    const HeterogeneityGrid& grid, BoundObjective objective, double gamma,
    const BetaEstimator& estimator, const EstimationOptions& opts,
    const std::vector<std::vector<Vector>>& override_sets) {
  std::vector<std::vector<Vector>> sets;
  std::vector<Vector> centers;
  if (!override_sets.empty()) {
    if (override_sets.size() != 2)
      throw std::invalid_argument("crossfit_set: need one anchor set per half");
    sets = override_sets;
    for (const auto& s : sets) centers.push_back(s.front());
  } else {
    if (!(gamma > 0.0 && gamma < 1.0))
      throw std::invalid_argument("crossfit_set: gamma must lie in (0,1)");
    const std::vector<BetaEstimate> fits = fit_halves(panel, estimator);
    const int dim = static_cast<int>(fits[0].beta.size());
    const double crit = normal_quantile(1.0 - gamma / (4.0 * dim));
    for (int s = 0; s < 2; ++s) {
      const BetaEstimate& fit = fits[static_cast<size_t>(s)];
      Vector se(dim);
      for (int k = 0; k < dim; ++k) {
        const double var = fit.vcov(k, k);
        if (!std::isfinite(var) || var <= 0.0)
          throw std::runtime_error(
              "crossfit_set: degenerate variance for half-sample " +
              std::to_string(s + 1));
        se[k] = std::sqrt(var);
      }
      // Cartesian product of the per-component interval endpoints
      std::vector<Vector> vertices(static_cast<size_t>(1) << dim, fit.beta);
      for (size_t v = 0; v < vertices.size(); ++v)
        for (int k = 0; k < dim; ++k)
          vertices[v][k] += ((v >> k) & 1 ? crit : -crit) * se[k];
      sets.push_back(std::move(vertices));
      centers.push_back(fit.beta);
    }
  }

  BoundsEstimate est =
      crossfit_core(panel, model, effect, grid, objective, sets, opts);
  est.method = BoundsMethod::CrossFitSet;
  est.beta_by_half = centers;
  est.set_by_half = sets;
  for (int s = 0; s < 2; ++s) {
    double diam = 0.0;
    const auto& vs = sets[static_cast<size_t>(s)];
    for (size_t i = 0; i < vs.size(); ++i)
      for (size_t j = i + 1; j < vs.size(); ++j)
        diam = std::max(diam, (vs[i] - vs[j]).norm());
    est.set_diameter[s] = diam;
  }
  return est;
}

}  // namespace pbounds
