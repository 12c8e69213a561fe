#include "pbounds/sims.hpp"

#include "pbounds/parallel.hpp"
#include "pbounds/rng.hpp"

#include <atomic>

namespace pbounds {

namespace {

constexpr std::uint64_t kOracleRep = 1ULL << 40;  // disjoint from panel reps

double rc_sd() { return std::sqrt(kRcVariance); }

}  // namespace

const char* to_string(DgpKind k) {
  switch (k) {
    case DgpKind::StaticDiscrete: return "static-discrete";
    case DgpKind::StaticContinuous: return "static-continuous";
    case DgpKind::Figure1Discrete: return "figure1-discrete";
    case DgpKind::RcStatic: return "rc-static";
    case DgpKind::DynamicContinuous: return "dynamic-continuous";
    case DgpKind::RcDynamic: return "rc-dynamic";
  }
  return "?";
}

const char* to_string(Pipeline p) {
  switch (p) {
    case Pipeline::KnownBetaBounds: return "known-beta-bounds";
    case Pipeline::CrossFit: return "cross-fit";
    case Pipeline::Method1: return "method1";
    case Pipeline::Method2: return "method2";
    case Pipeline::IdsetPercentile: return "idset-percentile";
    case Pipeline::AnalyticCfhn: return "analytic-cfhn";
  }
  return "?";
}

void DgpSpec::validate() const {
  if (n < 1) throw std::invalid_argument("DgpSpec: n must be >= 1");
  if (T < 2) throw std::invalid_argument("DgpSpec: T must be >= 2");
  if (kind == DgpKind::Figure1Discrete && x_support < 2)
    throw std::invalid_argument("DgpSpec: covariate support needs >= 2 levels");
}

ModelSpec DgpSpec::model() const {
  ModelSpec m;
  m.link = Link::Logit;
  m.T = T;
  switch (kind) {
    case DgpKind::StaticDiscrete:
    case DgpKind::StaticContinuous:
    case DgpKind::Figure1Discrete:
      m.family = Family::StaticBinary;
      m.K = 1;
      break;
    case DgpKind::RcStatic:
      m.family = Family::RandomCoefStatic;
      m.K = 1;
      break;
    case DgpKind::DynamicContinuous:
      m.family = Family::DynamicBinary;
      m.K = 1;
      break;
    case DgpKind::RcDynamic:
      m.family = Family::RandomCoefDynamic;
      m.K = 0;
      break;
  }
  return m;
}

EffectSpec DgpSpec::default_effect() const {
  EffectSpec e;
  switch (kind) {
    case DgpKind::StaticDiscrete:
    case DgpKind::Figure1Discrete:
      e.kind = EffectKind::DiscreteShift;
      e.x1 = 1.0;
      e.x2 = 0.0;
      e.b_min = -1.0;
      e.b_max = 1.0;
      break;
    case DgpKind::StaticContinuous: {
      e.kind = EffectKind::Derivative;
      e.eval_rule = EvalPointRule::Observed;
      // range from the default parameter box beta in [-2,2] via the
      // peak-density rule; recorded in output metadata
      e.b_min = -0.5;
      e.b_max = 0.5;
      break;
    }
    case DgpKind::RcStatic:
      e.kind = EffectKind::RandomCoefShift;
      e.b_min = -1.0;
      e.b_max = 1.0;
      break;
    case DgpKind::DynamicContinuous:
    case DgpKind::RcDynamic:
      e.kind = EffectKind::TransitionEffect;
      e.b_min = -1.0;
      e.b_max = 1.0;
      break;
  }
  return e;
}

Vector DgpSpec::beta_vector() const {
  switch (kind) {
    case DgpKind::StaticDiscrete:
    case DgpKind::StaticContinuous:
    case DgpKind::Figure1Discrete:
      return Vector::Constant(1, beta0);
    case DgpKind::DynamicContinuous: {
      Vector b(2);
      b << gamma0, beta0;
      return b;
    }
    default:
      return Vector(0);
  }
}

double DgpSpec::sweep_param() const {
  switch (kind) {
    case DgpKind::RcStatic:
    case DgpKind::RcDynamic: return a2;
    case DgpKind::DynamicContinuous: return gamma0;
    default: return beta0;
  }
}

DgpSpec DgpSpec::with_sweep_param(double v) const {
  DgpSpec out = *this;
  switch (kind) {
    case DgpKind::RcStatic:
    case DgpKind::RcDynamic: out.a2 = v; break;
    case DgpKind::DynamicContinuous: out.gamma0 = v; break;
    default: out.beta0 = v; break;
  }
  return out;
}

namespace {

// One unit's heterogeneity and conditioning draw; outcome shocks are drawn
// separately so the true-effect oracle can reuse this.
struct UnitDraw {
  Vector a;
  ConditioningValue z;
};

UnitDraw draw_unit(const CounterRng& rng, const DgpSpec& dgp, std::uint64_t u) {
  UnitDraw d;
  switch (dgp.kind) {
    case DgpKind::StaticDiscrete: {
      d.a = Vector::Constant(1, rng.normal(u, Stream::Alpha));
      Matrix x(dgp.T, 1);
      for (int t = 0; t < dgp.T; ++t)
        x(t, 0) = d.a[0] >= rng.normal(u, Stream::Eta, t) ? 1.0 : 0.0;
      d.z = ConditioningValue::static_cov(std::move(x));
      break;
    }
    case DgpKind::StaticContinuous: {
      d.a = Vector::Constant(1, rng.normal(u, Stream::Alpha));
      Matrix x(dgp.T, 1);
      for (int t = 0; t < dgp.T; ++t)
        x(t, 0) = d.a[0] + rng.normal(u, Stream::Xdraw, t);
      d.z = ConditioningValue::static_cov(std::move(x));
      break;
    }
    case DgpKind::Figure1Discrete: {
      Matrix x(dgp.T, 1);
      for (int t = 0; t < dgp.T; ++t) {
        const int level = std::min(
            dgp.x_support - 1,
            static_cast<int>(rng.uniform(u, Stream::Xdraw, t) * dgp.x_support));
        x(t, 0) = static_cast<double>(level) / (dgp.x_support - 1);
      }
      const double mu = x.col(0).mean() - 0.5;
      d.a = Vector::Constant(1, mu + rng.normal(u, Stream::Alpha));
      d.z = ConditioningValue::static_cov(std::move(x));
      break;
    }
    case DgpKind::RcStatic: {
      d.a.resize(2);
      d.a[0] = rc_sd() * rng.normal(u, Stream::Alpha);
      d.a[1] = dgp.a2 + rc_sd() * rng.normal(u, Stream::Alpha2);
      Matrix x(dgp.T, 1);
      for (int t = 0; t < dgp.T; ++t)
        x(t, 0) = d.a[0] >= rng.normal(u, Stream::Eta, t) ? 1.0 : 0.0;
      d.z = ConditioningValue::static_cov(std::move(x));
      break;
    }
    case DgpKind::DynamicContinuous: {
      d.a = Vector::Constant(1, rng.normal(u, Stream::Alpha));
      const double x0 = d.a[0] + rng.normal(u, Stream::Xdraw, 0);
      Matrix x(dgp.T, 1);
      for (int t = 0; t < dgp.T; ++t)
        x(t, 0) = d.a[0] + rng.normal(u, Stream::Xdraw, t + 1);
      const int y0 =
          x0 * dgp.beta0 + d.a[0] >= rng.logistic(u, Stream::Eps0) ? 1 : 0;
      d.z = ConditioningValue::dynamic_cov(std::move(x), y0);
      break;
    }
    case DgpKind::RcDynamic: {
      d.a.resize(2);
      d.a[0] = rc_sd() * rng.normal(u, Stream::Alpha);
      d.a[1] = dgp.a2 + rc_sd() * rng.normal(u, Stream::Alpha2);
      const int y0 = d.a[0] >= rng.logistic(u, Stream::Eps0) ? 1 : 0;
      d.z = ConditioningValue::dynamic_cov(Matrix(dgp.T, 0), y0);
      break;
    }
  }
  return d;
}

}  // namespace

PanelDataset generate(const DgpSpec& dgp) {
  dgp.validate();
  const CounterRng rng(dgp.seed, 0);
  const ModelSpec model = dgp.model();
  PanelDataset panel;
  panel.n = dgp.n;
  panel.T = dgp.T;
  panel.K = model.K;
  panel.y.resize(dgp.n, dgp.T);
  panel.x.resize(static_cast<Index>(dgp.n) * dgp.T, model.K);
  if (model.is_dynamic()) panel.y0.resize(dgp.n);

  for (int i = 0; i < dgp.n; ++i) {
    const UnitDraw d = draw_unit(rng, dgp, static_cast<std::uint64_t>(i));
    if (model.K > 0) panel.x.block(i * dgp.T, 0, dgp.T, model.K) = d.z.x;
    if (model.is_dynamic()) panel.y0[i] = *d.z.y0;
    int prev = d.z.y0.value_or(0);
    for (int t = 0; t < dgp.T; ++t) {
      double index = 0.0;
      switch (dgp.kind) {
        case DgpKind::StaticDiscrete:
        case DgpKind::StaticContinuous:
        case DgpKind::Figure1Discrete:
          index = d.z.x(t, 0) * dgp.beta0 + d.a[0];
          break;
        case DgpKind::RcStatic:
          index = d.z.x(t, 0) * d.a[1] + d.a[0];
          break;
        case DgpKind::DynamicContinuous:
          index = prev * dgp.gamma0 + d.z.x(t, 0) * dgp.beta0 + d.a[0];
          break;
        case DgpKind::RcDynamic:
          index = prev * d.a[1] + d.a[0];
          break;
      }
      const int yt = index >= rng.logistic(static_cast<std::uint64_t>(i),
                                           Stream::Eps, t)
                         ? 1
                         : 0;
      panel.y(i, t) = yt;
      prev = yt;
    }
  }
  return panel;
}

namespace {

TrueEffect oracle_quadrature(const DgpSpec& dgp, const EffectSpec& effect,
                             int gh_nodes) {
  const GaussHermite gh(gh_nodes);
  const ModelSpec model = dgp.model();
  const Vector beta = dgp.beta_vector();
  TrueEffect out;
  out.draws = 0;

  switch (dgp.kind) {
    case DgpKind::StaticDiscrete:
    case DgpKind::RcStatic:
    case DgpKind::RcDynamic: {
      // the default effects depend on the heterogeneity only; integrate m
      // against its unconditional law (covariates integrate out)
      Matrix xstub = dgp.kind == DgpKind::StaticDiscrete
                         ? Matrix::Zero(dgp.T, 1)
                         : Matrix::Zero(dgp.T, model.K);
      ConditioningValue z = model.is_dynamic()
                                ? ConditioningValue::dynamic_cov(xstub, 0)
                                : ConditioningValue::static_cov(xstub);
      if (model.heterogeneity_dim() == 1) {
        out.value = gh.integrate([&](double a) {
          return effect_m(effect, model, z, Vector::Constant(1, a), beta);
        });
      } else {
        double acc = 0.0;
        for (Index q1 = 0; q1 < gh.nodes.size(); ++q1)
          for (Index q2 = 0; q2 < gh.nodes.size(); ++q2) {
            Vector a(2);
            a[0] = rc_sd() * gh.nodes[q1];
            a[1] = dgp.a2 + rc_sd() * gh.nodes[q2];
            acc += gh.weights[q1] * gh.weights[q2] *
                   effect_m(effect, model, z, a, beta);
          }
        out.value = acc;
      }
      return out;
    }
    case DgpKind::Figure1Discrete: {
      const int S = dgp.x_support;
      if (std::pow(S, dgp.T) > 4096)
        throw std::invalid_argument("true_average_effect: support too large");
      const int total = static_cast<int>(std::pow(S, dgp.T));
      double acc = 0.0;
      for (int cell = 0; cell < total; ++cell) {
        Matrix x(dgp.T, 1);
        int rest = cell;
        for (int t = 0; t < dgp.T; ++t) {
          x(t, 0) = static_cast<double>(rest % S) / (S - 1);
          rest /= S;
        }
        const ConditioningValue z = ConditioningValue::static_cov(x);
        const double mu = x.col(0).mean() - 0.5;
        acc += gh.integrate(
                   [&](double a) {
                     return effect_m(effect, model, z, Vector::Constant(1, a), beta);
                   },
                   mu) /
               total;
      }
      out.value = acc;
      return out;
    }
    case DgpKind::StaticContinuous:
    case DgpKind::DynamicContinuous: {
      // E_a E_{x ~ N(a,1)} m at a single period replicated over t
      const bool dynamic = dgp.kind == DgpKind::DynamicContinuous;
      out.value = gh.integrate([&](double a) {
        return gh.integrate(
            [&](double x) {
              Matrix xm = Matrix::Constant(dgp.T, 1, x);
              ConditioningValue z = dynamic
                                        ? ConditioningValue::dynamic_cov(xm, 0)
                                        : ConditioningValue::static_cov(xm);
              return effect_m(effect, model, z, Vector::Constant(1, a), beta);
            },
            a);
      });
      return out;
    }
  }
  throw std::logic_error("true_average_effect: unhandled kind");
}

}  // namespace

TrueEffect true_average_effect(const DgpSpec& dgp, const EffectSpec& effect,
                               const OracleOptions& opts) {
  dgp.validate();
  effect.validate(dgp.model());
  if (opts.quadrature) return oracle_quadrature(dgp, effect, opts.gh_nodes);

  const CounterRng rng(dgp.seed, kOracleRep);
  const ModelSpec model = dgp.model();
  const Vector beta = dgp.beta_vector();
  const long long draws = std::max<long long>(opts.draws, 1);

  // accumulate in blocks for a deterministic parallel reduction
  const int blocks = 64;
  std::vector<double> sum(blocks, 0.0), sum2(blocks, 0.0);
  parallel_for(blocks, 0, [&](long long b) {
    const long long lo = draws * b / blocks, hi = draws * (b + 1) / blocks;
    double s = 0.0, s2 = 0.0;
    for (long long u = lo; u < hi; ++u) {
      const UnitDraw d = draw_unit(rng, dgp, static_cast<std::uint64_t>(u));
      const double m = effect_m(effect, model, d.z, d.a, beta);
      s += m;
      s2 += m * m;
    }
    sum[static_cast<size_t>(b)] = s;
    sum2[static_cast<size_t>(b)] = s2;
  });
  double s = 0.0, s2 = 0.0;
  for (int b = 0; b < blocks; ++b) {
    s += sum[static_cast<size_t>(b)];
    s2 += sum2[static_cast<size_t>(b)];
  }
  TrueEffect out;
  out.draws = draws;
  out.value = s / draws;
  const double var = std::max(0.0, s2 / draws - out.value * out.value);
  out.se = std::sqrt(var / draws);
  return out;
}

namespace {

struct RepResult {
  bool ok = false;
  double L = 0.0, U = 0.0, ci_lo = 0.0, ci_hi = 0.0;
};

RepResult one_replication(const DgpSpec& dgp, Pipeline pipeline,
                          const RunOptions& opts, const ModelSpec& model,
                          const EffectSpec& effect, const HeterogeneityGrid& grid,
                          int inner_threads) {
  const PanelDataset panel = generate(dgp);
  const BoundObjective objective = opts.objective_for(model);
  EstimationOptions eopts;
  eopts.threads = inner_threads;
  RepResult r;

  switch (pipeline) {
    case Pipeline::KnownBetaBounds: {
      const BoundsEstimate be = estimate_bounds_known_beta(
          panel, model, effect, dgp.beta_vector(), grid, objective, eopts);
      const ConfidenceInterval ci = ci_theorem1(be, panel.n, opts.alpha);
      r = {true, be.L_hat, be.U_hat, ci.lower, ci.upper};
      break;
    }
    case Pipeline::CrossFit: {
      const BoundsEstimate be = estimate_bounds_crossfit(
          panel, model, effect, grid, objective, conditional_logit_mle, eopts);
      const ConfidenceInterval ci = ci_theorem1(be, panel.n, opts.alpha);
      r = {true, be.L_hat, be.U_hat, ci.lower, ci.upper};
      break;
    }
    case Pipeline::Method1: {
      const BetaEstimate fit =
          conditional_logit_mle(panel, [&] {
            std::vector<int> all(static_cast<size_t>(panel.n));
            for (int i = 0; i < panel.n; ++i) all[static_cast<size_t>(i)] = i;
            return all;
          }());
      Method1Options m1;
      m1.beta_grid_size = opts.beta_grid_size;
      m1.objective = objective;
      m1.threads = inner_threads;
      const ConfidenceInterval ci =
          ci_method1(panel, model, effect, grid, fit, opts.alpha, opts.gamma, m1);
      r = {true, ci.diagnostics.L_hat, ci.diagnostics.U_hat, ci.lower, ci.upper};
      // Method 1 has no single bound estimate; report the envelope at the
      // fitted parameter for the endpoint aggregates
      const BoundsMoments m = bounds_moments(ZGroups::build(panel), panel.n, model,
                                             effect, {fit.beta}, grid, objective);
      r.L = m.L_hat;
      r.U = m.U_hat;
      break;
    }
    case Pipeline::Method2: {
      Method2Options m2;
      m2.objective = objective;
      m2.threads = inner_threads;
      const ConfidenceInterval ci = ci_method2(panel, model, effect, grid, opts.alpha,
                                               opts.gamma, conditional_logit_mle, m2);
      r = {true, ci.diagnostics.L_hat, ci.diagnostics.U_hat, ci.lower, ci.upper};
      break;
    }
    case Pipeline::IdsetPercentile: {
      const ChoiceProbTable table =
          estimated_choice_probs(panel, opts.min_cell_count);
      const IdentifiedSet set =
          sharp_idset(table, model, effect, dgp.beta_vector(), grid,
                      opts.idset_slack, SlackPolicy::MinimalFeasible);
      r = {true, set.lower, set.upper, set.lower, set.upper};
      break;
    }
    case Pipeline::AnalyticCfhn: {
      if (model.family != Family::StaticBinary || model.K != 1)
        throw std::invalid_argument(
            "analytic bounds need the binary-covariate static model");
      double sl = 0.0, su = 0.0, sl2 = 0.0, su2 = 0.0;
      for (int i = 0; i < panel.n; ++i) {
        Eigen::VectorXi xi(panel.T);
        for (int t = 0; t < panel.T; ++t) {
          const double xv = panel.x(i * panel.T + t, 0);
          if (xv != 0.0 && xv != 1.0)
            throw std::invalid_argument("analytic bounds need binary covariates");
          xi[t] = static_cast<int>(xv);
        }
        const auto [li, ui] = analytic_cfhn_bounds(xi, panel.y.row(i));
        sl += li;
        su += ui;
        sl2 += li * li;
        su2 += ui * ui;
      }
      const double n = panel.n;
      BoundsEstimate be;
      be.L_hat = sl / n;
      be.U_hat = su / n;
      be.sigma_L = std::sqrt(std::max(0.0, sl2 / n - be.L_hat * be.L_hat));
      be.sigma_U = std::sqrt(std::max(0.0, su2 / n - be.U_hat * be.U_hat));
      const ConfidenceInterval ci = ci_theorem1(be, panel.n, opts.alpha);
      r = {true, be.L_hat, be.U_hat, ci.lower, ci.upper};
      break;
    }
  }
  return r;
}

double quantile_type7(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double idx = p * (static_cast<double>(v.size()) - 1.0);
  const size_t lo = static_cast<size_t>(std::floor(idx));
  const size_t hi = static_cast<size_t>(std::ceil(idx));
  return v[lo] + (idx - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

ReplicationSummary run_replications(const DgpSpec& dgp, Pipeline pipeline, int reps,
                                    const RunOptions& opts) {
  if (reps < 1) throw std::invalid_argument("run_replications: need reps >= 1");
  if ((pipeline == Pipeline::Method1 || pipeline == Pipeline::Method2) &&
      !(opts.gamma > 0.0 && opts.gamma < 1.0))
    throw std::invalid_argument(
        "run_replications: this pipeline needs a gamma budget in (0,1)");
  dgp.validate();
  const ModelSpec model = dgp.model();
  const EffectSpec effect = dgp.default_effect();
  const HeterogeneityGrid grid = HeterogeneityGrid::default_for(model);
  const TrueEffect mt = true_average_effect(dgp, effect, opts.oracle);

  // heavy pipelines parallelize inside a replication, cheap ones across
  const bool inner_parallel =
      pipeline == Pipeline::Method1 || pipeline == Pipeline::Method2;
  const int outer_threads = inner_parallel ? 1 : opts.threads;
  const int inner_threads = inner_parallel ? opts.threads : 1;

  std::vector<RepResult> results(static_cast<size_t>(reps));
  parallel_for(reps, outer_threads, [&](long long rep) {
    DgpSpec rep_spec = dgp;
    rep_spec.seed = dgp.seed + static_cast<std::uint64_t>(rep);
    try {
      results[static_cast<size_t>(rep)] = one_replication(
          rep_spec, pipeline, opts, model, effect, grid, inner_threads);
    } catch (const std::exception&) {
      results[static_cast<size_t>(rep)].ok = false;
    }
  });

  ReplicationSummary s;
  s.reps = reps;
  s.m_true = mt.value;
  s.m_true_se = mt.se;
  std::vector<double> lows, highs;
  int covered = 0, ok = 0;
  for (const RepResult& r : results) {
    if (!r.ok) {
      ++s.failures;
      continue;
    }
    ++ok;
    s.mean_L += r.L;
    s.mean_U += r.U;
    s.ci_lower += r.ci_lo;
    s.ci_upper += r.ci_hi;
    lows.push_back(r.L);
    highs.push_back(r.U);
    if (r.ci_lo - 1e-12 <= mt.value && mt.value <= r.ci_hi + 1e-12) ++covered;
  }
  if (ok > 0) {
    s.mean_L /= ok;
    s.mean_U /= ok;
    s.ci_lower /= ok;
    s.ci_upper /= ok;
    s.coverage = static_cast<double>(covered) / ok;
    s.q_low = quantile_type7(lows, 0.025);
    s.q_high = quantile_type7(highs, 0.975);
    double vl = 0.0, vu = 0.0;
    for (size_t i = 0; i < lows.size(); ++i) {
      vl += (lows[i] - s.mean_L) * (lows[i] - s.mean_L);
      vu += (highs[i] - s.mean_U) * (highs[i] - s.mean_U);
    }
    s.sd_L = std::sqrt(vl / ok);
    s.sd_U = std::sqrt(vu / ok);
  }
  return s;
}

std::vector<SweepRow> sweep(const DgpSpec& dgp, const std::vector<double>& values,
                            Pipeline pipeline, int reps, const RunOptions& opts) {
  if (values.empty()) throw std::invalid_argument("sweep: empty parameter list");
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double v : values) {
    SweepRow row;
    row.param = v;
    row.summary = run_replications(dgp.with_sweep_param(v), pipeline, reps, opts);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pbounds
