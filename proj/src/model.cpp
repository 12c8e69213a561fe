#include "pbounds/model.hpp"

#include <sstream>

namespace pbounds {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

void check_finite(const Vector& v, const char* name) {
  if (!v.allFinite())
    throw std::invalid_argument(std::string(name) + ": non-finite entries");
}

// Single-index value for period t given the previous outcome.
double period_index(const ModelSpec& model, const ConditioningValue& z,
                    const Vector& a, const Vector& beta, int t, int y_prev) {
  switch (model.family) {
    case Family::StaticBinary:
      return (model.K > 0 ? z.x.row(t).dot(beta) : 0.0) + a[0];
    case Family::DynamicBinary:
      return beta[0] * y_prev +
             (model.K > 0 ? z.x.row(t).dot(beta.tail(model.K)) : 0.0) + a[0];
    case Family::RandomCoefStatic:
      return a[0] + z.x.row(t).dot(a.tail(model.K));
    case Family::RandomCoefDynamic:
      return a[0] + a[1] * y_prev;
  }
  return 0.0;
}

void check_args(const ModelSpec& model, const ConditioningValue& z,
                const Vector& a, const Vector& beta) {
  model.validate();
  require(z.x.rows() == model.T && z.x.cols() == model.K,
          "choice_prob: covariate matrix must be T x K");
  require(z.y0.has_value() == model.is_dynamic(),
          "choice_prob: y0 must be present iff the family is dynamic");
  if (z.y0) require(*z.y0 == 0 || *z.y0 == 1, "choice_prob: y0 must be binary");
  require(a.size() == model.heterogeneity_dim(),
          "choice_prob: heterogeneity dimension mismatch");
  require(beta.size() == model.common_param_dim(),
          "choice_prob: parameter dimension mismatch");
  check_finite(a, "heterogeneity");
  check_finite(beta, "beta");
  if (!z.x.allFinite())
    throw std::invalid_argument("choice_prob: non-finite covariates");
}

}  // namespace

void ModelSpec::validate() const {
  require(T >= 1, "ModelSpec: T must be >= 1");
  require(K >= 0, "ModelSpec: K must be >= 0");
  if (family == Family::RandomCoefStatic)
    require(K >= 1, "ModelSpec: random-coefficient static model needs K >= 1");
  if (family == Family::RandomCoefDynamic)
    require(K == 0, "ModelSpec: random-coefficient dynamic model has no covariates");
}

void EffectSpec::validate(const ModelSpec& model) const {
  // a degenerate box (b_min == b_max) is allowed: it pins the effect to a
  // constant and the bound program is feasible iff m is that constant
  require(b_min <= b_max, "EffectSpec: b_min must not exceed b_max");
  switch (kind) {
    case EffectKind::DiscreteShift:
    case EffectKind::Derivative:
      require(model.family == Family::StaticBinary,
              "EffectSpec: covariate shift/derivative effects apply to the static binary model");
      require(k >= 0 && k < model.K, "EffectSpec: covariate index out of range");
      break;
    case EffectKind::RandomCoefShift:
      require(model.family == Family::RandomCoefStatic,
              "EffectSpec: RandomCoefShift applies to the random-coefficient static model");
      require(k >= 0 && k < model.K, "EffectSpec: covariate index out of range");
      break;
    case EffectKind::TransitionEffect:
      require(model.family == Family::DynamicBinary ||
                  model.family == Family::RandomCoefDynamic,
              "EffectSpec: TransitionEffect applies to dynamic families");
      break;
  }
}

double link_cdf(Link link, double v) {
  return link == Link::Logit ? logistic_cdf(v) : normal_cdf(v);
}

double link_pdf(Link link, double v) {
  return link == Link::Logit ? logistic_pdf(v) : normal_pdf(v);
}

Eigen::VectorXi outcome_from_mask(std::uint32_t mask, int T) {
  Eigen::VectorXi y(T);
  for (int t = 0; t < T; ++t) y[t] = (mask >> t) & 1;
  return y;
}

double choice_prob(const ModelSpec& model, const Eigen::VectorXi& y,
                   const ConditioningValue& z, const Vector& a, const Vector& beta) {
  check_args(model, z, a, beta);
  require(y.size() == model.T, "choice_prob: outcome length mismatch");
  for (int t = 0; t < model.T; ++t)
    require(y[t] == 0 || y[t] == 1, "choice_prob: outcomes must be binary");

  int y_prev = z.y0.value_or(0);
  if (model.T <= 30) {
    double prob = 1.0;
    for (int t = 0; t < model.T; ++t) {
      const double p = link_cdf(model.link, period_index(model, z, a, beta, t, y_prev));
      prob *= (y[t] == 1) ? p : 1.0 - p;
      y_prev = y[t];
    }
    return prob;
  }
  // log-space accumulation for very long panels
  double logp = 0.0;
  for (int t = 0; t < model.T; ++t) {
    const double p = link_cdf(model.link, period_index(model, z, a, beta, t, y_prev));
    logp += std::log((y[t] == 1) ? p : 1.0 - p);
    y_prev = y[t];
  }
  return std::exp(logp);
}

Vector choice_prob_all(const ModelSpec& model, const ConditioningValue& z,
                       const Vector& a, const Vector& beta) {
  check_args(model, z, a, beta);
  require(model.T <= 20, "choice_prob_all: outcome space too large (T > 20)");
  const int n = outcome_count(model.T);
  Vector probs(n);

  if (!model.is_dynamic()) {
    // Per-period success probabilities do not depend on the path.
    Vector p(model.T);
    for (int t = 0; t < model.T; ++t)
      p[t] = link_cdf(model.link, period_index(model, z, a, beta, t, 0));
    for (int mask = 0; mask < n; ++mask) {
      double prob = 1.0;
      for (int t = 0; t < model.T; ++t)
        prob *= ((mask >> t) & 1) ? p[t] : 1.0 - p[t];
      probs[mask] = prob;
    }
    return probs;
  }

  // Dynamic: success probability depends on the lagged outcome only, so
  // precompute both branches per period.
  Matrix p(model.T, 2);
  for (int t = 0; t < model.T; ++t)
    for (int prev = 0; prev < 2; ++prev)
      p(t, prev) = link_cdf(model.link, period_index(model, z, a, beta, t, prev));
  const int y0 = *z.y0;
  for (int mask = 0; mask < n; ++mask) {
    double prob = 1.0;
    int prev = y0;
    for (int t = 0; t < model.T; ++t) {
      const int yt = (mask >> t) & 1;
      prob *= yt ? p(t, prev) : 1.0 - p(t, prev);
      prev = yt;
    }
    probs[mask] = prob;
  }
  return probs;
}

double effect_m(const EffectSpec& effect, const ModelSpec& model,
                const ConditioningValue& z, const Vector& a, const Vector& beta) {
  check_args(model, z, a, beta);
  effect.validate(model);
  const double invT = 1.0 / model.T;

  switch (effect.kind) {
    case EffectKind::DiscreteShift: {
      double acc = 0.0;
      for (int t = 0; t < model.T; ++t) {
        double base = a[0] + z.x.row(t).dot(beta) - z.x(t, effect.k) * beta[effect.k];
        acc += link_cdf(model.link, base + effect.x1 * beta[effect.k]) -
               link_cdf(model.link, base + effect.x2 * beta[effect.k]);
      }
      return invT * acc;
    }
    case EffectKind::Derivative: {
      double acc = 0.0;
      Eigen::RowVectorXd xbar;
      if (effect.eval_rule == EvalPointRule::TimeAverage)
        xbar = z.x.colwise().mean();
      for (int t = 0; t < model.T; ++t) {
        Eigen::RowVectorXd xt =
            effect.eval_rule == EvalPointRule::TimeAverage ? xbar : z.x.row(t);
        if (effect.eval_rule == EvalPointRule::Fixed) xt[effect.k] = effect.eval_fixed;
        acc += beta[effect.k] * link_pdf(model.link, xt.dot(beta) + a[0]);
      }
      return invT * acc;
    }
    case EffectKind::RandomCoefShift: {
      double acc = 0.0;
      for (int t = 0; t < model.T; ++t) {
        double base = a[0] + z.x.row(t).dot(a.tail(model.K)) -
                      z.x(t, effect.k) * a[1 + effect.k];
        acc += link_cdf(model.link, base + a[1 + effect.k]) -
               link_cdf(model.link, base);
      }
      return invT * acc;
    }
    case EffectKind::TransitionEffect: {
      double acc = 0.0;
      for (int t = 0; t < model.T; ++t) {
        double base, lag;
        if (model.family == Family::DynamicBinary) {
          base = a[0] + (model.K > 0 ? z.x.row(t).dot(beta.tail(model.K)) : 0.0);
          lag = beta[0];
        } else {
          base = a[0];
          lag = a[1];
        }
        acc += link_cdf(model.link, base + lag) - link_cdf(model.link, base);
      }
      return invT * acc;
    }
  }
  return 0.0;
}

std::pair<double, double> default_effect_range(const EffectSpec& effect,
                                               const ModelSpec& model,
                                               const Vector& beta_lo,
                                               const Vector& beta_hi) {
  if (effect.kind != EffectKind::Derivative) return {-1.0, 1.0};

  require(beta_lo.size() == model.common_param_dim() &&
              beta_hi.size() == model.common_param_dim(),
          "default_effect_range: parameter box dimension mismatch");
  if (!beta_lo.allFinite() || !beta_hi.allFinite())
    throw std::invalid_argument(
        "default_effect_range: derivative effects need a finite parameter box; "
        "supply b_min/b_max explicitly otherwise");
  const double beta_bar =
      std::max(std::abs(beta_lo[effect.k]), std::abs(beta_hi[effect.k]));
  const double peak = model.link == Link::Logit ? 0.25 : normal_pdf(0.0);
  return {-beta_bar * peak, beta_bar * peak};
}

}  // namespace pbounds
