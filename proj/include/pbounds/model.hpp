// Discrete-choice panel kernels f(y|z,a;beta), effect functions m(z,a,beta)
// and their known ranges.
//
// Four families are supported. Outcomes are binary vectors over T periods;
// for the dynamic families the conditioning value carries the initial
// outcome y0. Parameter layout: StaticBinary uses beta in R^K; DynamicBinary
// uses (gamma, beta_1..beta_K) with the state-dependence coefficient first;
// the random-coefficient families have no common parameter (heterogeneity
// carries the slopes).
#pragma once

#include "pbounds/math.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace pbounds {

enum class Family { StaticBinary, DynamicBinary, RandomCoefStatic, RandomCoefDynamic };
enum class Link { Logit, Probit };

struct ModelSpec {
  Family family = Family::StaticBinary;
  Link link = Link::Logit;
  int T = 2;
  int K = 1;

  bool is_dynamic() const {
    return family == Family::DynamicBinary || family == Family::RandomCoefDynamic;
  }
  bool is_random_coef() const {
    return family == Family::RandomCoefStatic || family == Family::RandomCoefDynamic;
  }
  // A_i in R for the fixed-effect families; (A_1, slopes) otherwise. The
  // random-coefficient dynamic model has one random slope on the lag.
  int heterogeneity_dim() const {
    switch (family) {
      case Family::RandomCoefStatic: return 1 + K;
      case Family::RandomCoefDynamic: return 2;
      default: return 1;
    }
  }
  int common_param_dim() const {
    switch (family) {
      case Family::StaticBinary: return K;
      case Family::DynamicBinary: return 1 + K;
      default: return 0;
    }
  }
  void validate() const;
};

// One realized conditioning value Z_i: the covariate path and, for dynamic
// families, the initial outcome.
struct ConditioningValue {
  Matrix x;                 // T x K
  std::optional<int> y0;    // present iff family is dynamic

  static ConditioningValue static_cov(Matrix covariates) {
    return ConditioningValue{std::move(covariates), std::nullopt};
  }
  static ConditioningValue dynamic_cov(Matrix covariates, int initial) {
    return ConditioningValue{std::move(covariates), initial};
  }
};

enum class EffectKind { DiscreteShift, Derivative, RandomCoefShift, TransitionEffect };
enum class EvalPointRule { Observed, TimeAverage, Fixed };

struct EffectSpec {
  EffectKind kind = EffectKind::DiscreteShift;
  int k = 0;           // covariate index the effect refers to
  double x1 = 1.0;     // DiscreteShift contrast values
  double x2 = 0.0;
  EvalPointRule eval_rule = EvalPointRule::Observed;
  double eval_fixed = 0.0;  // x* for EvalPointRule::Fixed
  double b_min = -1.0;
  double b_max = 1.0;

  void validate(const ModelSpec& model) const;
};

double link_cdf(Link link, double v);
double link_pdf(Link link, double v);

// 2^T outcome patterns, encoded with bit t = y_t.
inline int outcome_count(int T) { return 1 << T; }
Eigen::VectorXi outcome_from_mask(std::uint32_t mask, int T);

/// f(y | z, a; beta). Probabilities over all y sum to one.
double choice_prob(const ModelSpec& model, const Eigen::VectorXi& y,
                   const ConditioningValue& z, const Vector& a, const Vector& beta);

/// All 2^T pattern probabilities at once, indexed by outcome mask.
Vector choice_prob_all(const ModelSpec& model, const ConditioningValue& z,
                       const Vector& a, const Vector& beta);

/// The effect function m(z, a, beta) for the given effect kind.
double effect_m(const EffectSpec& effect, const ModelSpec& model,
                const ConditioningValue& z, const Vector& a, const Vector& beta);

/// Supplies (b_min, b_max) when the user does not state them. Shift-type
/// effects are differences of probabilities; derivative effects scale with
/// the slope magnitude times the link density peak.
std::pair<double, double> default_effect_range(const EffectSpec& effect,
                                               const ModelSpec& model,
                                               const Vector& beta_lo,
                                               const Vector& beta_hi);

}  // namespace pbounds
