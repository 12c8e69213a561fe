// The shipped data-generating processes. Every experiment draws logistic
// outcome shocks; heterogeneity is normal with the displayed laws.
#pragma once

#include "pbounds/model.hpp"

#include <cstdint>

namespace pbounds {

enum class DgpKind {
  StaticDiscrete,     // X_it = 1{A_i >= eta_it}, A_i ~ N(0,1)
  StaticContinuous,   // X_it ~ N(A_i, 1)
  Figure1Discrete,    // X_it uniform on |X| levels, A_i ~ N(mean(X_i) - 1/2, 1)
  RcStatic,           // random slope on a binary covariate
  DynamicContinuous,  // lagged outcome with coefficient gamma0
  RcDynamic,          // random slope on the lagged outcome
};

const char* to_string(DgpKind k);

// variance of the random-coefficient heterogeneity components
inline constexpr double kRcVariance = 0.70710678118654752440;  // 1/sqrt(2)

struct DgpSpec {
  DgpKind kind = DgpKind::StaticDiscrete;
  int n = 1000;
  int T = 3;
  double beta0 = 1.0;    // static families
  double a2 = 1.0;       // mean of the random slope
  double gamma0 = 1.0;   // state dependence (DynamicContinuous)
  int x_support = 6;     // |X| for Figure1Discrete
  std::uint64_t seed = 1;

  ModelSpec model() const;
  EffectSpec default_effect() const;
  Vector beta_vector() const;  // the model's common parameter

  // the swept parameter for this family: beta0, A2, or gamma
  double sweep_param() const;
  DgpSpec with_sweep_param(double v) const;

  void validate() const;
};

}  // namespace pbounds
