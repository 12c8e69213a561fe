// Scalar link functions and quadrature rules shared across the library.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace pbounds {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Eigen::Index;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

// Logistic CDF, numerically stable on both tails.
template <class Scalar>
Scalar logistic_cdf(Scalar v) {
  if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
  const Scalar e = std::exp(v);
  return e / (Scalar(1) + e);
}

template <class Scalar>
Scalar logistic_pdf(Scalar v) {
  const Scalar p = logistic_cdf(v);
  return p * (Scalar(1) - p);
}

template <class Scalar>
Scalar normal_cdf(Scalar v) {
  return Scalar(0.5) * std::erfc(-v * Scalar(0.70710678118654752440));
}

template <class Scalar>
Scalar normal_pdf(Scalar v) {
  return Scalar(kInvSqrt2Pi) * std::exp(Scalar(-0.5) * v * v);
}

/// Inverse standard normal CDF. Rational initial guess polished by Newton
/// steps against the erfc-based CDF; absolute error below 1e-10 on (0,1).
double normal_quantile(double p);

/// Gauss-Hermite rule in "probabilist" form: sum_i w_i g(x_i) approximates
/// E[g(A)] for A ~ N(0,1). Nodes and weights via Golub-Welsch on the Jacobi
/// matrix of the (physicist) Hermite recurrence.
struct GaussHermite {
  Vector nodes;    // already scaled by sqrt(2)
  Vector weights;  // sum to 1

  explicit GaussHermite(int n);

  // E[g(mu + sigma*A)], A ~ N(0,1)
  template <class F>
  double integrate(F&& g, double mu = 0.0, double sigma = 1.0) const {
    double acc = 0.0;
    for (Index i = 0; i < nodes.size(); ++i)
      acc += weights[i] * g(mu + sigma * nodes[i]);
    return acc;
  }
};

}  // namespace pbounds
