// Counter-based random number generation.
//
// Every variate is a pure function of (seed, rep, unit, role, period), so
// replications can be generated in any order or in parallel without stream
// bookkeeping, and a panel regenerated from its seed is bit-identical.
#pragma once

#include "pbounds/math.hpp"

#include <cstdint>

namespace pbounds {

// Variate roles; each (role, period) pair is an independent stream.
enum class Stream : std::uint32_t {
  Eps = 1,       // outcome shock eps_it
  Eta = 2,       // covariate threshold shock eta_it
  Alpha = 3,     // scalar heterogeneity A_i
  Alpha2 = 4,    // random slope A_{2,i}
  Xdraw = 5,     // covariate draw
  Eps0 = 6,      // initial-condition shock
  OracleA = 7,   // true-effect oracle heterogeneity draws
  OracleZ = 8,   // true-effect oracle conditioning draws
  Shuffle = 9,   // pre-split permutation
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

class CounterRng {
 public:
  CounterRng(std::uint64_t base_seed, std::uint64_t rep)
      : key_(detail::splitmix64(detail::splitmix64(base_seed) ^
                                (0xa0761d6478bd642fULL * (rep + 1)))) {}

  std::uint64_t word(std::uint64_t unit, Stream role, std::uint64_t period) const {
    std::uint64_t h = key_;
    h = detail::splitmix64(h ^ (0x8ebc6af09c88c6e3ULL * (unit + 1)));
    h = detail::splitmix64(h ^ (0x589965cc75374cc3ULL *
                                (static_cast<std::uint64_t>(role) + 1)));
    h = detail::splitmix64(h ^ (0x1d8e4e27c47d124fULL * (period + 1)));
    return h;
  }

  // open interval (0,1)
  double uniform(std::uint64_t unit, Stream role, std::uint64_t period = 0) const {
    return (static_cast<double>(word(unit, role, period) >> 11) + 0.5) *
           0x1.0p-53;
  }

  double normal(std::uint64_t unit, Stream role, std::uint64_t period = 0) const {
    return normal_quantile(uniform(unit, role, period));
  }

  double logistic(std::uint64_t unit, Stream role, std::uint64_t period = 0) const {
    const double u = uniform(unit, role, period);
    return std::log(u / (1.0 - u));
  }

 private:
  std::uint64_t key_;
};

}  // namespace pbounds
