#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pbounds/estimation.hpp"
#include "pbounds/sims.hpp"

using namespace pbounds;

namespace {

// T=2 panel with x = (0,1) for everyone and prescribed outcome counts
PanelDataset two_period_panel(int n01, int n10, int n_uninformative) {
  PanelDataset p;
  p.n = n01 + n10 + n_uninformative;
  p.T = 2;
  p.K = 1;
  p.y.resize(p.n, 2);
  p.x.resize(2 * p.n, 1);
  for (int i = 0; i < p.n; ++i) {
    p.x(2 * i, 0) = 0.0;
    p.x(2 * i + 1, 0) = 1.0;
    if (i < n01) p.y.row(i) << 0, 1;
    else if (i < n01 + n10) p.y.row(i) << 1, 0;
    else p.y.row(i) << 1, 1;
  }
  return p;
}

std::vector<int> all_units(const PanelDataset& p) {
  std::vector<int> idx(static_cast<size_t>(p.n));
  for (int i = 0; i < p.n; ++i) idx[static_cast<size_t>(i)] = i;
  return idx;
}

ModelSpec static_logit(int T) {
  ModelSpec m;
  m.family = Family::StaticBinary;
  m.T = T;
  m.K = 1;
  return m;
}

EffectSpec shift_effect() {
  EffectSpec e;
  e.kind = EffectKind::DiscreteShift;
  return e;
}

Vector vec1(double v) { return Vector::Constant(1, v); }

}  // namespace

TEST_CASE("conditional logit closed form at T=2") {
  // with x = (0,1), Lambda(beta) = n01 / (n01 + n10), so beta = ln 3
  const PanelDataset p = two_period_panel(300, 100, 50);
  const BetaEstimate est = conditional_logit_mle(p, all_units(p));
  CHECK(est.converged);
  CHECK(est.n_used == 400);
  CHECK(std::abs(est.beta[0] - 1.0986122886681098) <= 1e-9);
  CHECK(est.grad_norm <= 1e-8);
  CHECK(est.vcov(0, 0) > 0.0);
  // the information at beta-hat: n * Lambda(1-Lambda) with Lambda = 3/4
  CHECK(est.vcov(0, 0) == doctest::Approx(1.0 / (400 * 0.75 * 0.25)).epsilon(1e-6));
}

TEST_CASE("identification failures") {
  // every unit uninformative
  const PanelDataset p = two_period_panel(0, 0, 80);
  CHECK_THROWS_AS(conditional_logit_mle(p, all_units(p)), IdentificationError);
  // informative outcomes but constant covariates within units
  PanelDataset q = two_period_panel(10, 10, 0);
  q.x.setZero();
  CHECK_THROWS_AS(conditional_logit_mle(q, all_units(q)), IdentificationError);
  CHECK_THROWS_AS(conditional_logit_mle(p, {}), std::invalid_argument);
}

TEST_CASE("conditional logit is consistent on the discrete design") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 4000;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 99;
  const PanelDataset p = generate(dgp);
  const BetaEstimate est = conditional_logit_mle(p, all_units(p));
  CHECK(est.converged);
  const double se = std::sqrt(est.vcov(0, 0));
  CHECK(std::abs(est.beta[0] - 1.0) <= 3.0 * se);
}

TEST_CASE("half split follows the index rule") {
  auto [a5, b5] = split_half(5);
  CHECK(a5 == std::vector<int>({0, 1}));
  CHECK(b5 == std::vector<int>({2, 3, 4}));
  auto [a4, b4] = split_half(4);
  CHECK(a4 == std::vector<int>({0, 1}));
  CHECK(b4 == std::vector<int>({2, 3}));
  auto [a2, b2] = split_half(2);
  CHECK(a2 == std::vector<int>({0}));
  CHECK(b2 == std::vector<int>({1}));
  CHECK_THROWS_AS(split_half(1), std::invalid_argument);
}

TEST_CASE("known-beta bounds aggregate per-unit values") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 300;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 5;
  const PanelDataset p = generate(dgp);
  const ModelSpec m = static_logit(3);
  const HeterogeneityGrid grid = HeterogeneityGrid::scalar(-5, 5, 40, 0);
  const BoundsEstimate be = estimate_bounds_known_beta(
      p, m, shift_effect(), vec1(1.0), grid, BoundObjective::Uniform);
  REQUIRE(static_cast<int>(be.per_unit.size()) == p.n);
  double mean_l = 0.0, mean_u = 0.0;
  for (const auto& [li, ui] : be.per_unit) {
    mean_l += li;
    mean_u += ui;
    CHECK(li <= ui + 1e-9);
  }
  mean_l /= p.n;
  mean_u /= p.n;
  CHECK(be.L_hat == doctest::Approx(mean_l).epsilon(1e-12));
  CHECK(be.U_hat == doctest::Approx(mean_u).epsilon(1e-12));
  // dispersion identity with divisor n
  double s2 = 0.0;
  for (const auto& [li, ui] : be.per_unit) s2 += (li - mean_l) * (li - mean_l);
  CHECK(be.sigma_L * be.sigma_L == doctest::Approx(s2 / p.n).epsilon(1e-12));
  CHECK(be.L_hat <= be.U_hat);

  // the fast aggregate path agrees with the per-unit path
  const BoundsMoments mom = bounds_moments(ZGroups::build(p), p.n, m, shift_effect(),
                                           {vec1(1.0)}, grid, BoundObjective::Uniform);
  CHECK(mom.L_hat == doctest::Approx(be.L_hat).epsilon(1e-12));
  CHECK(mom.sigma_U == doctest::Approx(be.sigma_U).epsilon(1e-10));
}

TEST_CASE("constant bound draws give zero dispersion") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 60;
  dgp.T = 2;
  dgp.beta0 = 0.0;
  const PanelDataset p = generate(dgp);
  const BoundsEstimate be = estimate_bounds_known_beta(
      p, static_logit(2), shift_effect(), vec1(0.0),
      HeterogeneityGrid::scalar(-5, 5, 30, 0), BoundObjective::Uniform);
  CHECK(std::abs(be.L_hat) <= 1e-9);
  CHECK(std::abs(be.U_hat) <= 1e-9);
  CHECK(be.sigma_L <= 1e-9);
  CHECK(be.sigma_U <= 1e-9);
}

TEST_CASE("cross-fit collapses when both halves return the truth") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 200;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 7;
  const PanelDataset p = generate(dgp);
  const ModelSpec m = static_logit(3);
  const HeterogeneityGrid grid = HeterogeneityGrid::scalar(-5, 5, 30, 0);
  const BetaEstimator fixed = [](const PanelDataset&, const std::vector<int>&) {
    BetaEstimate est;
    est.beta = Vector::Constant(1, 1.0);
    est.vcov = Matrix::Constant(1, 1, 0.01);
    est.converged = true;
    return est;
  };
  const BoundsEstimate cf = estimate_bounds_crossfit(p, m, shift_effect(), grid,
                                                     BoundObjective::Uniform, fixed);
  const BoundsEstimate kb = estimate_bounds_known_beta(p, m, shift_effect(), vec1(1.0),
                                                       grid, BoundObjective::Uniform);
  CHECK(cf.L_hat == doctest::Approx(kb.L_hat).epsilon(1e-12));
  CHECK(cf.U_hat == doctest::Approx(kb.U_hat).epsilon(1e-12));
  CHECK(cf.method == BoundsMethod::CrossFit);
}

TEST_CASE("cross-fit averages the two half-sample means") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 4;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 3;
  const PanelDataset p = generate(dgp);
  const ModelSpec m = static_logit(3);
  const HeterogeneityGrid grid = HeterogeneityGrid::scalar(-4, 4, 20, 0);
  int call = 0;
  const BetaEstimator alternating = [&call](const PanelDataset&,
                                            const std::vector<int>&) {
    BetaEstimate est;
    est.beta = Vector::Constant(1, call++ == 0 ? 0.8 : 1.2);
    est.vcov = Matrix::Constant(1, 1, 0.01);
    est.converged = true;
    return est;
  };
  const BoundsEstimate cf = estimate_bounds_crossfit(p, m, shift_effect(), grid,
                                                     BoundObjective::Uniform,
                                                     alternating);
  const double half1 = 0.5 * (cf.per_unit[0].first + cf.per_unit[1].first);
  const double half2 = 0.5 * (cf.per_unit[2].first + cf.per_unit[3].first);
  CHECK(cf.L_hat == doctest::Approx(0.5 * (half1 + half2)).epsilon(1e-12));
  CHECK(cf.beta_by_half[0][0] == doctest::Approx(0.8));
  CHECK(cf.beta_by_half[1][0] == doctest::Approx(1.2));
}

TEST_CASE("cross-fit reports the failing half") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 40;
  dgp.T = 2;
  const PanelDataset p = generate(dgp);
  const BetaEstimator broken = [](const PanelDataset&,
                                  const std::vector<int>& subset) -> BetaEstimate {
    if (subset.front() == 0) throw std::runtime_error("boom");
    BetaEstimate est;
    est.beta = Vector::Constant(1, 1.0);
    est.vcov = Matrix::Constant(1, 1, 0.01);
    est.converged = true;
    return est;
  };
  try {
    estimate_bounds_crossfit(p, static_logit(2), shift_effect(),
                             HeterogeneityGrid::scalar(-3, 3, 10, 0),
                             BoundObjective::Uniform, broken);
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("half-sample 1") != std::string::npos);
  }
}

TEST_CASE("confidence-set vertices use the Bonferroni quantile") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 120;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 21;
  const PanelDataset p = generate(dgp);
  const BetaEstimator unit_se = [](const PanelDataset&, const std::vector<int>&) {
    BetaEstimate est;
    est.beta = Vector::Constant(1, 1.0);
    est.vcov = Matrix::Constant(1, 1, 0.01);  // se = 0.1
    est.converged = true;
    return est;
  };
  const BoundsEstimate be = estimate_bounds_crossfit_set(
      p, static_logit(3), shift_effect(), HeterogeneityGrid::scalar(-4, 4, 20, 0),
      BoundObjective::Uniform, 0.05, unit_se);
  REQUIRE(be.set_by_half.size() == 2);
  REQUIRE(be.set_by_half[0].size() == 2);
  // 1 -/+ 0.1 * z_{0.9875}, z from an independent high-precision table
  const double z = 2.241402727604947;
  CHECK(be.set_by_half[0][0][0] == doctest::Approx(1.0 - 0.1 * z).epsilon(1e-9));
  CHECK(be.set_by_half[0][1][0] == doctest::Approx(1.0 + 0.1 * z).epsilon(1e-9));
  CHECK(be.set_diameter[0] == doctest::Approx(0.2 * z).epsilon(1e-9));
  CHECK(be.method == BoundsMethod::CrossFitSet);
  // every anchor satisfies the bound condition by construction: the wide set
  // weakly widens the estimate relative to the collapsed one
  const BoundsEstimate collapsed = estimate_bounds_crossfit_set(
      p, static_logit(3), shift_effect(), HeterogeneityGrid::scalar(-4, 4, 20, 0),
      BoundObjective::Uniform, 0.05, unit_se, {},
      {{Vector::Constant(1, 1.0)}, {Vector::Constant(1, 1.0)}});
  CHECK(be.L_hat <= collapsed.L_hat + 1e-10);
  CHECK(be.U_hat >= collapsed.U_hat - 1e-10);
}

TEST_CASE("collapsed sets reproduce the plain cross-fit bounds") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 150;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 13;
  const PanelDataset p = generate(dgp);
  const ModelSpec m = static_logit(3);
  const HeterogeneityGrid grid = HeterogeneityGrid::scalar(-4, 4, 25, 0);
  const BetaEstimator fixed = [](const PanelDataset&, const std::vector<int>&) {
    BetaEstimate est;
    est.beta = Vector::Constant(1, 0.9);
    est.vcov = Matrix::Constant(1, 1, 0.04);
    est.converged = true;
    return est;
  };
  const BoundsEstimate plain = estimate_bounds_crossfit(p, m, shift_effect(), grid,
                                                        BoundObjective::Uniform, fixed);
  const BoundsEstimate set = estimate_bounds_crossfit_set(
      p, m, shift_effect(), grid, BoundObjective::Uniform, 0.5, fixed, {},
      {{Vector::Constant(1, 0.9)}, {Vector::Constant(1, 0.9)}});
  CHECK(set.L_hat == doctest::Approx(plain.L_hat).epsilon(1e-12));
  CHECK(set.U_hat == doctest::Approx(plain.U_hat).epsilon(1e-12));
}

TEST_CASE("permuting units within halves leaves the estimate unchanged") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 80;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 31;
  PanelDataset p = generate(dgp);
  const ModelSpec m = static_logit(3);
  const HeterogeneityGrid grid = HeterogeneityGrid::scalar(-4, 4, 20, 0);
  const BoundsEstimate before = estimate_bounds_crossfit(
      p, m, shift_effect(), grid, BoundObjective::Uniform, conditional_logit_mle);

  // reverse each half in place
  auto reverse_block = [&p](int lo, int hi) {
    while (lo < hi) {
      p.y.row(lo).swap(p.y.row(hi));
      for (int t = 0; t < p.T; ++t) p.x.row(lo * p.T + t).swap(p.x.row(hi * p.T + t));
      ++lo;
      --hi;
    }
  };
  reverse_block(0, p.n / 2 - 1);
  reverse_block(p.n / 2, p.n - 1);
  const BoundsEstimate after = estimate_bounds_crossfit(
      p, m, shift_effect(), grid, BoundObjective::Uniform, conditional_logit_mle);
  CHECK(after.L_hat == doctest::Approx(before.L_hat).epsilon(1e-12));
  CHECK(after.U_hat == doctest::Approx(before.U_hat).epsilon(1e-12));
}

TEST_CASE("confidence sets with vector parameters take product vertices") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 100;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 53;
  PanelDataset p = generate(dgp);
  p.K = 2;  // widen with a constant-zero second covariate
  Matrix x2 = Matrix::Zero(p.x.rows(), 2);
  x2.col(0) = p.x;
  p.x = x2;
  ModelSpec m;
  m.family = Family::StaticBinary;
  m.T = 3;
  m.K = 2;
  const BetaEstimator two_dim = [](const PanelDataset&, const std::vector<int>&) {
    BetaEstimate est;
    est.beta = (Vector(2) << 1.0, 0.0).finished();
    est.vcov = (Matrix(2, 2) << 0.01, 0.0, 0.0, 0.04).finished();
    est.converged = true;
    return est;
  };
  EffectSpec e = shift_effect();
  const BoundsEstimate be = estimate_bounds_crossfit_set(
      p, m, e, HeterogeneityGrid::scalar(-4, 4, 15, 0), BoundObjective::Uniform,
      0.05, two_dim);
  REQUIRE(be.set_by_half[0].size() == 4);  // 2^2 box vertices
  const double z = normal_quantile(1.0 - 0.05 / 8.0);  // Bonferroni over 2 dims
  CHECK(be.set_by_half[0][0][0] == doctest::Approx(1.0 - 0.1 * z));
  CHECK(be.set_by_half[0][3][1] == doctest::Approx(0.0 + 0.2 * z));
}
