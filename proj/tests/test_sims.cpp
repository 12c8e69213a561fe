#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pbounds/sims.hpp"

#include <set>

using namespace pbounds;

TEST_CASE("generation is deterministic in the seed") {
  DgpSpec dgp;
  dgp.kind = DgpKind::RcStatic;
  dgp.n = 200;
  dgp.T = 4;
  dgp.a2 = 0.5;
  dgp.seed = 77;
  const PanelDataset a = generate(dgp);
  const PanelDataset b = generate(dgp);
  CHECK(a.y == b.y);
  CHECK(a.x == b.x);
  dgp.seed = 78;
  const PanelDataset c = generate(dgp);
  CHECK(a.y != c.y);
}

TEST_CASE("figure-1 design uses equidistant covariate levels") {
  DgpSpec dgp;
  dgp.kind = DgpKind::Figure1Discrete;
  dgp.x_support = 6;
  dgp.n = 500;
  dgp.T = 2;
  const PanelDataset p = generate(dgp);
  std::set<double> levels;
  for (Index r = 0; r < p.x.rows(); ++r) levels.insert(p.x(r, 0));
  CHECK(levels == std::set<double>({0.0, 0.2, 0.4, 0.6, 0.8, 1.0}));
}

TEST_CASE("dynamic designs carry initial conditions") {
  DgpSpec dgp;
  dgp.kind = DgpKind::RcDynamic;
  dgp.n = 50;
  dgp.T = 3;
  const PanelDataset p = generate(dgp);
  CHECK(p.has_y0());
  CHECK(p.K == 0);
  dgp.kind = DgpKind::DynamicContinuous;
  dgp.beta0 = 1.0;
  dgp.gamma0 = 0.5;
  const PanelDataset q = generate(dgp);
  CHECK(q.has_y0());
  CHECK(q.K == 1);
}

TEST_CASE("marginal outcome frequency matches the mixture probability") {
  // at beta0 = 0 the outcome is 1{A >= eps} with A standard normal, so the
  // marginal success probability is exactly one half
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 100000;
  dgp.T = 2;
  dgp.beta0 = 0.0;
  dgp.seed = 4;
  const PanelDataset p = generate(dgp);
  const double freq = p.y.cast<double>().mean();
  CHECK(std::abs(freq - 0.5) <= 3.0 * 0.5 / std::sqrt(static_cast<double>(p.n) * p.T));
}

TEST_CASE("true effect oracle") {
  SUBCASE("zero slope means zero effect, exactly") {
    DgpSpec dgp;
    dgp.kind = DgpKind::StaticDiscrete;
    dgp.T = 3;
    dgp.beta0 = 0.0;
    const TrueEffect te = true_average_effect(dgp, dgp.default_effect());
    CHECK(te.value == 0.0);
    CHECK(te.draws == 1000000);
  }
  SUBCASE("centered random slope averages out") {
    DgpSpec dgp;
    dgp.kind = DgpKind::RcStatic;
    dgp.T = 3;
    dgp.a2 = 0.0;
    OracleOptions quad;
    quad.quadrature = true;
    CHECK(std::abs(true_average_effect(dgp, dgp.default_effect(), quad).value) <=
          1e-10);
    const TrueEffect mc = true_average_effect(dgp, dgp.default_effect());
    CHECK(std::abs(mc.value) <= 4.0 * mc.se);
  }
  SUBCASE("golden value for the discrete design at beta0 = 1") {
    // 0.196734670143683 from a 30-digit quadrature of E[Lam(1+A) - Lam(A)]
    DgpSpec dgp;
    dgp.kind = DgpKind::StaticDiscrete;
    dgp.T = 3;
    dgp.beta0 = 1.0;
    OracleOptions quad;
    quad.quadrature = true;
    CHECK(true_average_effect(dgp, dgp.default_effect(), quad).value ==
          doctest::Approx(0.196734670143683).epsilon(1e-10));
    const TrueEffect mc = true_average_effect(dgp, dgp.default_effect());
    CHECK(mc.se <= 5e-4);
    CHECK(std::abs(mc.value - 0.196734670143683) <= 4.0 * mc.se);
  }
  SUBCASE("dynamic transition effect via nested quadrature vs monte carlo") {
    DgpSpec dgp;
    dgp.kind = DgpKind::DynamicContinuous;
    dgp.T = 4;
    dgp.beta0 = 1.0;
    dgp.gamma0 = 1.0;
    OracleOptions quad;
    quad.quadrature = true;
    const double q = true_average_effect(dgp, dgp.default_effect(), quad).value;
    const TrueEffect mc = true_average_effect(dgp, dgp.default_effect());
    CHECK(std::abs(q - mc.value) <= 4.0 * mc.se);
  }
}

TEST_CASE("single-replication summaries expose the replication values") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 150;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 12;
  RunOptions opts;
  opts.oracle.quadrature = true;
  const ReplicationSummary s =
      run_replications(dgp, Pipeline::KnownBetaBounds, 1, opts);
  CHECK(s.reps == 1);
  CHECK(s.failures == 0);
  CHECK(s.mean_L == doctest::Approx(s.q_low));
  CHECK(s.mean_U == doctest::Approx(s.q_high));
  CHECK(s.mean_L <= s.mean_U);
  CHECK(s.ci_lower <= s.mean_L);
  CHECK(s.ci_upper >= s.mean_U);
  const ReplicationSummary again =
      run_replications(dgp, Pipeline::KnownBetaBounds, 1, opts);
  CHECK(s.mean_L == again.mean_L);
  CHECK(s.coverage == again.coverage);
}

TEST_CASE("replication summaries are deterministic and seeded per rep") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 80;
  dgp.T = 2;
  dgp.beta0 = 0.5;
  dgp.seed = 100;
  RunOptions opts;
  opts.threads = 2;
  opts.oracle.quadrature = true;
  const ReplicationSummary a = run_replications(dgp, Pipeline::KnownBetaBounds, 6, opts);
  opts.threads = 1;
  const ReplicationSummary b = run_replications(dgp, Pipeline::KnownBetaBounds, 6, opts);
  CHECK(a.mean_L == b.mean_L);
  CHECK(a.q_high == b.q_high);
  CHECK(a.coverage == b.coverage);

  // the first replication of a shifted base seed equals the second of the
  // original: per-rep seeds are base + index
  DgpSpec shifted = dgp;
  shifted.seed = 101;
  const ReplicationSummary c = run_replications(shifted, Pipeline::KnownBetaBounds, 1, opts);
  const PanelDataset rep2 = generate([&] {
    DgpSpec d = dgp;
    d.seed = 101;
    return d;
  }());
  CHECK(c.reps == 1);
  CHECK(rep2.y == generate(shifted).y);
}

TEST_CASE("analytic pipeline runs on the discrete design") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 400;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 8;
  RunOptions opts;
  opts.oracle.quadrature = true;
  const ReplicationSummary s = run_replications(dgp, Pipeline::AnalyticCfhn, 5, opts);
  CHECK(s.failures == 0);
  CHECK(s.mean_L <= s.m_true);
  CHECK(s.m_true <= s.mean_U);
  // the analytic bounds ignore the model structure and are wide
  CHECK(s.mean_U - s.mean_L > 0.2);
}

TEST_CASE("sweeps aggregate one row per value") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 60;
  dgp.T = 2;
  dgp.seed = 3;
  RunOptions opts;
  opts.oracle.quadrature = true;
  const std::vector<SweepRow> rows =
      sweep(dgp, {-1.0, 0.0, 1.0}, Pipeline::KnownBetaBounds, 2, opts);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].param == -1.0);
  CHECK(rows[1].summary.m_true == doctest::Approx(0.0));
  // the single-value sweep equals run_replications on that value
  const ReplicationSummary direct =
      run_replications(dgp.with_sweep_param(1.0), Pipeline::KnownBetaBounds, 2, opts);
  CHECK(rows[2].summary.mean_L == doctest::Approx(direct.mean_L));
  CHECK_THROWS_AS(sweep(dgp, {}, Pipeline::KnownBetaBounds, 2, opts),
                  std::invalid_argument);
}

TEST_CASE("known-beta interval coverage floor on the discrete design") {
  // nominal 0.95 with Monte Carlo slack 0.03
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 1000;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 2024;
  RunOptions opts;
  opts.alpha = 0.05;
  opts.oracle.quadrature = true;
  opts.threads = 2;
  const ReplicationSummary s =
      run_replications(dgp, Pipeline::KnownBetaBounds, 200, opts);
  CHECK(s.failures == 0);
  CHECK(s.coverage >= 0.92);
  CHECK(s.mean_L <= s.m_true);
  CHECK(s.m_true <= s.mean_U);
  CHECK(s.mean_U - s.mean_L <= 0.05);  // near-point bounds at T=3
}

TEST_CASE("cross-fit bounds sandwich the truth on average") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 1500;
  dgp.T = 3;
  dgp.beta0 = 1.0;
  dgp.seed = 4096;
  RunOptions opts;
  opts.oracle.quadrature = true;
  opts.threads = 2;
  const ReplicationSummary s = run_replications(dgp, Pipeline::CrossFit, 60, opts);
  CHECK(s.failures == 0);
  CHECK(s.mean_L <= s.m_true + 1e-3);
  CHECK(s.m_true <= s.mean_U + 1e-3);
}

TEST_CASE("random-coefficient pipelines cover without common parameters") {
  RunOptions opts;
  opts.alpha = 0.05;
  opts.oracle.quadrature = true;
  opts.threads = 2;

  DgpSpec rcd;
  rcd.kind = DgpKind::RcDynamic;
  rcd.n = 500;
  rcd.T = 3;
  rcd.a2 = 1.0;
  rcd.seed = 512;
  const ReplicationSummary dyn =
      run_replications(rcd, Pipeline::KnownBetaBounds, 200, opts);
  CHECK(dyn.failures == 0);
  CHECK(dyn.coverage >= 0.92);
  CHECK(dyn.mean_L <= dyn.m_true);
  CHECK(dyn.m_true <= dyn.mean_U);

  DgpSpec rcs;
  rcs.kind = DgpKind::RcStatic;
  rcs.n = 400;
  rcs.T = 3;
  rcs.a2 = 1.0;
  rcs.seed = 513;
  const ReplicationSummary st =
      run_replications(rcs, Pipeline::KnownBetaBounds, 200, opts);
  CHECK(st.failures == 0);
  CHECK(st.coverage >= 0.92);
}

TEST_CASE("bounds share the sign of the true effect away from zero") {
  RunOptions opts;
  opts.oracle.quadrature = true;
  opts.threads = 2;
  for (double b0 : {-1.0, 1.0}) {
    const DgpSpec dgp = [&] {
      DgpSpec d;
      d.kind = DgpKind::StaticDiscrete;
      d.n = 600;
      d.T = 3;
      d.beta0 = b0;
      d.seed = 606;
      return d;
    }();
    const ReplicationSummary s =
        run_replications(dgp, Pipeline::KnownBetaBounds, 20, opts);
    CHECK(s.mean_L * s.m_true > 0.0);
    CHECK(s.mean_U * s.m_true > 0.0);
  }
}

TEST_CASE("inference pipelines demand a gamma budget") {
  DgpSpec dgp;
  dgp.kind = DgpKind::StaticDiscrete;
  dgp.n = 40;
  dgp.T = 2;
  CHECK_THROWS_AS(run_replications(dgp, Pipeline::Method1, 2, RunOptions{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_replications(dgp, Pipeline::Method2, 2, RunOptions{}),
                  std::invalid_argument);
}
