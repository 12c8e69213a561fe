// Seeded replication harness: panel generation for the shipped DGPs, the
// true-effect oracle, replication pipelines and sweep aggregation.
#pragma once

#include "pbounds/dgp.hpp"
#include "pbounds/idset.hpp"
#include "pbounds/inference.hpp"

namespace pbounds {

PanelDataset generate(const DgpSpec& dgp);

struct TrueEffect {
  double value = 0.0;
  double se = 0.0;  // zero for the quadrature path
  long long draws = 0;
};

struct OracleOptions {
  long long draws = 1'000'000;
  bool quadrature = false;  // nested Gauss-Hermite instead of Monte Carlo
  int gh_nodes = 64;
};

/// m_bar = E[m(Z_i, A_i, beta)] under the DGP's joint law, by Monte Carlo
/// over draws of (Z_i, A_i) on a dedicated stream, or by nested quadrature
/// for the shipped normal-heterogeneity designs.
TrueEffect true_average_effect(const DgpSpec& dgp, const EffectSpec& effect,
                               const OracleOptions& opts = {});

enum class Pipeline {
  KnownBetaBounds,
  CrossFit,
  Method1,
  Method2,
  IdsetPercentile,
  AnalyticCfhn,
};

const char* to_string(Pipeline p);

struct ReplicationSummary {
  int reps = 0;
  int failures = 0;
  double mean_L = 0.0;
  double mean_U = 0.0;
  double sd_L = 0.0;  // cross-replication dispersion of the endpoints
  double sd_U = 0.0;
  double q_low = 0.0;   // 2.5% quantile of per-rep lower endpoints
  double q_high = 0.0;  // 97.5% quantile of per-rep upper endpoints
  double coverage = 0.0;
  double ci_lower = 0.0;  // cross-replication average interval
  double ci_upper = 0.0;
  double m_true = 0.0;
  double m_true_se = 0.0;
};

struct RunOptions {
  double alpha = 0.05;
  double gamma = 0.0;       // Method1 / Method2 budget share
  int threads = 0;
  int beta_grid_size = 500;  // Method 1 desk scale
  double idset_slack = 1e-6;
  int min_cell_count = 5;
  OracleOptions oracle;
  // objective override; negative = family default
  int objective_override = -1;
  BoundObjective objective_for(const ModelSpec& model) const {
    return objective_override < 0 ? default_objective(model.family)
                                  : static_cast<BoundObjective>(objective_override);
  }
};

/// Runs `reps` independent replications (seed = base seed + rep index) of
/// the chosen pipeline and aggregates endpoint means, 2.5/97.5 percentile
/// endpoints, and coverage of the true effect. Per-rep failures are counted
/// and excluded from the aggregates.
ReplicationSummary run_replications(const DgpSpec& dgp, Pipeline pipeline, int reps,
                                    const RunOptions& opts = {});

struct SweepRow {
  double param = 0.0;
  ReplicationSummary summary;
};

/// One summary per parameter value (beta0, A2 or gamma depending on the
/// family).
std::vector<SweepRow> sweep(const DgpSpec& dgp, const std::vector<double>& values,
                            Pipeline pipeline, int reps, const RunOptions& opts = {});

}  // namespace pbounds
