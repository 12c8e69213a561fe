// pbounds: outer bounds and confidence intervals for average effects in
// fixed-effects discrete-choice panels, plus the simulation harness.
#include "pbounds/io.hpp"
#include "pbounds/parallel.hpp"
#include "pbounds/rng.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace pbounds;
using nlohmann::json;

struct ModelCli {
  std::string panel_path;
  std::string dgp_kind;
  int n = 1000, T = 3, x_support = 6;
  double beta0 = 1.0, a2 = 1.0, gamma0 = 1.0;
  std::uint64_t seed = 1;

  std::string family = "static";
  std::string link = "logit";
  std::string effect = "";
  int effect_k = 1;
  double x1 = 1.0, x2 = 0.0;
  std::string eval_rule = "observed";
  double eval_x = 0.0;
  double b_min = 0.0, b_max = 0.0;  // 0,0 = derive defaults
  double beta_box_lo = -2.0, beta_box_hi = 2.0;

  double grid_lo = -5.0, grid_hi = 5.0;
  int grid_n = 100;
  double grid2_lo = -7.0, grid2_hi = 7.0;
  int grid2_n = 50;
  int fine_factor = 10;
  bool grid_custom = false;

  std::string objective = "default";
  std::string beta;  // comma-separated components
  int threads = 0;
};

void add_model_flags(CLI::App* cmd, ModelCli& m, bool needs_data) {
  if (needs_data) {
    cmd->add_option("--panel", m.panel_path, "panel CSV path (long format)");
  }
  cmd->add_option("--dgp", m.dgp_kind,
                  "synthetic design: static-discrete, static-continuous, "
                  "figure1-discrete, rc-static, dynamic-continuous, rc-dynamic");
  cmd->add_option("--n", m.n, "cross-section size for synthetic panels");
  cmd->add_option("--T", m.T, "time periods for synthetic panels");
  cmd->add_option("--beta0", m.beta0, "true slope of the synthetic design");
  cmd->add_option("--a2", m.a2, "mean random slope of the rc designs");
  cmd->add_option("--gamma0", m.gamma0, "state dependence of the dynamic design");
  cmd->add_option("--x-support", m.x_support, "covariate levels of figure1-discrete");
  cmd->add_option("--seed", m.seed, "base seed");

  cmd->add_option("--family", m.family, "static, dynamic, rc-static, rc-dynamic");
  cmd->add_option("--link", m.link, "logit or probit");
  cmd->add_option("--effect", m.effect,
                  "discrete-shift, derivative, rc-shift, transition");
  cmd->add_option("--effect-k", m.effect_k, "covariate index, 1-based");
  cmd->add_option("--x1", m.x1, "discrete-shift treated value");
  cmd->add_option("--x2", m.x2, "discrete-shift control value");
  cmd->add_option("--eval-rule", m.eval_rule, "observed, time-average, fixed");
  cmd->add_option("--eval-x", m.eval_x, "evaluation point for --eval-rule fixed");
  cmd->add_option("--bmin", m.b_min, "known lower range of the effect");
  cmd->add_option("--bmax", m.b_max, "known upper range of the effect");
  cmd->add_option("--beta-box-lo", m.beta_box_lo, "parameter box for default ranges");
  cmd->add_option("--beta-box-hi", m.beta_box_hi, "parameter box for default ranges");

  cmd->add_option("--grid-lo", m.grid_lo, "heterogeneity grid lower end")
      ->each([&m](const std::string&) { m.grid_custom = true; });
  cmd->add_option("--grid-hi", m.grid_hi, "heterogeneity grid upper end")
      ->each([&m](const std::string&) { m.grid_custom = true; });
  cmd->add_option("--grid-n", m.grid_n, "heterogeneity grid points")
      ->each([&m](const std::string&) { m.grid_custom = true; });
  cmd->add_option("--grid2-lo", m.grid2_lo, "second-dimension grid lower end")
      ->each([&m](const std::string&) { m.grid_custom = true; });
  cmd->add_option("--grid2-hi", m.grid2_hi, "second-dimension grid upper end")
      ->each([&m](const std::string&) { m.grid_custom = true; });
  cmd->add_option("--grid2-n", m.grid2_n, "second-dimension grid points")
      ->each([&m](const std::string&) { m.grid_custom = true; });
  cmd->add_option("--fine-factor", m.fine_factor,
                  "fine-grid density multiple for refinement checks");

  cmd->add_option("--objective", m.objective, "baseline, uniform, or default");
  cmd->add_option("--beta", m.beta, "known common parameter, comma-separated");
  cmd->add_option("--threads", m.threads, "worker threads (0 = machine parallelism)")
      ->envname("PBOUNDS_THREADS");
}

DgpKind parse_dgp_kind(const std::string& s) {
  if (s == "static-discrete") return DgpKind::StaticDiscrete;
  if (s == "static-continuous") return DgpKind::StaticContinuous;
  if (s == "figure1-discrete") return DgpKind::Figure1Discrete;
  if (s == "rc-static") return DgpKind::RcStatic;
  if (s == "dynamic-continuous") return DgpKind::DynamicContinuous;
  if (s == "rc-dynamic") return DgpKind::RcDynamic;
  throw std::invalid_argument("unknown --dgp value '" + s + "'");
}

// deterministic pre-split permutation keyed off the seed, for exchangeable
// half-samples on real data
PanelDataset shuffle_panel(const PanelDataset& panel, std::uint64_t seed) {
  const CounterRng rng(seed, 0);
  std::vector<int> order(static_cast<size_t>(panel.n));
  for (int i = 0; i < panel.n; ++i) order[static_cast<size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return rng.word(static_cast<std::uint64_t>(a), Stream::Shuffle, 0) <
           rng.word(static_cast<std::uint64_t>(b), Stream::Shuffle, 0);
  });
  PanelDataset out;
  out.n = panel.n;
  out.T = panel.T;
  out.K = panel.K;
  out.y.resize(panel.n, panel.T);
  out.x.resize(panel.x.rows(), panel.x.cols());
  if (panel.has_y0()) out.y0.resize(panel.n);
  for (int i = 0; i < panel.n; ++i) {
    const int src = order[static_cast<size_t>(i)];
    out.y.row(i) = panel.y.row(src);
    out.x.block(i * panel.T, 0, panel.T, panel.K) = panel.x_unit(src);
    if (panel.has_y0()) out.y0[i] = panel.y0[src];
  }
  return out;
}

DgpSpec dgp_from_cli(const ModelCli& m) {
  DgpSpec dgp;
  dgp.kind = parse_dgp_kind(m.dgp_kind);
  dgp.n = m.n;
  dgp.T = m.T;
  dgp.beta0 = m.beta0;
  dgp.a2 = m.a2;
  dgp.gamma0 = m.gamma0;
  dgp.x_support = m.x_support;
  dgp.seed = m.seed;
  return dgp;
}

struct ResolvedInputs {
  PanelDataset panel;
  ModelSpec model;
  EffectSpec effect;
  HeterogeneityGrid grid;
  BoundObjective objective;
  bool have_dgp = false;
  DgpSpec dgp;
};

ResolvedInputs resolve(const ModelCli& m, bool need_panel) {
  ResolvedInputs r;
  if (!m.dgp_kind.empty()) {
    r.have_dgp = true;
    r.dgp = dgp_from_cli(m);
    r.model = r.dgp.model();
    r.effect = r.dgp.default_effect();
    if (need_panel) r.panel = generate(r.dgp);
  } else if (!m.panel_path.empty()) {
    r.panel = load_panel_csv(m.panel_path);
    if (m.family == "static") r.model.family = Family::StaticBinary;
    else if (m.family == "dynamic") r.model.family = Family::DynamicBinary;
    else if (m.family == "rc-static") r.model.family = Family::RandomCoefStatic;
    else if (m.family == "rc-dynamic") r.model.family = Family::RandomCoefDynamic;
    else throw std::invalid_argument("unknown --family '" + m.family + "'");
    if (m.link == "logit") r.model.link = Link::Logit;
    else if (m.link == "probit") r.model.link = Link::Probit;
    else throw std::invalid_argument("unknown --link '" + m.link + "'");
    r.model.T = r.panel.T;
    r.model.K = r.panel.K;
    if (r.model.is_dynamic() && !r.panel.has_y0())
      throw std::invalid_argument("dynamic family needs a y0 column in the panel");
    if (!r.model.is_dynamic() && r.panel.has_y0())
      throw std::invalid_argument("static family but the panel has a y0 column");
  } else {
    throw std::invalid_argument("provide --panel or --dgp");
  }

  // effect: explicit flags override the design default
  if (!m.effect.empty()) {
    EffectSpec e;
    if (m.effect == "discrete-shift") e.kind = EffectKind::DiscreteShift;
    else if (m.effect == "derivative") e.kind = EffectKind::Derivative;
    else if (m.effect == "rc-shift") e.kind = EffectKind::RandomCoefShift;
    else if (m.effect == "transition") e.kind = EffectKind::TransitionEffect;
    else throw std::invalid_argument("unknown --effect '" + m.effect + "'");
    e.k = m.effect_k - 1;
    e.x1 = m.x1;
    e.x2 = m.x2;
    if (m.eval_rule == "observed") e.eval_rule = EvalPointRule::Observed;
    else if (m.eval_rule == "time-average") e.eval_rule = EvalPointRule::TimeAverage;
    else if (m.eval_rule == "fixed") e.eval_rule = EvalPointRule::Fixed;
    else throw std::invalid_argument("unknown --eval-rule '" + m.eval_rule + "'");
    e.eval_fixed = m.eval_x;
    r.effect = e;
  } else if (!r.have_dgp) {
    throw std::invalid_argument("--effect is required with --panel");
  }
  if (m.b_min != 0.0 || m.b_max != 0.0) {
    r.effect.b_min = m.b_min;
    r.effect.b_max = m.b_max;
  } else if (!r.have_dgp || !m.effect.empty()) {
    const int dim = r.model.common_param_dim();
    const auto [lo, hi] = default_effect_range(
        r.effect, r.model, Vector::Constant(dim, m.beta_box_lo),
        Vector::Constant(dim, m.beta_box_hi));
    r.effect.b_min = lo;
    r.effect.b_max = hi;
  }
  r.effect.validate(r.model);

  if (m.grid_custom) {
    r.grid = r.model.heterogeneity_dim() == 1
                 ? HeterogeneityGrid::scalar(m.grid_lo, m.grid_hi, m.grid_n,
                                             m.fine_factor)
                 : HeterogeneityGrid::random_coef(m.grid_lo, m.grid_hi, m.grid_n,
                                                  m.grid2_lo, m.grid2_hi, m.grid2_n,
                                                  m.fine_factor);
  } else {
    r.grid = HeterogeneityGrid::default_for(r.model);
  }

  if (m.objective == "baseline") r.objective = BoundObjective::Baseline;
  else if (m.objective == "uniform") r.objective = BoundObjective::Uniform;
  else if (m.objective == "default") r.objective = default_objective(r.model.family);
  else throw std::invalid_argument("unknown --objective '" + m.objective + "'");
  return r;
}

Vector beta_from_cli(const ModelCli& m, const ResolvedInputs& r) {
  if (!m.beta.empty()) {
    std::vector<double> parts;
    std::istringstream ss(m.beta);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      try {
        parts.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw std::invalid_argument("--beta: cannot parse '" + tok + "'");
      }
    }
    if (static_cast<int>(parts.size()) != r.model.common_param_dim())
      throw std::invalid_argument("--beta needs " +
                                  std::to_string(r.model.common_param_dim()) +
                                  " components for this family");
    Vector b(static_cast<Index>(parts.size()));
    for (size_t i = 0; i < parts.size(); ++i) b[static_cast<Index>(i)] = parts[i];
    return b;
  }
  if (r.have_dgp) return r.dgp.beta_vector();
  throw std::invalid_argument("supply --beta or use --estimate");
}

void emit(const json& record, const std::string& out_path) {
  const std::string text = record.dump(2) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_text_file(out_path, text);
}

int run(int argc, char** argv) {
  CLI::App app{"outer bounds and confidence intervals for average effects in "
               "discrete-choice panels"};
  app.require_subcommand(1);

  ModelCli m;
  std::string out_path, dump_path, probs_csv, csv_path, bounds_path;
  std::string method = "known";
  std::string pipeline_name = "known-beta-bounds";
  std::string values_csv;
  double alpha = 0.05, gamma = 0.0, slack = 1e-6, c_total = 0.05;
  int reps = 100, beta_grid_size = 5000, min_cell = 5;
  bool estimate = false, population = false, refine = false, shuffle = false;

  app.set_config("--config", "",
                 "read options from a config file with a [subcommand] section; "
                 "command-line flags win");
  app.allow_config_extras(false);

  auto add_common = [&](CLI::App* cmd, bool needs_data) {
    cmd->option_defaults()->always_capture_default();
    add_model_flags(cmd, m, needs_data);
    cmd->add_option("--out", out_path, "write the JSON record here (default stdout)");
    cmd->configurable(true);
    return cmd;
  };

  CLI::App* cmd_bounds = add_common(app.add_subcommand(
      "bounds", "estimate the outer bounds on the average effect"), true);
  cmd_bounds->add_flag("--estimate", estimate,
                       "estimate beta by conditional logit (cross-fit halves)");
  cmd_bounds->add_option("--method", method, "known, crossfit, or crossfit-set");
  cmd_bounds->add_option("--gamma", gamma, "set level for crossfit-set");
  cmd_bounds->add_option("--dump", dump_path, "write solved bound functions here");
  cmd_bounds->add_flag("--refine", refine, "refine on the fine grid before use");
  cmd_bounds->add_flag("--shuffle", shuffle,
                       "seeded unit shuffle before the half-sample split");

  CLI::App* cmd_infer = add_common(app.add_subcommand(
      "infer", "confidence interval on the average effect"), true);
  cmd_infer->add_option("--method", method, "theorem1, method1, method2, "
                        "method2-search");
  cmd_infer->add_option("--alpha", alpha, "sampling error budget");
  cmd_infer->add_option("--gamma", gamma, "parameter-uncertainty budget");
  cmd_infer->add_option("--c-total", c_total, "total budget for method2-search");
  cmd_infer->add_option("--beta-grid-size", beta_grid_size,
                        "method1 grid points over the parameter set");
  cmd_infer->add_flag("--estimate", estimate, "estimate beta by conditional logit");
  cmd_infer->add_flag("--shuffle", shuffle,
                      "seeded unit shuffle before the half-sample split");

  CLI::App* cmd_idset = add_common(app.add_subcommand(
      "idset", "sharp identified set from choice probabilities"), true);
  cmd_idset->add_flag("--population", population,
                      "population probabilities under --dgp instead of the panel");
  cmd_idset->add_option("--slack", slack, "feasibility slack for the grid program");
  cmd_idset->add_option("--min-cell", min_cell, "thin-cell threshold");
  cmd_idset->add_option("--probs-csv", probs_csv, "dump the probability table here");

  CLI::App* cmd_sim = add_common(app.add_subcommand(
      "simulate", "replication study of one design"), false);
  cmd_sim->add_option("--pipeline", pipeline_name,
                      "known-beta-bounds, cross-fit, method1, method2, "
                      "idset-percentile, analytic-cfhn");
  cmd_sim->add_option("--reps", reps, "replications");
  cmd_sim->add_option("--alpha", alpha, "sampling error budget");
  cmd_sim->add_option("--gamma", gamma, "parameter-uncertainty budget");
  cmd_sim->add_option("--beta-grid-size", beta_grid_size, "method1 grid size");
  cmd_sim->add_option("--csv", csv_path, "also write the summary as CSV");

  CLI::App* cmd_sweep = add_common(app.add_subcommand(
      "sweep", "replication study over a parameter list"), false);
  cmd_sweep->add_option("--pipeline", pipeline_name, "pipeline, as for simulate");
  cmd_sweep->add_option("--reps", reps, "replications per value");
  cmd_sweep->add_option("--alpha", alpha, "sampling error budget");
  cmd_sweep->add_option("--gamma", gamma, "parameter-uncertainty budget");
  cmd_sweep->add_option("--beta-grid-size", beta_grid_size, "method1 grid size");
  cmd_sweep->add_option("--values", values_csv, "comma-separated parameter values")
      ->required();
  cmd_sweep->add_option("--csv", csv_path, "figure-data CSV path")->required();

  CLI::App* cmd_true = add_common(app.add_subcommand(
      "true-effect", "oracle average effect of a synthetic design"), false);
  cmd_true->add_option("--draws", reps, "")->default_val(1000000);
  bool quadrature = false;
  cmd_true->add_flag("--quadrature", quadrature, "nested quadrature instead of MC");

  CLI::App* cmd_validate = add_common(app.add_subcommand(
      "validate-bounds", "re-check the bound condition of dumped functions"), false);
  cmd_validate->add_option("--bounds", bounds_path, "bound-function dump")->required();
  bool on_fine = false;
  cmd_validate->add_flag("--fine", on_fine, "check on the fine grid");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::cout << app.help();
      return 0;
    }
    std::cerr << e.what() << "\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string cmd_name = sub->get_name();
  // a sectioned config that reproduces this invocation when fed back via
  // --config (the section also selects the subcommand)
  const std::string config_echo =
      "[" + cmd_name + "]\n" + sub->config_to_str(true, false);

  if (cmd_name == "bounds") {
    ResolvedInputs r = resolve(m, true);
    EstimationOptions eopts;
    eopts.threads = m.threads;
    if (shuffle) r.panel = shuffle_panel(r.panel, m.seed);

    BoundsEstimate be;
    if (method == "known") {
      Vector beta;
      if (estimate) {
        std::vector<int> all(static_cast<size_t>(r.panel.n));
        for (int i = 0; i < r.panel.n; ++i) all[static_cast<size_t>(i)] = i;
        beta = conditional_logit_mle(r.panel, all).beta;
      } else {
        beta = beta_from_cli(m, r);
      }
      be = estimate_bounds_known_beta(r.panel, r.model, r.effect, beta, r.grid,
                                      r.objective, eopts);
    } else if (method == "crossfit") {
      be = estimate_bounds_crossfit(r.panel, r.model, r.effect, r.grid, r.objective,
                                    conditional_logit_mle, eopts);
    } else if (method == "crossfit-set") {
      if (gamma <= 0.0) throw std::invalid_argument("crossfit-set needs --gamma > 0");
      be = estimate_bounds_crossfit_set(r.panel, r.model, r.effect, r.grid,
                                        r.objective, gamma, conditional_logit_mle,
                                        eopts);
    } else {
      throw std::invalid_argument("unknown bounds --method '" + method + "'");
    }

    json payload = to_record(be);
    if (!dump_path.empty()) {
      const ZGroups groups = ZGroups::build(r.panel);
      const std::vector<Vector> betas =
          method == "known" ? std::vector<Vector>{beta_from_cli(m, r)}
                            : std::vector<Vector>{be.beta_by_half[0]};
      std::vector<BoundFunction> bfs;
      for (const ConditioningValue& z : groups.distinct) {
        BoundFunction bf =
            solve_bound_function(r.model, r.effect, z, betas, r.grid, r.objective);
        if (refine)
          bf = refine_to_fine_grid(bf, r.model, r.effect, z, betas,
                                   r.grid.fine_points);
        bfs.push_back(std::move(bf));
      }
      save_bound_functions(bfs, dump_path);
      payload["dump"] = dump_path;
      payload["distinct_z"] = groups.distinct.size();
    }
    emit(result_envelope(cmd_name, config_echo, payload), out_path);
    return 0;
  }

  if (cmd_name == "infer") {
    ResolvedInputs r = resolve(m, true);
    if (shuffle) r.panel = shuffle_panel(r.panel, m.seed);
    ConfidenceInterval ci;
    if (method == "theorem1") {
      Vector beta;
      if (estimate) {  // interval at the fit, ignoring the parameter noise
        std::vector<int> all(static_cast<size_t>(r.panel.n));
        for (int i = 0; i < r.panel.n; ++i) all[static_cast<size_t>(i)] = i;
        beta = conditional_logit_mle(r.panel, all).beta;
      } else {
        beta = beta_from_cli(m, r);
      }
      const BoundsEstimate be = estimate_bounds_known_beta(
          r.panel, r.model, r.effect, beta, r.grid, r.objective, {});
      ci = ci_theorem1(be, r.panel.n, alpha);
      if (ci.diagnostics.degenerate_variance)
        std::cerr << "warning: degenerate variance; interval equals the raw "
                     "bound estimates\n";
    } else if (method == "method1") {
      std::vector<int> all(static_cast<size_t>(r.panel.n));
      for (int i = 0; i < r.panel.n; ++i) all[static_cast<size_t>(i)] = i;
      const BetaEstimate fit = conditional_logit_mle(r.panel, all);
      Method1Options opts;
      opts.beta_grid_size = beta_grid_size;
      opts.objective = r.objective;
      opts.threads = m.threads;
      if (gamma <= 0.0) throw std::invalid_argument("method1 needs --gamma > 0");
      ci = ci_method1(r.panel, r.model, r.effect, r.grid, fit, alpha, gamma, opts);
    } else if (method == "method2") {
      if (gamma <= 0.0) throw std::invalid_argument("method2 needs --gamma > 0");
      Method2Options opts;
      opts.objective = r.objective;
      opts.threads = m.threads;
      ci = ci_method2(r.panel, r.model, r.effect, r.grid, alpha, gamma,
                      conditional_logit_mle, opts);
    } else if (method == "method2-search") {
      Method2Options opts;
      opts.objective = r.objective;
      opts.threads = m.threads;
      const std::vector<std::pair<double, double>> splits = {
          {0.8 * c_total, 0.2 * c_total},
          {0.66 * c_total, 0.34 * c_total},
          {0.5 * c_total, 0.5 * c_total},
          {0.34 * c_total, 0.66 * c_total},
          {0.2 * c_total, 0.8 * c_total}};
      ci = tradeoff_search_method2(r.panel, r.model, r.effect, r.grid, c_total,
                                   splits, conditional_logit_mle, opts);
    } else {
      throw std::invalid_argument("unknown infer --method '" + method + "'");
    }
    emit(result_envelope(cmd_name, config_echo, to_record(ci)), out_path);
    return 0;
  }

  if (cmd_name == "idset") {
    ResolvedInputs r = resolve(m, !population);
    ChoiceProbTable table;
    if (population) {
      if (!r.have_dgp)
        throw std::invalid_argument("idset --population needs --dgp");
      table = population_choice_probs(r.dgp);
    } else {
      table = estimated_choice_probs(r.panel, min_cell);
    }
    if (!probs_csv.empty()) save_choice_prob_csv(table, probs_csv);
    const IdentifiedSet set = sharp_idset(
        table, r.model, r.effect, beta_from_cli(m, r), r.grid, slack,
        population ? SlackPolicy::EscalateThenFail : SlackPolicy::MinimalFeasible);
    json payload = to_record(set);
    payload["cells"] = table.cells.size();
    int thin = 0;
    for (const auto& c : table.cells) thin += c.thin ? 1 : 0;
    payload["thin_cells"] = thin;
    emit(result_envelope(cmd_name, config_echo, payload), out_path);
    return 0;
  }

  if (cmd_name == "simulate" || cmd_name == "sweep") {
    ResolvedInputs r = resolve(m, false);
    if (!r.have_dgp) throw std::invalid_argument(cmd_name + " needs --dgp");
    Pipeline pipeline;
    if (pipeline_name == "known-beta-bounds") pipeline = Pipeline::KnownBetaBounds;
    else if (pipeline_name == "cross-fit") pipeline = Pipeline::CrossFit;
    else if (pipeline_name == "method1") pipeline = Pipeline::Method1;
    else if (pipeline_name == "method2") pipeline = Pipeline::Method2;
    else if (pipeline_name == "idset-percentile") pipeline = Pipeline::IdsetPercentile;
    else if (pipeline_name == "analytic-cfhn") pipeline = Pipeline::AnalyticCfhn;
    else throw std::invalid_argument("unknown --pipeline '" + pipeline_name + "'");

    RunOptions opts;
    opts.alpha = alpha;
    opts.gamma = gamma;
    opts.threads = m.threads;
    opts.beta_grid_size = beta_grid_size;
    opts.idset_slack = slack;
    opts.min_cell_count = min_cell;
    if (m.objective != "default")
      opts.objective_override =
          m.objective == "uniform" ? static_cast<int>(BoundObjective::Uniform)
                                   : static_cast<int>(BoundObjective::Baseline);

    if (cmd_name == "simulate") {
      const ReplicationSummary summary = run_replications(r.dgp, pipeline, reps, opts);
      json payload = to_record(summary);
      payload["dgp"] = to_record(r.dgp);
      payload["pipeline"] = to_string(pipeline);
      if (!csv_path.empty()) {
        SweepRow row;
        row.param = r.dgp.sweep_param();
        row.summary = summary;
        save_sweep_csv({row}, csv_path);
      }
      emit(result_envelope(cmd_name, config_echo, payload), out_path);
    } else {
      std::vector<double> values;
      std::istringstream ss(values_csv);
      std::string tok;
      while (std::getline(ss, tok, ',')) values.push_back(std::stod(tok));
      const std::vector<SweepRow> rows = sweep(r.dgp, values, pipeline, reps, opts);
      save_sweep_csv(rows, csv_path);
      json payload;
      payload["rows"] = rows.size();
      payload["csv"] = csv_path;
      payload["pipeline"] = to_string(pipeline);
      payload["dgp"] = to_record(r.dgp);
      emit(result_envelope(cmd_name, config_echo, payload), out_path);
    }
    return 0;
  }

  if (cmd_name == "true-effect") {
    ResolvedInputs r = resolve(m, false);
    if (!r.have_dgp) throw std::invalid_argument("true-effect needs --dgp");
    OracleOptions opts;
    opts.draws = reps;
    opts.quadrature = quadrature;
    const TrueEffect te = true_average_effect(r.dgp, r.effect, opts);
    json payload = to_record(te);
    payload["dgp"] = to_record(r.dgp);
    emit(result_envelope(cmd_name, config_echo, payload), out_path);
    return 0;
  }

  if (cmd_name == "validate-bounds") {
    ResolvedInputs r = resolve(m, false);
    const std::vector<BoundFunction> bfs = load_bound_functions(bounds_path);
    json reports = json::array();
    double worst = -std::numeric_limits<double>::infinity();
    for (const BoundFunction& bf : bfs) {
      const std::vector<Vector>& pts = on_fine ? r.grid.fine_points : r.grid.points;
      const double violation =
          verify_bound_condition(bf, r.model, r.effect, bf.z, bf.beta_anchor, pts);
      worst = std::max(worst, violation);
      json rec;
      rec["max_violation"] = violation;
      rec["refined"] = bf.refined;
      rec["classes"] = bf.classes.count();
      reports.push_back(rec);
    }
    json payload;
    payload["per_function"] = reports;
    payload["max_violation"] = worst;
    payload["functions"] = bfs.size();
    payload["grid"] = on_fine ? "fine" : "construction";
    emit(result_envelope(cmd_name, config_echo, payload), out_path);
    return 0;
  }

  throw std::invalid_argument("unhandled subcommand");
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const pbounds::IdentificationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
