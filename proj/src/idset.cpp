#include "pbounds/idset.hpp"

#include "pbounds/parallel.hpp"

#include <sstream>
#include <unordered_map>

namespace pbounds {

namespace {

struct CellLp {
  Matrix f;   // grid x outcomes kernel values
  Vector m;   // effect per grid point
};

CellLp cell_data(const ModelSpec& model, const EffectSpec& effect,
                 const ConditioningValue& z, const Vector& beta0,
                 const HeterogeneityGrid& grid) {
  const Index g = static_cast<Index>(grid.points.size());
  CellLp out;
  out.f.resize(g, outcome_count(model.T));
  out.m.resize(g);
  for (Index i = 0; i < g; ++i) {
    out.f.row(i) = choice_prob_all(model, z, grid.points[static_cast<size_t>(i)], beta0);
    out.m[i] = effect_m(effect, model, z, grid.points[static_cast<size_t>(i)], beta0);
  }
  return out;
}

LinearProgram cell_program(const CellLp& data, const Vector& probs, double slack,
                           bool maximize) {
  const Index g = data.f.rows();
  const Index ny = data.f.cols();
  LinearProgram lp;
  lp.c = maximize ? Vector(-data.m) : data.m;
  lp.a_ub.resize(2 * ny, g);
  lp.b_ub.resize(2 * ny);
  lp.a_ub.topRows(ny) = data.f.transpose();
  lp.a_ub.bottomRows(ny) = -data.f.transpose();
  lp.b_ub.head(ny) = probs.array() + slack;
  lp.b_ub.tail(ny) = slack - probs.array();
  lp.a_eq = Matrix::Ones(1, g);
  lp.b_eq = Vector::Ones(1);
  lp.lo = Vector::Zero(g);
  lp.hi = Vector::Constant(g, std::numeric_limits<double>::infinity());
  return lp;
}

// smallest max-residual over distributions on the grid
double minimal_feasible_slack(const CellLp& data, const Vector& probs) {
  const Index g = data.f.rows();
  const Index ny = data.f.cols();
  LinearProgram lp;
  lp.c = Vector::Zero(g + 1);
  lp.c[g] = 1.0;  // minimize the slack variable
  lp.a_ub.resize(2 * ny, g + 1);
  lp.b_ub.resize(2 * ny);
  lp.a_ub.topRows(ny).leftCols(g) = data.f.transpose();
  lp.a_ub.bottomRows(ny).leftCols(g) = -data.f.transpose();
  lp.a_ub.col(g).setConstant(-1.0);
  lp.b_ub.head(ny) = probs;
  lp.b_ub.tail(ny) = -probs;
  lp.a_eq = Matrix::Zero(1, g + 1);
  lp.a_eq.leftCols(g).setOnes();
  lp.b_eq = Vector::Ones(1);
  lp.lo = Vector::Zero(g + 1);
  lp.hi = Vector::Constant(g + 1, std::numeric_limits<double>::infinity());
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::Optimal)
    throw std::runtime_error("sharp_idset: auxiliary slack program failed");
  return sol.objective;
}

}  // namespace

void ChoiceProbTable::validate() const {
  if (T < 1 || cells.empty())
    throw std::invalid_argument("ChoiceProbTable: empty table");
  double total = 0.0;
  for (const Cell& cell : cells) {
    if (cell.weight < 0.0)
      throw std::invalid_argument("ChoiceProbTable: negative cell weight");
    total += cell.weight;
    if (cell.probs.size() != outcome_count(T))
      throw std::invalid_argument("ChoiceProbTable: probability vector length mismatch");
    if ((cell.probs.array() < -1e-12).any())
      throw std::invalid_argument("ChoiceProbTable: negative probability");
    if (std::abs(cell.probs.sum() - 1.0) > 1e-10)
      throw std::invalid_argument("ChoiceProbTable: cell probabilities must sum to one");
  }
  if (std::abs(total - 1.0) > 1e-10)
    throw std::invalid_argument("ChoiceProbTable: cell weights must sum to one");
}

IdentifiedSet sharp_idset(const ChoiceProbTable& table, const ModelSpec& model,
                          const EffectSpec& effect, const Vector& beta0,
                          const HeterogeneityGrid& grid, double slack,
                          SlackPolicy policy) {
  table.validate();
  effect.validate(model);
  grid.validate(model.heterogeneity_dim());
  if (slack < 0.0) throw std::invalid_argument("sharp_idset: slack must be >= 0");
  if (table.T != model.T)
    throw std::invalid_argument("sharp_idset: table and model disagree on T");

  IdentifiedSet set;
  set.per_z.resize(table.cells.size());
  double used_slack = 0.0;

  for (size_t cidx = 0; cidx < table.cells.size(); ++cidx) {
    const auto& cell = table.cells[cidx];
    const CellLp data = cell_data(model, effect, cell.z, beta0, grid);

    double cell_slack = slack;
    bool used_minimal = false;
    LpSolution lo_sol, hi_sol;
    while (true) {
      lo_sol = solve_lp(cell_program(data, cell.probs, cell_slack, false));
      if (lo_sol.status == LpStatus::Optimal) {
        hi_sol = solve_lp(cell_program(data, cell.probs, cell_slack, true));
        if (hi_sol.status == LpStatus::Optimal) break;
      }
      const LpStatus failed =
          lo_sol.status == LpStatus::Optimal ? hi_sol.status : lo_sol.status;
      if (failed != LpStatus::Infeasible)
        throw std::runtime_error(std::string("sharp_idset: cell solve failed: ") +
                                 to_string(failed));
      if (policy == SlackPolicy::EscalateThenFail && cell_slack < 1e-3) {
        cell_slack = std::min(1e-3, std::max(cell_slack, 1e-9) * 10.0);
        continue;
      }
      const double minimal = minimal_feasible_slack(data, cell.probs);
      if (policy == SlackPolicy::MinimalFeasible && !used_minimal) {
        cell_slack = minimal + 1e-9;
        used_minimal = true;
        continue;
      }
      std::ostringstream msg;
      msg << "sharp_idset: infeasible at slack " << cell_slack << " for cell "
          << cidx << "; minimal feasible slack is " << minimal;
      throw std::runtime_error(msg.str());
    }
    used_slack = std::max(used_slack, cell_slack);
    set.per_z[cidx] = {lo_sol.objective, -hi_sol.objective};
    set.lower += cell.weight * lo_sol.objective;
    set.upper += cell.weight * -hi_sol.objective;
  }
  set.feasibility_slack = used_slack;
  return set;
}

namespace {

// enumerate binary covariate paths with the probability P(X_t = 1 | a1)
void binary_cells(const DgpSpec& dgp, const GaussHermite& gh, double het_sd,
                  bool random_coef, ChoiceProbTable& table) {
  const ModelSpec model = dgp.model();
  const int T = dgp.T;
  const Vector beta = dgp.beta_vector();
  for (int xmask = 0; xmask < (1 << T); ++xmask) {
    Matrix x(T, 1);
    for (int t = 0; t < T; ++t) x(t, 0) = (xmask >> t) & 1;
    const ConditioningValue z = ConditioningValue::static_cov(x);

    Vector probs = Vector::Zero(outcome_count(T));
    double weight = 0.0;
    for (Index q1 = 0; q1 < gh.nodes.size(); ++q1) {
      const double a1 = het_sd * gh.nodes[q1];
      double px = 1.0;  // P(X_i = x | a1), thresholds eta ~ N(0,1)
      for (int t = 0; t < T; ++t) {
        const double p1 = normal_cdf(a1);
        px *= ((xmask >> t) & 1) ? p1 : 1.0 - p1;
      }
      if (!random_coef) {
        Vector a(1);
        a[0] = a1;
        probs += gh.weights[q1] * px * choice_prob_all(model, z, a, beta);
        weight += gh.weights[q1] * px;
      } else {
        for (Index q2 = 0; q2 < gh.nodes.size(); ++q2) {
          Vector a(2);
          a[0] = a1;
          a[1] = dgp.a2 + het_sd * gh.nodes[q2];
          const double w = gh.weights[q1] * gh.weights[q2] * px;
          probs += w * choice_prob_all(model, z, a, beta);
          weight += w;
        }
      }
    }
    if (weight <= 0.0) continue;
    table.cells.push_back({z, weight, probs / weight, 0, false});
  }
}

}  // namespace

ChoiceProbTable population_choice_probs(const DgpSpec& dgp, int gh_nodes,
                                        const std::vector<ConditioningValue>&
                                            condition_on) {
  dgp.validate();
  if (gh_nodes < 8)
    throw std::invalid_argument("population_choice_probs: need at least 8 nodes");
  const GaussHermite gh(gh_nodes);
  const ModelSpec model = dgp.model();
  const Vector beta = dgp.beta_vector();
  ChoiceProbTable table;
  table.T = dgp.T;
  const double rc_sd = std::sqrt(kRcVariance);

  if (!condition_on.empty()) {
    // user-supplied conditioning list: equal weights, probabilities under
    // the unconditional heterogeneity law
    for (const ConditioningValue& z : condition_on) {
      Vector probs = Vector::Zero(outcome_count(dgp.T));
      if (model.heterogeneity_dim() == 1) {
        for (Index q = 0; q < gh.nodes.size(); ++q) {
          Vector a(1);
          a[0] = gh.nodes[q];
          probs += gh.weights[q] * choice_prob_all(model, z, a, beta);
        }
      } else {
        for (Index q1 = 0; q1 < gh.nodes.size(); ++q1)
          for (Index q2 = 0; q2 < gh.nodes.size(); ++q2) {
            Vector a(2);
            a[0] = rc_sd * gh.nodes[q1];
            a[1] = dgp.a2 + rc_sd * gh.nodes[q2];
            probs += gh.weights[q1] * gh.weights[q2] *
                     choice_prob_all(model, z, a, beta);
          }
      }
      table.cells.push_back(
          {z, 1.0 / condition_on.size(), probs, 0, false});
    }
    return table;
  }

  switch (dgp.kind) {
    case DgpKind::StaticDiscrete:
      binary_cells(dgp, gh, 1.0, false, table);
      break;
    case DgpKind::RcStatic:
      binary_cells(dgp, gh, rc_sd, true, table);
      break;
    case DgpKind::Figure1Discrete: {
      const int S = dgp.x_support;
      double combos = std::pow(S, dgp.T);
      if (combos > 4096)
        throw std::invalid_argument(
            "population_choice_probs: covariate support too large to enumerate");
      const int total = static_cast<int>(combos);
      for (int cell = 0; cell < total; ++cell) {
        Matrix x(dgp.T, 1);
        int rest = cell;
        for (int t = 0; t < dgp.T; ++t) {
          x(t, 0) = static_cast<double>(rest % S) / (S - 1);
          rest /= S;
        }
        const ConditioningValue z = ConditioningValue::static_cov(x);
        const double mu = x.col(0).mean() - 0.5;
        Vector probs = Vector::Zero(outcome_count(dgp.T));
        for (Index q = 0; q < gh.nodes.size(); ++q) {
          Vector a(1);
          a[0] = mu + gh.nodes[q];
          probs += gh.weights[q] * choice_prob_all(model, z, a, beta);
        }
        table.cells.push_back({z, 1.0 / total, probs, 0, false});
      }
      break;
    }
    case DgpKind::RcDynamic: {
      for (int y0 = 0; y0 < 2; ++y0) {
        const ConditioningValue z =
            ConditioningValue::dynamic_cov(Matrix(dgp.T, 0), y0);
        Vector probs = Vector::Zero(outcome_count(dgp.T));
        double weight = 0.0;
        for (Index q1 = 0; q1 < gh.nodes.size(); ++q1)
          for (Index q2 = 0; q2 < gh.nodes.size(); ++q2) {
            Vector a(2);
            a[0] = rc_sd * gh.nodes[q1];
            a[1] = dgp.a2 + rc_sd * gh.nodes[q2];
            const double p1 = logistic_cdf(a[0]);  // initial condition
            const double w =
                gh.weights[q1] * gh.weights[q2] * (y0 == 1 ? p1 : 1.0 - p1);
            probs += w * choice_prob_all(model, z, a, beta);
            weight += w;
          }
        table.cells.push_back({z, weight, probs / weight, 0, false});
      }
      break;
    }
    default:
      throw std::invalid_argument(
          "population_choice_probs: continuous conditioning support; supply "
          "an explicit list of values to condition on");
  }
  return table;
}

ChoiceProbTable estimated_choice_probs(const PanelDataset& panel,
                                       int min_cell_count) {
  panel.validate();
  ChoiceProbTable table;
  table.T = panel.T;
  std::unordered_map<std::string, size_t> index;
  std::vector<std::vector<int>> masks;
  for (int i = 0; i < panel.n; ++i) {
    const ConditioningValue z = panel.z_of(i);
    const std::string key = quantized_z_key(z);
    auto [it, inserted] = index.try_emplace(key, table.cells.size());
    if (inserted) {
      table.cells.push_back({z, 0.0, Vector::Zero(outcome_count(panel.T)), 0, false});
      masks.emplace_back();
    }
    masks[it->second].push_back(panel.outcome_mask(i));
  }
  for (size_t c = 0; c < table.cells.size(); ++c) {
    auto& cell = table.cells[c];
    cell.unit_count = static_cast<int>(masks[c].size());
    cell.weight = static_cast<double>(cell.unit_count) / panel.n;
    for (int mask : masks[c]) cell.probs[mask] += 1.0;
    cell.probs /= cell.unit_count;
    cell.thin = cell.unit_count < min_cell_count;
  }
  return table;
}

std::pair<double, double> population_outer_bounds(
    const ChoiceProbTable& table, const ModelSpec& model, const EffectSpec& effect,
    const std::vector<Vector>& betas, const HeterogeneityGrid& grid,
    BoundObjective objective, int threads) {
  table.validate();
  std::vector<std::pair<double, double>> per_cell(table.cells.size());
  parallel_for(static_cast<long long>(table.cells.size()), threads, [&](long long c) {
    const auto& cell = table.cells[static_cast<size_t>(c)];
    const BoundFunction bf =
        solve_bound_function(model, effect, cell.z, betas, grid, objective);
    double lo = 0.0, hi = 0.0;
    for (int mask = 0; mask < cell.probs.size(); ++mask) {
      lo += cell.probs[mask] * bf.lower_at(mask);
      hi += cell.probs[mask] * bf.upper_at(mask);
    }
    per_cell[static_cast<size_t>(c)] = {lo, hi};
  });
  double lo = 0.0, hi = 0.0;
  for (size_t c = 0; c < table.cells.size(); ++c) {
    lo += table.cells[c].weight * per_cell[c].first;
    hi += table.cells[c].weight * per_cell[c].second;
  }
  return {lo, hi};
}

}  // namespace pbounds
