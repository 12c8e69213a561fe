#include "pbounds/bounds.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>

namespace pbounds {

namespace {

double quantize12(double v) {
  // stable 12-decimal key component; avoids -0
  double q = std::round(v * 1e12) / 1e12;
  return q == 0.0 ? 0.0 : q;
}

Vector grid_mean(const std::vector<Vector>& betas) {
  Vector mean = Vector::Zero(betas.front().size());
  for (const Vector& b : betas) mean += b;
  return mean / static_cast<double>(betas.size());
}

void check_betas(const ModelSpec& model, const std::vector<Vector>& betas) {
  if (betas.empty())
    throw std::invalid_argument("bound program: anchor set must be nonempty");
  for (const Vector& b : betas) {
    if (b.size() != model.common_param_dim())
      throw std::invalid_argument("bound program: anchor parameter dimension mismatch");
    if (!b.allFinite())
      throw std::invalid_argument("bound program: non-finite anchor parameter");
  }
}

// class-level kernel sums F_c(a, beta) = sum_{y in c} f(y|z,a;beta)
Vector class_kernel(const ModelSpec& model, const ConditioningValue& z,
                    const Vector& a, const Vector& beta, const OutcomeClasses& cls) {
  const Vector probs = choice_prob_all(model, z, a, beta);
  Vector f = Vector::Zero(cls.count());
  for (int mask = 0; mask < probs.size(); ++mask)
    f[cls.class_of[static_cast<size_t>(mask)]] += probs[mask];
  return f;
}

}  // namespace

void HeterogeneityGrid::validate(int dim) const {
  if (points.empty())
    throw std::invalid_argument("HeterogeneityGrid: construction grid is empty");
  for (const Vector& p : points)
    if (p.size() != dim || !p.allFinite())
      throw std::invalid_argument("HeterogeneityGrid: bad grid point");
  for (const Vector& p : fine_points)
    if (p.size() != dim || !p.allFinite())
      throw std::invalid_argument("HeterogeneityGrid: bad fine grid point");
}

static std::vector<Vector> scalar_points(double lo, double hi, int n) {
  std::vector<Vector> pts;
  pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vector p(1);
    p[0] = n == 1 ? lo : lo + (hi - lo) * i / (n - 1.0);
    pts.push_back(p);
  }
  return pts;
}

HeterogeneityGrid HeterogeneityGrid::scalar(double lo, double hi, int n,
                                            int fine_factor) {
  if (n < 1) throw std::invalid_argument("HeterogeneityGrid: need n >= 1");
  HeterogeneityGrid g;
  g.points = scalar_points(lo, hi, n);
  if (fine_factor > 0) g.fine_points = scalar_points(lo, hi, n * fine_factor);
  return g;
}

HeterogeneityGrid HeterogeneityGrid::random_coef(double lo1, double hi1, int n1,
                                                 double lo2, double hi2, int n2,
                                                 int fine_factor) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("HeterogeneityGrid: need n >= 1");
  auto tensor = [&](int m1, int m2) {
    std::vector<Vector> pts;
    pts.reserve(static_cast<size_t>(m1) * m2);
    for (int i = 0; i < m1; ++i)
      for (int j = 0; j < m2; ++j) {
        Vector p(2);
        p[0] = m1 == 1 ? lo1 : lo1 + (hi1 - lo1) * i / (m1 - 1.0);
        p[1] = m2 == 1 ? lo2 : lo2 + (hi2 - lo2) * j / (m2 - 1.0);
        pts.push_back(p);
      }
    return pts;
  };
  HeterogeneityGrid g;
  g.points = tensor(n1, n2);
  if (fine_factor > 0) {
    const double axis = std::sqrt(static_cast<double>(fine_factor));
    g.fine_points = tensor(static_cast<int>(std::lround(n1 * axis)),
                           static_cast<int>(std::lround(n2 * axis)));
  }
  return g;
}

HeterogeneityGrid HeterogeneityGrid::default_for(const ModelSpec& model) {
  if (model.heterogeneity_dim() == 1) return scalar(-5.0, 5.0, 100);
  if (model.heterogeneity_dim() == 2) return random_coef(-5.0, 5.0, 50, -7.0, 7.0, 50);
  throw std::invalid_argument("HeterogeneityGrid: no default for dim > 2");
}

BoundObjective default_objective(Family family) {
  // the worst-case objective is too conservative for the random-coefficient
  // dynamic model; everything else defaults to the uniform program
  return family == Family::RandomCoefDynamic ? BoundObjective::Baseline
                                             : BoundObjective::Uniform;
}

OutcomeClasses OutcomeClasses::identity(int T) {
  OutcomeClasses cls;
  const int n = outcome_count(T);
  cls.class_of.resize(static_cast<size_t>(n));
  cls.members.resize(static_cast<size_t>(n));
  for (int mask = 0; mask < n; ++mask) {
    cls.class_of[static_cast<size_t>(mask)] = mask;
    cls.members[static_cast<size_t>(mask)] = {mask};
  }
  return cls;
}

OutcomeClasses reduce_by_sufficient_statistic(const ModelSpec& model,
                                              const ConditioningValue& z,
                                              const Vector& beta) {
  model.validate();
  (void)beta;  // the partition is common to every beta
  if (model.link != Link::Logit)
    throw UnsupportedReductionError(
        "sufficient-statistic reduction requires the logit link");
  if (model.is_random_coef()) {
    for (Index t = 0; t < z.x.rows(); ++t)
      for (Index k = 0; k < z.x.cols(); ++k)
        if (z.x(t, k) != 0.0 && z.x(t, k) != 1.0)
          throw UnsupportedReductionError(
              "random-coefficient reduction requires binary covariates");
  }

  if (!model.is_random_coef() && beta.size() != model.common_param_dim())
    throw std::invalid_argument("reduction: parameter dimension mismatch");

  // The logit kernel factors as C(z,a) * exp(a * k + c(y)), so outcomes with
  // equal (k, c) have identical kernels for every heterogeneity value. For
  // the fixed-effect families c(y) collects the known-parameter part; for
  // random coefficients the slopes multiply the covariate sums themselves,
  // which therefore enter the signature componentwise.
  const int n = outcome_count(model.T);
  std::map<std::vector<double>, int> seen;
  OutcomeClasses cls;
  cls.class_of.resize(static_cast<size_t>(n));
  for (int mask = 0; mask < n; ++mask) {
    std::vector<double> sig;
    int k = 0;
    for (int t = 0; t < model.T; ++t) k += (mask >> t) & 1;
    sig.push_back(k);

    Eigen::RowVectorXd sx = Eigen::RowVectorXd::Zero(model.K);
    for (int t = 0; t < model.T; ++t)
      if ((mask >> t) & 1) sx += z.x.row(t);
    int lag_sum = 0;
    if (model.is_dynamic()) {
      int prev = *z.y0;
      for (int t = 0; t < model.T; ++t) {
        const int yt = (mask >> t) & 1;
        lag_sum += yt * prev;
        prev = yt;
      }
    }
    if (model.is_random_coef()) {
      for (Index j = 0; j < sx.size(); ++j) sig.push_back(quantize12(sx[j]));
      if (model.is_dynamic()) sig.push_back(lag_sum);
    } else {
      double c = model.family == Family::DynamicBinary
                     ? beta[0] * lag_sum + sx.dot(beta.tail(model.K))
                     : (model.K > 0 ? sx.dot(beta) : 0.0);
      sig.push_back(quantize12(c));
    }
    auto [it, inserted] = seen.try_emplace(std::move(sig), cls.count());
    if (inserted) cls.members.emplace_back();
    cls.class_of[static_cast<size_t>(mask)] = it->second;
    cls.members[static_cast<size_t>(it->second)].push_back(mask);
  }
  return cls;
}

// common refinement: outcomes grouped together by every partition
static OutcomeClasses intersect_partitions(const std::vector<OutcomeClasses>& parts) {
  if (parts.size() == 1) return parts.front();
  const size_t n = parts.front().class_of.size();
  std::map<std::vector<int>, int> seen;
  OutcomeClasses cls;
  cls.class_of.resize(n);
  for (size_t mask = 0; mask < n; ++mask) {
    std::vector<int> key;
    key.reserve(parts.size());
    for (const OutcomeClasses& p : parts) key.push_back(p.class_of[mask]);
    auto [it, inserted] = seen.try_emplace(std::move(key), cls.count());
    if (inserted) cls.members.emplace_back();
    cls.class_of[mask] = it->second;
    cls.members[static_cast<size_t>(it->second)].push_back(static_cast<int>(mask));
  }
  return cls;
}

BoundProgram build_bound_program(const ModelSpec& model, const EffectSpec& effect,
                                 const ConditioningValue& z,
                                 const std::vector<Vector>& betas,
                                 const HeterogeneityGrid& grid,
                                 BoundObjective objective, const Vector& prior,
                                 const OutcomeClasses* classes) {
  effect.validate(model);
  check_betas(model, betas);
  grid.validate(model.heterogeneity_dim());
  if (prior.size() > 0) {
    if (prior.size() != static_cast<Index>(grid.points.size()))
      throw std::invalid_argument("bound program: prior length must match the grid");
    if ((prior.array() < 0.0).any())
      throw std::invalid_argument("bound program: prior weights must be nonnegative");
  }

  BoundProgram prog;
  if (classes) {
    prog.classes = *classes;
  } else {
    try {
      // the partition must be exact for every anchor: intersect per-anchor
      // partitions (identical unless the anchors disagree on ties)
      std::vector<OutcomeClasses> parts;
      for (const Vector& beta : betas)
        parts.push_back(reduce_by_sufficient_statistic(model, z, beta));
      prog.classes = intersect_partitions(parts);
    } catch (const UnsupportedReductionError&) {
      prog.classes = OutcomeClasses::identity(model.T);
    }
  }
  const int C = prog.classes.count();
  const Index n_grid = static_cast<Index>(grid.points.size());
  const Index n_pairs = n_grid * static_cast<Index>(betas.size());
  const bool uniform = objective == BoundObjective::Uniform;
  const Index nv = 2 * C + (uniform ? 1 : 0);
  prog.ell_start = 0;
  prog.u_start = C;
  prog.s_index = uniform ? 2 * C : -1;

  const Vector beta_bar = grid_mean(betas);
  LinearProgram& lp = prog.lp;
  const Index n_rows = C + 2 * n_pairs + (uniform ? n_grid : 0);
  lp.a_ub = Matrix::Zero(n_rows, nv);
  lp.b_ub = Vector::Zero(n_rows);
  lp.c = Vector::Zero(nv);
  lp.lo = Vector::Constant(nv, effect.b_min);
  lp.hi = Vector::Constant(nv, effect.b_max);
  lp.anchor = Vector::Constant(nv, effect.b_min);
  lp.anchor.segment(C, C).setConstant(effect.b_max);
  if (uniform) {
    lp.lo[prog.s_index] = 0.0;
    lp.hi[prog.s_index] = effect.b_max - effect.b_min;
    lp.anchor[prog.s_index] = effect.b_max - effect.b_min;
  }

  Index r = 0;
  for (int c = 0; c < C; ++c, ++r) {  // ell <= u per class
    lp.a_ub(r, c) = 1.0;
    lp.a_ub(r, C + c) = -1.0;
  }
  for (const Vector& beta : betas) {
    for (Index g = 0; g < n_grid; ++g) {
      const Vector f = class_kernel(model, z, grid.points[static_cast<size_t>(g)],
                                    beta, prog.classes);
      const double m = effect_m(effect, model, z, grid.points[static_cast<size_t>(g)], beta);
      lp.a_ub.row(r).head(C) = f.transpose();
      lp.b_ub[r] = m;
      ++r;
      lp.a_ub.row(r).segment(C, C) = -f.transpose();
      lp.b_ub[r] = -m;
      ++r;
    }
  }
  if (uniform) {
    for (Index g = 0; g < n_grid; ++g, ++r) {
      const Vector f = class_kernel(model, z, grid.points[static_cast<size_t>(g)],
                                    beta_bar, prog.classes);
      lp.a_ub.row(r).head(C) = -f.transpose();
      lp.a_ub.row(r).segment(C, C) = f.transpose();
      lp.a_ub(r, prog.s_index) = -1.0;
    }
    lp.c[prog.s_index] = 1.0;
  } else {
    Vector w = Vector::Zero(C);
    for (Index g = 0; g < n_grid; ++g) {
      const double p = prior.size() > 0 ? prior[g] : 1.0;
      if (p == 0.0) continue;
      w += p * class_kernel(model, z, grid.points[static_cast<size_t>(g)], beta_bar,
                            prog.classes);
    }
    lp.c.head(C) = -w;
    lp.c.segment(C, C) = w;
  }
  lp.a_eq = Matrix(0, nv);
  lp.b_eq = Vector(0);
  return prog;
}

BoundFunction solve_bound_function(const ModelSpec& model, const EffectSpec& effect,
                                   const ConditioningValue& z,
                                   const std::vector<Vector>& betas,
                                   const HeterogeneityGrid& grid,
                                   BoundObjective objective, const Vector& prior,
                                   const OutcomeClasses* classes) {
  BoundProgram prog =
      build_bound_program(model, effect, z, betas, grid, objective, prior, classes);
  const LpSolution sol = solve_lp_cutting(prog.lp);
  if (sol.status == LpStatus::Infeasible)
    throw std::runtime_error(
        "bound program reported infeasible; the constant functions at "
        "(b_min, b_max) are always feasible, so this indicates corrupt inputs");
  if (sol.status != LpStatus::Optimal)
    throw std::runtime_error(std::string("bound program solve failed: ") +
                             to_string(sol.status));

  BoundFunction bf;
  bf.classes = std::move(prog.classes);
  const int C = bf.classes.count();
  bf.ell = sol.v.segment(prog.ell_start, C);
  bf.u = sol.v.segment(prog.u_start, C);
  bf.beta_anchor = betas;
  bf.objective_kind = objective;
  bf.b_min = effect.b_min;
  bf.b_max = effect.b_max;
  bf.z = z;
  return bf;
}

BoundFunction refine_to_fine_grid(const BoundFunction& bf, const ModelSpec& model,
                                  const EffectSpec& effect, const ConditioningValue& z,
                                  const std::vector<Vector>& betas,
                                  const std::vector<Vector>& fine_points) {
  BoundFunction out = bf;
  out.refined = true;
  if (fine_points.empty()) return out;

  double shift_lo = 0.0, shift_hi = 0.0;
  for (const Vector& beta : betas) {
    for (const Vector& a : fine_points) {
      const Vector f = class_kernel(model, z, a, beta, bf.classes);
      const double m = effect_m(effect, model, z, a, beta);
      shift_lo = std::min(shift_lo, m - f.dot(bf.ell));
      shift_hi = std::max(shift_hi, m - f.dot(bf.u));
    }
  }
  out.ell = bf.ell.array() + shift_lo;
  out.u = bf.u.array() + shift_hi;

  // A shift past the admissible box collapses that side to the worst-case
  // constant, the only in-box function that is valid without re-solving.
  const double eps = 1e-12;
  if (out.ell.minCoeff() < bf.b_min - eps) {
    out.ell.setConstant(bf.b_min);
    out.box_capped = true;
  } else {
    out.ell = out.ell.cwiseMax(bf.b_min);
  }
  if (out.u.maxCoeff() > bf.b_max + eps) {
    out.u.setConstant(bf.b_max);
    out.box_capped = true;
  } else {
    out.u = out.u.cwiseMin(bf.b_max);
  }
  return out;
}

double verify_bound_condition(const BoundFunction& bf, const ModelSpec& model,
                              const EffectSpec& effect, const ConditioningValue& z,
                              const std::vector<Vector>& betas,
                              const std::vector<Vector>& points) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const Vector& beta : betas) {
    for (const Vector& a : points) {
      const Vector f = class_kernel(model, z, a, beta, bf.classes);
      const double m = effect_m(effect, model, z, a, beta);
      worst = std::max(worst, f.dot(bf.ell) - m);
      worst = std::max(worst, m - f.dot(bf.u));
    }
  }
  return worst;
}

std::pair<double, double> analytic_cfhn_bounds(const Eigen::VectorXi& x,
                                               const Eigen::VectorXi& y) {
  if (x.size() != y.size() || x.size() < 1)
    throw std::invalid_argument("analytic_cfhn_bounds: x and y must share length >= 1");
  for (Index t = 0; t < x.size(); ++t)
    if ((x[t] != 0 && x[t] != 1) || (y[t] != 0 && y[t] != 1))
      throw std::invalid_argument("analytic_cfhn_bounds: inputs must be binary");

  double ybar[2] = {0.0, 0.0};
  int count[2] = {0, 0};
  for (Index t = 0; t < x.size(); ++t) {
    ybar[x[t]] += y[t];
    ++count[x[t]];
  }
  const double v0 = count[0] > 0 ? 1.0 : 0.0;
  const double v1 = count[1] > 0 ? 1.0 : 0.0;
  if (count[0] > 0) ybar[0] /= count[0];
  if (count[1] > 0) ybar[1] /= count[1];

  const double core = v1 * ybar[1] - v0 * ybar[0];
  return {core - (1.0 - v0), core + (1.0 - v1)};
}

std::string quantized_z_key(const ConditioningValue& z) {
  std::ostringstream key;
  key << z.x.rows() << 'x' << z.x.cols() << ';';
  if (z.y0) key << "y0=" << *z.y0 << ';';
  char buf[32];
  for (Index t = 0; t < z.x.rows(); ++t)
    for (Index k = 0; k < z.x.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.12e,", quantize12(z.x(t, k)));
      key << buf;
    }
  return key.str();
}

std::shared_ptr<const BoundFunction> BoundFunctionCache::get(
    const ConditioningValue& z, const Builder& builder) {
  const std::string key = quantized_z_key(z);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = map_.find(key);
    if (it != map_.end()) return it->second;
  }
  auto built = std::make_shared<const BoundFunction>(builder(z));
  std::lock_guard<std::mutex> lock(mu_);
  auto [it, inserted] = map_.try_emplace(key, built);
  return it->second;  // first build wins on a race
}

std::size_t BoundFunctionCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return map_.size();
}

}  // namespace pbounds
