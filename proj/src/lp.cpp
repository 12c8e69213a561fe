#include "pbounds/lp.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <vector>

namespace pbounds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-9;
constexpr double kZeroTol = 1e-11;

// How an original variable maps into the nonnegative standard form.
enum class VarMap { Shifted, Mirrored, SplitPos };

struct ColInfo {
  VarMap map;
  Index var;      // original variable index
  double offset;  // lo (Shifted) or hi (Mirrored)
};

enum class RowSource { Ub, EqPos, EqNeg, Width };

struct RowInfo {
  RowSource source;
  Index index;   // a_ub / a_eq row, or variable for Width
  bool flipped;  // multiplied by -1 to make the standard rhs nonnegative
};

struct StandardForm {
  Matrix rows;    // m x n_struct
  Vector rhs;     // m
  Vector cost;    // n_struct
  std::vector<ColInfo> cols;
  std::vector<RowInfo> row_info;
  std::vector<Index> split_neg;  // column of x- for split vars, -1 otherwise
};

bool usable_anchor(const LinearProgram& lp) {
  if (lp.anchor.size() != lp.num_vars()) return false;
  for (Index j = 0; j < lp.num_vars(); ++j) {
    const double aj = lp.anchor[j];
    const bool on_lo = std::isfinite(lp.lo[j]) && std::abs(aj - lp.lo[j]) <= 1e-12;
    const bool on_hi = std::isfinite(lp.hi[j]) && std::abs(aj - lp.hi[j]) <= 1e-12;
    if (!on_lo && !on_hi) return false;
  }
  return true;
}

StandardForm build_standard_form(const LinearProgram& lp) {
  const Index n = lp.num_vars();
  const bool anchored = usable_anchor(lp);

  StandardForm sf;
  sf.split_neg.assign(static_cast<size_t>(n), -1);
  std::vector<Index> primary(static_cast<size_t>(n));
  for (Index j = 0; j < n; ++j) {
    const bool lo_fin = std::isfinite(lp.lo[j]);
    const bool hi_fin = std::isfinite(lp.hi[j]);
    VarMap map;
    if (anchored && hi_fin && std::abs(lp.anchor[j] - lp.hi[j]) <= 1e-12 &&
        !(lo_fin && std::abs(lp.anchor[j] - lp.lo[j]) <= 1e-12)) {
      map = VarMap::Mirrored;
    } else if (lo_fin) {
      map = VarMap::Shifted;
    } else if (hi_fin) {
      map = VarMap::Mirrored;
    } else {
      map = VarMap::SplitPos;
    }
    primary[static_cast<size_t>(j)] = static_cast<Index>(sf.cols.size());
    sf.cols.push_back({map, j, map == VarMap::Mirrored ? lp.hi[j] : lp.lo[j]});
    if (map == VarMap::SplitPos) {
      sf.cols.back().offset = 0.0;
      sf.split_neg[static_cast<size_t>(j)] = static_cast<Index>(sf.cols.size());
      sf.cols.push_back({VarMap::SplitPos, j, 0.0});  // negative part
    }
  }
  const Index ns = static_cast<Index>(sf.cols.size());

  // transformed cost
  sf.cost = Vector::Zero(ns);
  for (Index j = 0; j < n; ++j) {
    const Index cj = primary[static_cast<size_t>(j)];
    switch (sf.cols[static_cast<size_t>(cj)].map) {
      case VarMap::Shifted: sf.cost[cj] += lp.c[j]; break;
      case VarMap::Mirrored: sf.cost[cj] -= lp.c[j]; break;
      case VarMap::SplitPos:
        sf.cost[cj] += lp.c[j];
        sf.cost[sf.split_neg[static_cast<size_t>(j)]] -= lp.c[j];
        break;
    }
  }

  // count rows: ub + 2*eq + width rows for doubly bounded variables
  std::vector<Index> width_vars;
  for (Index j = 0; j < n; ++j)
    if (std::isfinite(lp.lo[j]) && std::isfinite(lp.hi[j]) && lp.hi[j] > lp.lo[j])
      width_vars.push_back(j);
  const Index m = lp.a_ub.rows() + 2 * lp.a_eq.rows() +
                  static_cast<Index>(width_vars.size());
  sf.rows = Matrix::Zero(m, ns);
  sf.rhs = Vector::Zero(m);
  sf.row_info.reserve(static_cast<size_t>(m));

  auto emit = [&](const Eigen::RowVectorXd& a, double b, RowSource src, Index idx) {
    const Index r = static_cast<Index>(sf.row_info.size());
    double rhs = b;
    for (Index j = 0; j < n; ++j) {
      const double alpha = a[j];
      if (alpha == 0.0) continue;
      const Index cj = primary[static_cast<size_t>(j)];
      switch (sf.cols[static_cast<size_t>(cj)].map) {
        case VarMap::Shifted:
          sf.rows(r, cj) += alpha;
          rhs -= alpha * lp.lo[j];
          break;
        case VarMap::Mirrored:
          sf.rows(r, cj) -= alpha;
          rhs -= alpha * lp.hi[j];
          break;
        case VarMap::SplitPos:
          sf.rows(r, cj) += alpha;
          sf.rows(r, sf.split_neg[static_cast<size_t>(j)]) -= alpha;
          break;
      }
    }
    sf.rhs[r] = rhs;
    sf.row_info.push_back({src, idx, false});
  };

  for (Index i = 0; i < lp.a_ub.rows(); ++i)
    emit(lp.a_ub.row(i), lp.b_ub[i], RowSource::Ub, i);
  // equalities as paired inequalities
  for (Index i = 0; i < lp.a_eq.rows(); ++i) {
    emit(lp.a_eq.row(i), lp.b_eq[i], RowSource::EqPos, i);
    emit(-lp.a_eq.row(i), -lp.b_eq[i], RowSource::EqNeg, i);
  }
  for (Index j : width_vars) {
    Eigen::RowVectorXd unit = Eigen::RowVectorXd::Zero(n);
    unit[j] = sf.cols[static_cast<size_t>(primary[static_cast<size_t>(j)])].map ==
                      VarMap::Mirrored
                  ? -1.0
                  : 1.0;
    // x_j <= hi - lo in either orientation
    emit(unit, unit[j] > 0 ? lp.hi[j] : -lp.lo[j], RowSource::Width, j);
  }
  return sf;
}

struct Tableau {
  Matrix tab;               // m x (ncols + 1); last column is the rhs
  Vector obj;               // reduced-cost row, length ncols + 1
  std::vector<Index> basis; // basic column per row
  std::vector<bool> dead;   // redundant rows removed after phase one
  Index ns = 0, m = 0, slack0 = 0, art0 = 0, ncols = 0;
  Vector rhs0;              // standard rhs before pivoting (for the dual gap)
};

void pivot(Tableau& t, Index row, Index col) {
  t.tab.row(row) /= t.tab(row, col);
  const Vector pivrow = t.tab.row(row);
  Vector colcopy = t.tab.col(col);
  colcopy[row] = 0.0;
  t.tab.noalias() -= colcopy * pivrow.transpose();
  const double objfac = t.obj[col];
  if (objfac != 0.0) t.obj -= objfac * pivrow;
  t.basis[static_cast<size_t>(row)] = col;
}

// Returns the status of the pivoting loop; Optimal means "no improving
// column left".
LpStatus run_simplex(Tableau& t, Index allowed_cols, const SolveOptions& opts,
                     int& iterations, int max_iter) {
  bool bland = false;
  int stall = 0;
  while (true) {
    // entering column
    Index enter = -1;
    if (bland) {
      for (Index j = 0; j < allowed_cols; ++j)
        if (t.obj[j] < -kPivotTol) { enter = j; break; }
    } else {
      double best = -kPivotTol;
      for (Index j = 0; j < allowed_cols; ++j)
        if (t.obj[j] < best) { best = t.obj[j]; enter = j; }
    }
    if (enter < 0) return LpStatus::Optimal;

    // ratio test
    Index leave = -1;
    double best_ratio = kInf;
    for (Index i = 0; i < t.m; ++i) {
      if (t.dead[static_cast<size_t>(i)]) continue;
      const double a = t.tab(i, enter);
      if (a <= kPivotTol) continue;
      const double ratio = std::max(t.tab(i, t.ncols), 0.0) / a;
      if (ratio < best_ratio - kZeroTol) {
        best_ratio = ratio;
        leave = i;
      } else if (ratio < best_ratio + kZeroTol && leave >= 0) {
        // deterministic tie-break: drive artificials out first, then lowest
        // basic column index
        const Index bi = t.basis[static_cast<size_t>(i)];
        const Index bl = t.basis[static_cast<size_t>(leave)];
        const bool i_art = bi >= t.art0, l_art = bl >= t.art0;
        if ((i_art && !l_art) || (i_art == l_art && bi < bl)) leave = i;
      }
    }
    if (leave < 0) return LpStatus::Unbounded;

    const double before = t.obj[t.ncols];
    pivot(t, leave, enter);
    ++iterations;
    if (iterations >= max_iter) return LpStatus::IterLimit;

    const double improve = t.obj[t.ncols] - before;  // -objective increases
    if (improve <= 1e-13) {
      if (++stall >= opts.bland_stall) bland = true;
    } else {
      stall = 0;
      bland = false;
    }
  }
}

void compute_diagnostics(const LinearProgram& lp, LpSolution& sol) {
  double res = 0.0;
  if (lp.a_ub.rows() > 0)
    res = std::max(res, (lp.a_ub * sol.v - lp.b_ub).maxCoeff());
  if (lp.a_eq.rows() > 0)
    res = std::max(res, (lp.a_eq * sol.v - lp.b_eq).cwiseAbs().maxCoeff());
  for (Index j = 0; j < lp.num_vars(); ++j) {
    if (std::isfinite(lp.lo[j])) res = std::max(res, lp.lo[j] - sol.v[j]);
    if (std::isfinite(lp.hi[j])) res = std::max(res, sol.v[j] - lp.hi[j]);
  }
  sol.max_primal_residual = std::max(res, 0.0);
}

}  // namespace

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterLimit: return "iteration-limit";
  }
  return "?";
}

void LinearProgram::validate() const {
  const Index n = num_vars();
  auto bad = [](const auto& mat) { return !mat.allFinite(); };
  if (bad(c)) throw std::invalid_argument("LinearProgram: non-finite cost");
  if (a_ub.rows() != b_ub.size() || (a_ub.rows() > 0 && a_ub.cols() != n))
    throw std::invalid_argument("LinearProgram: inequality dimensions inconsistent");
  if (a_eq.rows() != b_eq.size() || (a_eq.rows() > 0 && a_eq.cols() != n))
    throw std::invalid_argument("LinearProgram: equality dimensions inconsistent");
  if (a_ub.rows() > 0 && (bad(a_ub) || bad(b_ub)))
    throw std::invalid_argument("LinearProgram: non-finite inequality data");
  if (a_eq.rows() > 0 && (bad(a_eq) || bad(b_eq)))
    throw std::invalid_argument("LinearProgram: non-finite equality data");
  if (lo.size() != n || hi.size() != n)
    throw std::invalid_argument("LinearProgram: bound dimensions inconsistent");
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(lo[j]) || std::isnan(hi[j]))
      throw std::invalid_argument("LinearProgram: NaN variable bound");
    if (lo[j] > hi[j])
      throw std::invalid_argument("LinearProgram: crossing variable bounds");
  }
}

LpSolution solve_lp(const LinearProgram& lp, const SolveOptions& opts) {
  lp.validate();
  StandardForm sf = build_standard_form(lp);
  const Index m = sf.rows.rows();
  const Index ns = sf.rows.cols();

  // flip rows with negative rhs, collect artificial columns
  std::vector<Index> art_rows;
  for (Index i = 0; i < m; ++i) {
    if (sf.rhs[i] < 0.0) {
      sf.rows.row(i) = -sf.rows.row(i);
      sf.rhs[i] = -sf.rhs[i];
      sf.row_info[static_cast<size_t>(i)].flipped = true;
      art_rows.push_back(i);
    }
  }
  const Index na = static_cast<Index>(art_rows.size());

  Tableau t;
  t.ns = ns;
  t.m = m;
  t.slack0 = ns;
  t.art0 = ns + m;
  t.ncols = ns + m + na;
  t.tab = Matrix::Zero(m, t.ncols + 1);
  t.tab.leftCols(ns) = sf.rows;
  t.tab.col(t.ncols) = sf.rhs;
  t.rhs0 = sf.rhs;
  t.basis.assign(static_cast<size_t>(m), -1);
  t.dead.assign(static_cast<size_t>(m), false);
  for (Index i = 0; i < m; ++i)
    t.tab(i, t.slack0 + i) = sf.row_info[static_cast<size_t>(i)].flipped ? -1.0 : 1.0;
  for (Index k = 0; k < na; ++k) {
    t.tab(art_rows[static_cast<size_t>(k)], t.art0 + k) = 1.0;
    t.basis[static_cast<size_t>(art_rows[static_cast<size_t>(k)])] = t.art0 + k;
  }
  for (Index i = 0; i < m; ++i)
    if (t.basis[static_cast<size_t>(i)] < 0) t.basis[static_cast<size_t>(i)] = t.slack0 + i;

  LpSolution sol;
  const int max_iter =
      opts.max_iter > 0 ? opts.max_iter
                        : 1000 + 60 * static_cast<int>(m + t.ncols);

  // phase one
  if (na > 0) {
    t.obj = Vector::Zero(t.ncols + 1);
    for (Index k = 0; k < na; ++k) t.obj[t.art0 + k] = 1.0;
    for (Index i : art_rows) t.obj -= t.tab.row(i);
    const LpStatus st = run_simplex(t, t.ncols, opts, sol.iterations, max_iter);
    if (st != LpStatus::Optimal) {
      // phase one is bounded below by zero, so anything else is numerical
      sol.status = LpStatus::IterLimit;
      return sol;
    }
    const double phase1 = -t.obj[t.ncols];
    if (phase1 > std::max(opts.feas_tol, 1e-8)) {
      sol.status = LpStatus::Infeasible;
      return sol;
    }
    // drive basic artificials out or mark their rows redundant
    for (Index i = 0; i < m; ++i) {
      if (t.basis[static_cast<size_t>(i)] < t.art0) continue;
      Index col = -1;
      for (Index j = 0; j < t.art0; ++j)
        if (std::abs(t.tab(i, j)) > kPivotTol) { col = j; break; }
      if (col >= 0)
        pivot(t, i, col);
      else
        t.dead[static_cast<size_t>(i)] = true;
    }
  }

  // phase two
  t.obj = Vector::Zero(t.ncols + 1);
  t.obj.head(ns) = sf.cost;
  for (Index i = 0; i < m; ++i) {
    if (t.dead[static_cast<size_t>(i)]) continue;
    const Index b = t.basis[static_cast<size_t>(i)];
    if (b < ns && sf.cost[b] != 0.0) t.obj -= sf.cost[b] * t.tab.row(i);
  }
  const LpStatus st = run_simplex(t, t.art0, opts, sol.iterations, max_iter);
  if (st != LpStatus::Optimal) {
    sol.status = st;
    return sol;
  }

  // recover the original variables
  Vector x = Vector::Zero(t.ncols);
  for (Index i = 0; i < m; ++i)
    if (!t.dead[static_cast<size_t>(i)])
      x[t.basis[static_cast<size_t>(i)]] = t.tab(i, t.ncols);
  sol.v = Vector::Zero(lp.num_vars());
  for (size_t cj = 0; cj < sf.cols.size(); ++cj) {
    const ColInfo& ci = sf.cols[cj];
    switch (ci.map) {
      case VarMap::Shifted: sol.v[ci.var] += ci.offset + x[static_cast<Index>(cj)]; break;
      case VarMap::Mirrored: sol.v[ci.var] += ci.offset - x[static_cast<Index>(cj)]; break;
      case VarMap::SplitPos:
        // positive part carries the offsetless value; the negative-part
        // column for the same variable follows and subtracts
        if (sf.split_neg[static_cast<size_t>(ci.var)] == static_cast<Index>(cj))
          sol.v[ci.var] -= x[static_cast<Index>(cj)];
        else
          sol.v[ci.var] += x[static_cast<Index>(cj)];
        break;
    }
  }
  sol.objective = lp.c.dot(sol.v);

  // multipliers of the internal rows, then aggregated per user row
  Vector y_flipped(m);
  for (Index i = 0; i < m; ++i) {
    const Index id_col = t.basis[static_cast<size_t>(i)] >= t.art0 &&
                                 t.dead[static_cast<size_t>(i)]
                             ? t.basis[static_cast<size_t>(i)]
                             : t.slack0 + i;
    double d = -t.obj[id_col];
    if (id_col < t.art0 && sf.row_info[static_cast<size_t>(i)].flipped) d = -d;
    y_flipped[i] = d;  // multiplier of the flipped standard row
  }
  sol.dual = Vector::Zero(lp.a_ub.rows() + lp.a_eq.rows());
  double dual_obj = 0.0;
  for (Index i = 0; i < m; ++i) {
    dual_obj += y_flipped[i] * t.rhs0[i];
    const RowInfo& ri = sf.row_info[static_cast<size_t>(i)];
    const double y_int = ri.flipped ? -y_flipped[i] : y_flipped[i];
    switch (ri.source) {
      case RowSource::Ub: sol.dual[ri.index] += y_int; break;
      case RowSource::EqPos: sol.dual[lp.a_ub.rows() + ri.index] += y_int; break;
      case RowSource::EqNeg: sol.dual[lp.a_ub.rows() + ri.index] -= y_int; break;
      case RowSource::Width: break;
    }
  }
  sol.duality_gap = sf.cost.dot(x.head(ns)) - dual_obj;
  compute_diagnostics(lp, sol);
  sol.status = (sol.max_primal_residual <= opts.feas_tol &&
                std::abs(sol.duality_gap) <= opts.gap_tol)
                   ? LpStatus::Optimal
                   : LpStatus::IterLimit;
  return sol;
}

LpSolution solve_lp_cutting(const LinearProgram& lp, const SolveOptions& opts) {
  lp.validate();
  const Index m = lp.a_ub.rows();
  if (m <= 96) return solve_lp(lp, opts);

  const Index n = lp.num_vars();
  std::vector<char> in_working(static_cast<size_t>(m), 0);
  std::vector<Index> working;
  const Index seed = std::min<Index>(48, m);
  for (Index k = 0; k < seed; ++k) {
    const Index i = k * m / seed;
    if (!in_working[static_cast<size_t>(i)]) {
      in_working[static_cast<size_t>(i)] = 1;
      working.push_back(i);
    }
  }

  LinearProgram sub;
  sub.c = lp.c;
  sub.a_eq = lp.a_eq;
  sub.b_eq = lp.b_eq;
  sub.lo = lp.lo;
  sub.hi = lp.hi;
  sub.anchor = lp.anchor;

  LpSolution sol;
  const double cut_tol = std::max(opts.feas_tol * 0.5, 1e-11);
  for (int round = 0; round < 200; ++round) {
    std::sort(working.begin(), working.end());
    sub.a_ub.resize(static_cast<Index>(working.size()), n);
    sub.b_ub.resize(static_cast<Index>(working.size()));
    for (size_t k = 0; k < working.size(); ++k) {
      sub.a_ub.row(static_cast<Index>(k)) = lp.a_ub.row(working[k]);
      sub.b_ub[static_cast<Index>(k)] = lp.b_ub[working[k]];
    }
    sol = solve_lp(sub, opts);
    if (sol.status == LpStatus::Infeasible) {
      sol.dual = Vector();
      return sol;  // infeasible on a subset is infeasible overall
    }
    if (sol.status != LpStatus::Optimal) {
      // enlarge deterministically and retry; give up when everything is in
      bool grew = false;
      for (Index i = 0; i < m && !grew; ++i)
        if (!in_working[static_cast<size_t>(i)]) {
          for (Index j = i; j < std::min(m, i + 64); ++j)
            if (!in_working[static_cast<size_t>(j)]) {
              in_working[static_cast<size_t>(j)] = 1;
              working.push_back(j);
            }
          grew = true;
        }
      if (!grew) return sol;
      continue;
    }

    // violated rows of the full program
    Vector resid = lp.a_ub * sol.v - lp.b_ub;
    std::vector<Index> violated;
    for (Index i = 0; i < m; ++i)
      if (!in_working[static_cast<size_t>(i)] && resid[i] > cut_tol)
        violated.push_back(i);
    if (violated.empty()) {
      Vector full_dual = Vector::Zero(m + lp.a_eq.rows());
      for (size_t k = 0; k < working.size(); ++k)
        full_dual[working[k]] = sol.dual[static_cast<Index>(k)];
      full_dual.tail(lp.a_eq.rows()) =
          sol.dual.tail(lp.a_eq.rows());
      sol.dual = std::move(full_dual);
      compute_diagnostics(lp, sol);
      return sol;
    }
    std::sort(violated.begin(), violated.end(), [&](Index a, Index b) {
      if (resid[a] != resid[b]) return resid[a] > resid[b];
      return a < b;
    });
    const size_t take = std::min<size_t>(violated.size(), 64);
    for (size_t k = 0; k < take; ++k) {
      in_working[static_cast<size_t>(violated[k])] = 1;
      working.push_back(violated[k]);
    }
  }
  sol.status = LpStatus::IterLimit;
  return sol;
}

void write_lp_text(const LinearProgram& lp, std::ostream& os) {
  lp.validate();
  auto term = [](double coef, Index j) {
    std::ostringstream s;
    s << (coef < 0 ? " - " : " + ");
    s << std::abs(coef) << " v" << j;
    return s.str();
  };
  os << "\\ pbounds LP instance\nMinimize\n obj:";
  for (Index j = 0; j < lp.num_vars(); ++j)
    if (lp.c[j] != 0.0) os << term(lp.c[j], j);
  os << "\nSubject To\n";
  for (Index i = 0; i < lp.a_ub.rows(); ++i) {
    os << " r" << i << ":";
    for (Index j = 0; j < lp.num_vars(); ++j)
      if (lp.a_ub(i, j) != 0.0) os << term(lp.a_ub(i, j), j);
    os << " <= " << lp.b_ub[i] << "\n";
  }
  for (Index i = 0; i < lp.a_eq.rows(); ++i) {
    os << " e" << i << ":";
    for (Index j = 0; j < lp.num_vars(); ++j)
      if (lp.a_eq(i, j) != 0.0) os << term(lp.a_eq(i, j), j);
    os << " = " << lp.b_eq[i] << "\n";
  }
  os << "Bounds\n";
  for (Index j = 0; j < lp.num_vars(); ++j) {
    if (!std::isfinite(lp.lo[j]) && !std::isfinite(lp.hi[j]))
      os << " v" << j << " free\n";
    else if (!std::isfinite(lp.hi[j]))
      os << " v" << j << " >= " << lp.lo[j] << "\n";
    else if (!std::isfinite(lp.lo[j]))
      os << " v" << j << " <= " << lp.hi[j] << "\n";
    else
      os << " " << lp.lo[j] << " <= v" << j << " <= " << lp.hi[j] << "\n";
  }
  os << "End\n";
}

std::string lp_to_text(const LinearProgram& lp) {
  std::ostringstream os;
  write_lp_text(lp, os);
  return os.str();
}

}  // namespace pbounds
