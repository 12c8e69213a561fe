#include "pbounds/lp_oracle.hpp"

#include <vector>

namespace pbounds {

OracleResult enumerate_vertices_oracle(const LinearProgram& lp) {
  lp.validate();
  const Index n = lp.num_vars();
  if (n + lp.a_ub.rows() + lp.a_eq.rows() > 16)
    throw std::invalid_argument(
        "enumerate_vertices_oracle: instance too large for exhaustive enumeration");

  // every candidate active constraint as a row (a, b) of a.v = b
  std::vector<Eigen::RowVectorXd> rows;
  std::vector<double> rhs;
  std::vector<bool> is_equality;
  for (Index i = 0; i < lp.a_eq.rows(); ++i) {
    rows.emplace_back(lp.a_eq.row(i));
    rhs.push_back(lp.b_eq[i]);
    is_equality.push_back(true);
  }
  for (Index i = 0; i < lp.a_ub.rows(); ++i) {
    rows.emplace_back(lp.a_ub.row(i));
    rhs.push_back(lp.b_ub[i]);
    is_equality.push_back(false);
  }
  for (Index j = 0; j < n; ++j) {
    if (std::isfinite(lp.lo[j])) {
      Eigen::RowVectorXd unit = Eigen::RowVectorXd::Zero(n);
      unit[j] = 1.0;
      rows.push_back(unit);
      rhs.push_back(lp.lo[j]);
      is_equality.push_back(false);
    }
    if (std::isfinite(lp.hi[j])) {
      Eigen::RowVectorXd unit = Eigen::RowVectorXd::Zero(n);
      unit[j] = 1.0;
      rows.push_back(unit);
      rhs.push_back(lp.hi[j]);
      is_equality.push_back(false);
    }
  }
  const int total = static_cast<int>(rows.size());
  if (total < n) return {LpStatus::Infeasible, 0.0};

  const double tol = 1e-7;
  auto feasible = [&](const Vector& v) {
    if (!v.allFinite()) return false;
    if (lp.a_ub.rows() > 0 && ((lp.a_ub * v - lp.b_ub).array() > tol).any())
      return false;
    if (lp.a_eq.rows() > 0 &&
        ((lp.a_eq * v - lp.b_eq).array().abs() > tol).any())
      return false;
    for (Index j = 0; j < n; ++j) {
      if (std::isfinite(lp.lo[j]) && v[j] < lp.lo[j] - tol) return false;
      if (std::isfinite(lp.hi[j]) && v[j] > lp.hi[j] + tol) return false;
    }
    return true;
  };

  OracleResult best;
  std::vector<int> pick(static_cast<size_t>(n));
  for (Index j = 0; j < n; ++j) pick[static_cast<size_t>(j)] = static_cast<int>(j);

  Matrix sys(n, n);
  Vector b(n);
  long long combos = 0;
  while (true) {
    if (++combos > 4'000'000)
      throw std::invalid_argument("enumerate_vertices_oracle: too many vertex candidates");
    bool covers_equalities = true;
    for (int r = 0; r < total && covers_equalities; ++r)
      if (is_equality[static_cast<size_t>(r)] &&
          std::find(pick.begin(), pick.end(), r) == pick.end())
        covers_equalities = false;
    if (covers_equalities) {
      for (Index j = 0; j < n; ++j) {
        sys.row(j) = rows[static_cast<size_t>(pick[static_cast<size_t>(j)])];
        b[j] = rhs[static_cast<size_t>(pick[static_cast<size_t>(j)])];
      }
      Eigen::FullPivLU<Matrix> lu(sys);
      lu.setThreshold(1e-9);
      if (lu.rank() == n) {
        const Vector v = lu.solve(b);
        if (feasible(v)) {
          const double obj = lp.c.dot(v);
          if (best.status != LpStatus::Optimal || obj < best.objective) {
            best.status = LpStatus::Optimal;
            best.objective = obj;
          }
        }
      }
    }
    // next combination of n rows out of total
    int pos = static_cast<int>(n) - 1;
    while (pos >= 0 && pick[static_cast<size_t>(pos)] ==
                           total - static_cast<int>(n) + pos)
      --pos;
    if (pos < 0) break;
    ++pick[static_cast<size_t>(pos)];
    for (int q = pos + 1; q < static_cast<int>(n); ++q)
      pick[static_cast<size_t>(q)] = pick[static_cast<size_t>(q - 1)] + 1;
  }
  return best;
}

}  // namespace pbounds
