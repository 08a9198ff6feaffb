#include "cte/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace cte {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting path with potentials; assigns every row, rows <= cols.
std::vector<int> solve_rows(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  return row_to_col;
}

}  // namespace

Assignment hungarian_match(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  Assignment result;

  if (n == 0 || m == 0) {
    for (int i = 0; i < n; ++i) result.unmatched_rows.push_back(i);
    for (int j = 0; j < m; ++j) result.unmatched_cols.push_back(j);
    return result;
  }

  double sum_abs = 0.0;
  bool any_feasible = false;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      const double c = cost(i, j);
      if (std::isnan(c)) throw std::invalid_argument("hungarian_match: NaN cost");
      if (std::isfinite(c)) {
        sum_abs += std::abs(c);
        any_feasible = true;
      }
    }
  }
  if (!any_feasible) {
    for (int i = 0; i < n; ++i) result.unmatched_rows.push_back(i);
    for (int j = 0; j < m; ++j) result.unmatched_cols.push_back(j);
    return result;
  }

  // One sentinel edge outweighs the entire feasible mass, so the solver
  // maximizes the number of feasible matches before minimizing their cost.
  const double big = 2.0 * (sum_abs + 1.0);
  const bool transposed = n > m;
  const Eigen::MatrixXd base = transposed ? cost.transpose() : cost;
  Eigen::MatrixXd padded = base;
  for (Eigen::Index i = 0; i < padded.rows(); ++i) {
    for (Eigen::Index j = 0; j < padded.cols(); ++j) {
      if (!std::isfinite(padded(i, j))) padded(i, j) = big;
    }
  }

  const std::vector<int> row_to_col = solve_rows(padded);

  std::vector<bool> row_matched(n, false), col_matched(m, false);
  for (int r = 0; r < static_cast<int>(row_to_col.size()); ++r) {
    const int c = row_to_col[r];
    if (c < 0) continue;
    const int row = transposed ? c : r;
    const int col = transposed ? r : c;
    if (!std::isfinite(cost(row, col))) continue;  // sentinel pair, drop
    result.pairs.emplace_back(row, col);
    result.total_cost += cost(row, col);
    row_matched[row] = true;
    col_matched[col] = true;
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  for (int i = 0; i < n; ++i) {
    if (!row_matched[i]) result.unmatched_rows.push_back(i);
  }
  for (int j = 0; j < m; ++j) {
    if (!col_matched[j]) result.unmatched_cols.push_back(j);
  }
  return result;
}

}  // namespace cte
