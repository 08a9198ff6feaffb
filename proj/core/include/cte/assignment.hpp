#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cte {

struct Assignment {
  std::vector<std::pair<int, int>> pairs;  // (row, col), row-sorted
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
  double total_cost = 0.0;
};

/// Minimum-cost rectangular assignment (Jonker-Volgenant shortest augmenting
/// path). +infinity marks an infeasible pair; the result maximizes the
/// number of feasible matches first, then minimizes their total cost.
Assignment hungarian_match(const Eigen::MatrixXd& cost);

}  // namespace cte
