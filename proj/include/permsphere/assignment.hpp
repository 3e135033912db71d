#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "permsphere/permutation.hpp"

namespace permsphere {

/// Square matrix of finite edge weights for the linear assignment problem.
class CostMatrix {
 public:
  explicit CostMatrix(Eigen::MatrixXd costs) : costs_(std::move(costs)) {
    if (costs_.rows() != costs_.cols() || costs_.rows() < 1)
      throw std::invalid_argument("CostMatrix: matrix must be square");
    if (!costs_.allFinite())
      throw std::invalid_argument("CostMatrix: entries must be finite");
  }

  int n() const { return static_cast<int>(costs_.rows()); }
  const Eigen::MatrixXd& values() const { return costs_; }

 private:
  Eigen::MatrixXd costs_;
};

/// Minimum-cost linear assignment via shortest augmenting paths with dual
/// potentials, O(n^3) for dense costs. Rows are inserted in increasing index
/// and columns scanned in increasing index, so ties resolve deterministically.
inline PermutationMatrix solve_lap(const CostMatrix& cm) {
  const int n = cm.n();
  const Eigen::MatrixXd& cost = cm.values();
  if (n == 1) return PermutationMatrix::identity(1);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based with a virtual column 0, the classical formulation.
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<int> col_to_row(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    col_to_row[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = col_to_row[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (col_to_row[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      col_to_row[static_cast<std::size_t>(j0)] = col_to_row[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    row_to_col[static_cast<std::size_t>(col_to_row[static_cast<std::size_t>(j)]) - 1] =
        j - 1;
  return PermutationMatrix(std::move(row_to_col));
}

/// Objective value of an assignment under the given costs.
inline double assignment_cost(const CostMatrix& cm, const PermutationMatrix& p) {
  double total = 0.0;
  for (int i = 0; i < cm.n(); ++i) total += cm.values()(i, p.identity_of(i));
  return total;
}

}  // namespace permsphere
