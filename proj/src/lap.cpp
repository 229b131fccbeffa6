#include "mmforge/lap.hpp"

#include <cmath>
#include <limits>

namespace mmforge::lap {

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

double mapping_cost(const Matrix& cost, const std::vector<std::size_t>& row_to_col) {
  double total = 0.0;
  for (std::size_t r = 0; r < row_to_col.size(); ++r) total += cost(r, row_to_col[r]);
  return total;
}

Solution solve_lap(const Matrix& cost) {
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  if (n > m) throw std::invalid_argument("solve_lap requires rows <= cols");
  for (double v : cost.data()) {
    if (!std::isfinite(v)) throw std::invalid_argument("solve_lap: non-finite cost entry");
  }
  Solution sol;
  if (n == 0) return sol;

  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  // Column slot 0 is a virtual root; real columns are 1..m, real rows 1..n.
  std::vector<double> row_pot(n + 1, 0.0);
  std::vector<double> col_pot(m + 1, 0.0);
  std::vector<std::size_t> col_owner(m + 1, 0);  // row assigned to column, 0 = free
  std::vector<std::size_t> prev_col(m + 1, kNone);

  for (std::size_t row = 1; row <= n; ++row) {
    col_owner[0] = row;
    std::size_t col = 0;
    std::vector<double> dist(m + 1, kInf);
    std::vector<bool> done(m + 1, false);
    // Dijkstra over reduced costs until a free column is reached.
    do {
      done[col] = true;
      const std::size_t r = col_owner[col];
      double best = kInf;
      std::size_t best_col = kNone;
      for (std::size_t j = 1; j <= m; ++j) {
        if (done[j]) continue;
        const double reduced = cost(r - 1, j - 1) - row_pot[r] - col_pot[j];
        if (reduced < dist[j]) {
          dist[j] = reduced;
          prev_col[j] = col;
        }
        if (dist[j] < best) {
          best = dist[j];
          best_col = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (done[j]) {
          row_pot[col_owner[j]] += best;
          col_pot[j] -= best;
        } else {
          dist[j] -= best;
        }
      }
      col = best_col;
    } while (col_owner[col] != 0);
    // Augment along the alternating path back to the root.
    do {
      const std::size_t p = prev_col[col];
      col_owner[col] = col_owner[p];
      col = p;
    } while (col != 0);
  }

  sol.row_to_col.assign(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (col_owner[j] != 0) sol.row_to_col[col_owner[j] - 1] = j - 1;
  }
  sol.total_cost = mapping_cost(cost, sol.row_to_col);
  return sol;
}

}  // namespace mmforge::lap
