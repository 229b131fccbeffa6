#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mmforge::lap {

// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Solution {
  std::vector<std::size_t> row_to_col;
  double total_cost = 0.0;  // summed in row order
};

// Exact minimum-cost assignment of every row to a distinct column
// (rows <= cols) by shortest augmenting paths with dual potentials.
// Among equal-cost alternatives the lowest row, then lowest column, is
// preferred during each scan; the result is deterministic.
// Throws std::invalid_argument on rows > cols or non-finite entries.
Solution solve_lap(const Matrix& cost);

// Cost of a given row->column mapping, summed in row order.
double mapping_cost(const Matrix& cost, const std::vector<std::size_t>& row_to_col);

}  // namespace mmforge::lap
