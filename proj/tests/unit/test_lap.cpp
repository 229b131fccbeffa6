#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "mmforge/lap.hpp"
#include "oracles.hpp"

namespace mmforge {
namespace {

lap::Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  lap::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

void expect_injective(const lap::Solution& s, std::size_t cols) {
  std::set<std::size_t> used(s.row_to_col.begin(), s.row_to_col.end());
  EXPECT_EQ(used.size(), s.row_to_col.size());
  for (auto c : s.row_to_col) EXPECT_LT(c, cols);
}

TEST(Lap, SmallSquare) {
  const auto m = from_rows({{4, 1, 3}, {2, 0, 5}, {3, 2, 2}});
  const auto s = lap::solve_lap(m);
  EXPECT_EQ(s.total_cost, 5.0);
  EXPECT_EQ(s.row_to_col, (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_EQ(lap::mapping_cost(m, s.row_to_col), s.total_cost);
}

TEST(Lap, RectangularPicksCheapestColumns) {
  const auto m = from_rows({{9, 1, 9, 9}, {9, 9, 9, 2}});
  const auto s = lap::solve_lap(m);
  EXPECT_EQ(s.row_to_col, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(s.total_cost, 3.0);
}

TEST(Lap, DegenerateShapes) {
  EXPECT_TRUE(lap::solve_lap(lap::Matrix(0, 0)).row_to_col.empty());
  EXPECT_TRUE(lap::solve_lap(lap::Matrix(0, 3)).row_to_col.empty());
  const auto one = lap::solve_lap(from_rows({{-2.5}}));
  EXPECT_EQ(one.total_cost, -2.5);
}

TEST(Lap, RejectsBadInput) {
  EXPECT_THROW(lap::solve_lap(lap::Matrix(3, 2)), std::invalid_argument);
  auto m = from_rows({{1, std::numeric_limits<double>::quiet_NaN()}});
  EXPECT_THROW(lap::solve_lap(m), std::invalid_argument);
  m(0, 1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(lap::solve_lap(m), std::invalid_argument);
}

TEST(Lap, TiesResolveDeterministically) {
  const lap::Matrix flat(3, 3, 1.0);
  const auto a = lap::solve_lap(flat);
  const auto b = lap::solve_lap(flat);
  EXPECT_EQ(a.row_to_col, b.row_to_col);
  EXPECT_EQ(a.total_cost, 3.0);
  expect_injective(a, 3);
}

TEST(Lap, TransposeHasSameOptimum) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    lap::Matrix m(3, 5);
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t c = 0; c < 5; ++c) m(r, c) = static_cast<double>(rng.below(10));
    }
    EXPECT_EQ(m.transposed().transposed().data(), m.data());
    EXPECT_EQ(lap::solve_lap(m).total_cost, testing::brute_force_lap(m));
  }
}

TEST(Lap, MatchesBruteForceOnRandomMatrices) {
  Rng rng(1234);
  for (int t = 0; t < 400; ++t) {
    const std::size_t c = 1 + rng.below(7);
    const std::size_t r = 1 + rng.below(c);
    lap::Matrix m(r, c);
    const bool integral = t % 2 == 0;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        m(i, j) = integral ? static_cast<double>(rng.below(5)) - 2.0 : rng.uniform01() * 2 - 1;
      }
    }
    const auto s = lap::solve_lap(m);
    expect_injective(s, c);
    ASSERT_EQ(s.total_cost, lap::mapping_cost(m, s.row_to_col));
    if (integral) {
      ASSERT_EQ(s.total_cost, testing::brute_force_lap(m));
    } else {
      ASSERT_NEAR(s.total_cost, testing::brute_force_lap(m), 1e-12);
    }
  }
}

}  // namespace
}  // namespace mmforge
