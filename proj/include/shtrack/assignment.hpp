// Copyright 2026 The shtrack Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace shtrack {

/// Dense row-major cost matrix (rows = tracks, cols = detections) with a
/// mask of pairs that may never be assigned. Lower cost is better.
class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        cost_(static_cast<std::size_t>(rows) * cols, fill),
        forbidden_(static_cast<std::size_t>(rows) * cols, 0) {
    if (rows < 0 || cols < 0) throw std::invalid_argument("CostMatrix: negative shape");
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& at(int r, int c) { return cost_[index(r, c)]; }
  double at(int r, int c) const { return cost_[index(r, c)]; }

  bool forbidden(int r, int c) const { return forbidden_[index(r, c)] != 0; }
  void set_forbidden(int r, int c, bool f = true) { forbidden_[index(r, c)] = f ? 1 : 0; }

  bool same_shape(const CostMatrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols_ + c; }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> cost_;
  std::vector<std::uint8_t> forbidden_;
};

struct Assignment {
  std::vector<std::pair<int, int>> matches;  // (row, col), sorted by row
  std::vector<int> unmatched_rows;
  std::vector<int> unmatched_cols;
};

namespace detail {

// Shortest augmenting path Hungarian method on an n x m matrix, n <= m.
// Returns row -> column. Ties resolve to the lowest column index.
inline std::vector<int> hungarian_rows_le_cols(const std::vector<double>& a, int n, int m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[static_cast<std::size_t>(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
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

}  // namespace detail

/**
 * Minimum-cost one-to-one assignment. Among all assignments it first
 * maximizes the number of allowed pairs, then minimizes their total cost.
 * Forbidden pairs are never returned.
 */
inline Assignment solve_assignment(const CostMatrix& c) {
  Assignment out;
  const int n = c.rows();
  const int m = c.cols();
  if (c.empty()) {
    for (int i = 0; i < n; ++i) out.unmatched_rows.push_back(i);
    for (int j = 0; j < m; ++j) out.unmatched_cols.push_back(j);
    return out;
  }

  double max_abs = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      if (!c.forbidden(i, j)) {
        if (!std::isfinite(c.at(i, j))) {
          throw std::invalid_argument("solve_assignment: non-finite allowed cost");
        }
        max_abs = std::max(max_abs, std::abs(c.at(i, j)));
      }
  // Any extra forbidden pair must outweigh every possible allowed-cost gain.
  const int k = std::min(n, m);
  const double big = (2.0 * max_abs + 1.0) * (k + 1);

  const bool transpose = n > m;
  const int rn = transpose ? m : n;
  const int rm = transpose ? n : m;
  std::vector<double> a(static_cast<std::size_t>(rn) * rm);
  for (int i = 0; i < rn; ++i)
    for (int j = 0; j < rm; ++j) {
      const int r = transpose ? j : i;
      const int col = transpose ? i : j;
      a[static_cast<std::size_t>(i) * rm + j] = c.forbidden(r, col) ? big : c.at(r, col);
    }

  const std::vector<int> assign = detail::hungarian_rows_le_cols(a, rn, rm);
  std::vector<char> row_used(n, 0), col_used(m, 0);
  for (int i = 0; i < rn; ++i) {
    const int j = assign[i];
    if (j < 0) continue;
    const int r = transpose ? j : i;
    const int col = transpose ? i : j;
    if (c.forbidden(r, col)) continue;
    out.matches.emplace_back(r, col);
    row_used[r] = 1;
    col_used[col] = 1;
  }
  std::sort(out.matches.begin(), out.matches.end());
  for (int i = 0; i < n; ++i)
    if (!row_used[i]) out.unmatched_rows.push_back(i);
  for (int j = 0; j < m; ++j)
    if (!col_used[j]) out.unmatched_cols.push_back(j);
  return out;
}

/// Sum of matched costs in row order.
inline double assignment_cost(const CostMatrix& c, const Assignment& a) {
  double total = 0.0;
  for (const auto& [r, col] : a.matches) total += c.at(r, col);
  return total;
}

}  // namespace shtrack
