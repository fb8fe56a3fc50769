#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "gfm/parallel.hpp"

namespace gfm {

// Classic unconstrained dynamic time warping with absolute-difference local
// cost and steps {match, insert, delete}. Symmetric; lengths may differ.
inline double dtw_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw_distance: empty sequence");
  const std::size_t n = a.size(), m = b.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= m; ++j) {
      const double cost = std::abs(a[i - 1] - b[j - 1]);
      cur[j] = cost + std::min({prev[j - 1], prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Full symmetric distance matrix; rows are independent work items.
inline std::vector<std::vector<double>> pairwise_dtw(
    const std::vector<std::vector<double>>& series, int workers = 1) {
  const std::size_t n = series.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) d[i][j] = dtw_distance(series[i], series[j]);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) d[i][j] = d[j][i];
  return d;
}

}  // namespace gfm
