#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfm/csv.hpp"

namespace gfm {

namespace detail {

// Regularised lower incomplete gamma P(a, x) by series expansion (x < a+1)
// or continued fraction (otherwise). Accurate to ~1e-14.
inline double regularized_gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw std::invalid_argument("regularized_gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-16) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // Lentz continued fraction for Q(a, x)
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

inline double chi_square_tail(double x, double df) {
  if (x <= 0.0) return 1.0;
  return 1.0 - regularized_gamma_p(df / 2.0, x / 2.0);
}

// Ascending ranks with mean ranks for ties.
inline std::vector<double> mean_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace detail

struct FriedmanResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::vector<double> average_ranks;  // one per model column
};

// Friedman test on an errors matrix with one row per dataset and one column
// per model. Lower error ranks better (rank 1).
inline FriedmanResult friedman_test(const std::vector<std::vector<double>>& errors) {
  const std::size_t n = errors.size();
  if (n < 2) throw std::invalid_argument("friedman_test: need at least 2 datasets");
  const std::size_t k = errors.front().size();
  if (k < 2) throw std::invalid_argument("friedman_test: need at least 2 models");
  for (const auto& row : errors)
    if (row.size() != k) throw std::invalid_argument("friedman_test: ragged matrix");

  FriedmanResult r;
  r.average_ranks.assign(k, 0.0);
  for (const auto& row : errors) {
    auto ranks = detail::mean_ranks(row);
    for (std::size_t j = 0; j < k; ++j) r.average_ranks[j] += ranks[j];
  }
  for (auto& v : r.average_ranks) v /= static_cast<double>(n);

  const double kk = static_cast<double>(k);
  double sum_sq = 0.0;
  for (double rj : r.average_ranks) {
    const double d = rj - (kk + 1.0) / 2.0;
    sum_sq += d * d;
  }
  r.statistic = 12.0 * static_cast<double>(n) / (kk * (kk + 1.0)) * sum_sq;
  r.p_value = detail::chi_square_tail(r.statistic, kk - 1.0);
  return r;
}

// Two-sided Wilcoxon signed-rank p-value for paired samples. Zero differences
// are dropped; with at most 20 remaining pairs the p-value is exact by full
// sign enumeration, above that a normal approximation with tie and continuity
// corrections is used. All-zero differences give p = 1 (flagged).
inline double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                   bool* all_zero = nullptr) {
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("wilcoxon_signed_rank: need matching nonempty samples");
  std::vector<double> abs_d;
  std::vector<int> sign;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;
    abs_d.push_back(std::abs(d));
    sign.push_back(d > 0.0 ? 1 : -1);
  }
  if (all_zero) *all_zero = abs_d.empty();
  if (abs_d.empty()) return 1.0;

  const std::size_t n = abs_d.size();
  auto ranks = detail::mean_ranks(abs_d);
  double w_plus = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (sign[i] > 0) w_plus += ranks[i];

  if (n <= 20) {
    // doubled ranks are integers, so tail counts are exact
    std::vector<long long> r2(n);
    for (std::size_t i = 0; i < n; ++i)
      r2[i] = static_cast<long long>(std::llround(2.0 * ranks[i]));
    const long long w2 = static_cast<long long>(std::llround(2.0 * w_plus));
    const std::uint64_t total = 1ULL << n;
    std::uint64_t count_le = 0, count_ge = 0;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
      long long w = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1ULL << i)) w += r2[i];
      if (w <= w2) ++count_le;
      if (w >= w2) ++count_ge;
    }
    const double tail = static_cast<double>(std::min(count_le, count_ge)) /
                        static_cast<double>(total);
    return std::min(1.0, 2.0 * tail);
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double tie_term = 0.0;
  {
    std::vector<double> sorted(abs_d);
    std::sort(sorted.begin(), sorted.end());
    std::size_t i = 0;
    while (i < sorted.size()) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i + 1);
      tie_term += t * t * t - t;
      i = j + 1;
    }
  }
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double sd = std::sqrt(var);
  const double cc = std::max(0.0, std::abs(w_plus - mean) - 0.5);
  return detail::normal_two_sided_p(cc / sd);
}

// Holm step-down adjustment, returned in the input order.
inline std::vector<double> holm_adjust(std::span<const double> p) {
  const std::size_t m = p.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  std::vector<double> adjusted(m, 0.0);
  double running_max = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double v = std::min(1.0, static_cast<double>(m - i) * p[order[i]]);
    running_max = std::max(running_max, v);
    adjusted[order[i]] = running_max;
  }
  return adjusted;
}

struct PairwiseComparison {
  std::string model_a;
  std::string model_b;
  double raw_p = 1.0;
  double holm_p = 1.0;
  bool all_zero = false;
};

struct StatTestReport {
  double friedman_statistic = 0.0;
  double friedman_p = 1.0;
  std::vector<std::string> models;
  std::vector<double> average_ranks;
  std::vector<PairwiseComparison> pairwise;
};

// Full testing pipeline over a dataset x model error matrix.
inline StatTestReport stat_test_report(const std::vector<std::vector<double>>& errors,
                                       const std::vector<std::string>& models) {
  StatTestReport rep;
  rep.models = models;
  auto fr = friedman_test(errors);
  rep.friedman_statistic = fr.statistic;
  rep.friedman_p = fr.p_value;
  rep.average_ranks = fr.average_ranks;

  const std::size_t k = models.size();
  std::vector<double> raw;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      std::vector<double> a, b;
      for (const auto& row : errors) {
        a.push_back(row[i]);
        b.push_back(row[j]);
      }
      PairwiseComparison pc;
      pc.model_a = models[i];
      pc.model_b = models[j];
      pc.raw_p = wilcoxon_signed_rank(a, b, &pc.all_zero);
      raw.push_back(pc.raw_p);
      rep.pairwise.push_back(std::move(pc));
    }
  }
  auto adjusted = holm_adjust(raw);
  for (std::size_t i = 0; i < rep.pairwise.size(); ++i) rep.pairwise[i].holm_p = adjusted[i];
  return rep;
}

inline std::string ranks_to_csv(const StatTestReport& rep) {
  std::ostringstream out;
  out << "model,average_rank\n";
  for (std::size_t i = 0; i < rep.models.size(); ++i)
    out << rep.models[i] << ',' << format_double(rep.average_ranks[i]) << '\n';
  return out.str();
}

inline std::string pairwise_to_csv(const StatTestReport& rep) {
  std::ostringstream out;
  out << "model_a,model_b,raw_p,holm_p\n";
  for (const auto& pc : rep.pairwise)
    out << pc.model_a << ',' << pc.model_b << ',' << format_double(pc.raw_p) << ','
        << format_double(pc.holm_p) << '\n';
  return out.str();
}

}  // namespace gfm
