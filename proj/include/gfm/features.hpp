#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfm/csv.hpp"
#include "gfm/preprocess.hpp"

namespace gfm {

inline constexpr std::size_t kFeatureCount = 13;
inline constexpr std::array<const char*, kFeatureCount> kFeatureNames = {
    "mean",          "variance",  "acf1",        "trend_strength", "linearity",
    "curvature",     "spectral_entropy", "lumpiness", "spikiness",  "level_shift",
    "variance_change", "flat_spots", "crossing_points"};

using FeatureVector = std::array<double, kFeatureCount>;

struct FeatureMatrix {
  std::vector<std::string> ids;
  std::vector<FeatureVector> rows;
  bool standardized = false;
};

namespace detail {

inline double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

// Population variance throughout this module.
inline double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

inline double median_of(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

inline double acf1_of(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return 0.0;
  const double m = mean_of(x);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < n; ++t) den += (x[t] - m) * (x[t] - m);
  if (den <= 0.0) return 0.0;
  for (std::size_t t = 0; t + 1 < n; ++t) num += (x[t] - m) * (x[t + 1] - m);
  return num / den;
}

// Naive DFT periodogram entropy over frequencies 1..floor(n/2), normalised
// by log of the frequency count. Zero-power series map to 0.
inline double spectral_entropy_of(std::span<const double> x) {
  const std::size_t n = x.size();
  const std::size_t m = n / 2;
  if (m < 2) return 0.0;
  const double mean = mean_of(x);
  std::vector<double> power(m, 0.0);
  double total = 0.0;
  for (std::size_t k = 1; k <= m; ++k) {
    double re = 0.0, im = 0.0;
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    for (std::size_t t = 0; t < n; ++t) {
      const double v = x[t] - mean;
      re += v * std::cos(w * static_cast<double>(t));
      im -= v * std::sin(w * static_cast<double>(t));
    }
    power[k - 1] = re * re + im * im;
    total += power[k - 1];
  }
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double p : power) {
    if (p <= 0.0) continue;
    const double q = p / total;
    h -= q * std::log(q);
  }
  return h / std::log(static_cast<double>(m));
}

// Coefficients of y regressed on orthonormalised {1, t, t^2}. Returns
// (linear, quadratic).
inline std::pair<double, double> orthogonal_poly_coeffs(std::span<const double> y) {
  const std::size_t n = y.size();
  if (n < 3) return {0.0, 0.0};
  std::vector<double> u1(n), u2(n);
  const double tbar = (static_cast<double>(n) - 1.0) / 2.0;
  double n1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u1[i] = static_cast<double>(i) - tbar;
    n1 += u1[i] * u1[i];
  }
  n1 = std::sqrt(n1);
  if (n1 <= 0.0) return {0.0, 0.0};
  for (double& v : u1) v /= n1;
  double m2 = 0.0, p1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t2 = static_cast<double>(i) * static_cast<double>(i);
    u2[i] = t2;
    m2 += t2;
  }
  m2 /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    u2[i] -= m2;
    p1 += u2[i] * u1[i];
  }
  double n2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    u2[i] -= p1 * u1[i];
    n2 += u2[i] * u2[i];
  }
  n2 = std::sqrt(n2);
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    b1 += u1[i] * y[i];
    if (n2 > 0.0) b2 += (u2[i] / n2) * y[i];
  }
  return {b1, b2};
}

inline double max_run_of_bins(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return 0.0;
  double lo = x[0], hi = x[0];
  for (double v : x) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double width = hi - lo;
  auto bin_of = [&](double v) -> int {
    if (width <= 0.0) return 0;
    int b = static_cast<int>(std::floor((v - lo) / width * 10.0));
    return std::clamp(b, 0, 9);
  };
  std::size_t best = 1, run = 1;
  int prev = bin_of(x[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const int b = bin_of(x[i]);
    run = (b == prev) ? run + 1 : 1;
    best = std::max(best, run);
    prev = b;
  }
  return static_cast<double>(best);
}

inline double crossing_points_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double med = median_of(std::vector<double>(x.begin(), x.end()));
  std::size_t count = 0;
  bool prev = x[0] > med;
  for (std::size_t i = 1; i < x.size(); ++i) {
    const bool cur = x[i] > med;
    if (cur != prev) ++count;
    prev = cur;
  }
  return static_cast<double>(count);
}

}  // namespace detail

// The per-series feature vector used for feature-based clustering. The
// decomposition behind trend_strength/linearity/curvature/spikiness smooths
// with a window of at least 7 so non-seasonal series still get a meaningful
// trend estimate.
inline FeatureVector extract_features(std::span<const double> x, std::size_t period) {
  if (period == 0) throw std::invalid_argument("extract_features: period must be positive");
  const std::size_t min_len = std::max<std::size_t>(2 * period, 10);
  if (x.size() < min_len)
    throw std::invalid_argument("extract_features: need length >= " + std::to_string(min_len) +
                                ", got " + std::to_string(x.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("extract_features: non-finite input");

  FeatureVector f{};
  f[0] = detail::mean_of(x);
  f[1] = detail::variance_of(x);
  f[2] = detail::acf1_of(x);

  // Seasonal indices at the series' period, trend from a floored window.
  std::vector<double> deseason(x.begin(), x.end());
  if (period > 1) {
    Decomposition d = classical_decompose(x, period);
    deseason = std::move(d.deseasonalized);
  }
  const std::size_t trend_window = std::max<std::size_t>(period, 7);
  auto trend = detail::centered_ma(deseason, trend_window);
  std::vector<double> trend_valid, remainder;
  for (std::size_t i = trend.begin; i < trend.end; ++i) {
    trend_valid.push_back(trend.values[i]);
    remainder.push_back(deseason[i] - trend.values[i]);
  }
  std::vector<double> deseason_valid(deseason.begin() + static_cast<std::ptrdiff_t>(trend.begin),
                                     deseason.begin() + static_cast<std::ptrdiff_t>(trend.end));
  const double var_deseason = detail::variance_of(deseason_valid);
  const double var_remainder = detail::variance_of(remainder);
  f[3] = var_deseason > 1e-12 ? std::clamp(1.0 - var_remainder / var_deseason, 0.0, 1.0) : 0.0;
  auto [lin, curv] = detail::orthogonal_poly_coeffs(trend_valid);
  f[4] = lin;
  f[5] = curv;
  f[6] = detail::spectral_entropy_of(x);

  const std::size_t w = std::max<std::size_t>(period, 10);
  {  // lumpiness: variance of tiled-window variances
    std::vector<double> vars;
    for (std::size_t start = 0; start + w <= x.size(); start += w)
      vars.push_back(detail::variance_of(x.subspan(start, w)));
    f[7] = vars.size() >= 2 ? detail::variance_of(vars) : 0.0;
  }
  {  // spikiness: variance of leave-one-out variances of the remainder
    const std::size_t m = remainder.size();
    if (m >= 3) {
      std::vector<double> loo(m);
      for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> r;
        r.reserve(m - 1);
        for (std::size_t j = 0; j < m; ++j)
          if (j != i) r.push_back(remainder[j]);
        loo[i] = detail::variance_of(r);
      }
      f[8] = detail::variance_of(loo);
    }
  }
  {  // level_shift / variance_change over adjacent rolling windows
    double max_mean_diff = 0.0, max_var_diff = 0.0;
    if (x.size() >= 2 * w) {
      for (std::size_t i = 0; i + 2 * w <= x.size(); ++i) {
        const auto a = x.subspan(i, w);
        const auto b = x.subspan(i + w, w);
        max_mean_diff = std::max(max_mean_diff,
                                 std::abs(detail::mean_of(a) - detail::mean_of(b)));
        max_var_diff = std::max(max_var_diff,
                                std::abs(detail::variance_of(a) - detail::variance_of(b)));
      }
    }
    f[9] = max_mean_diff;
    f[10] = max_var_diff;
  }
  f[11] = detail::max_run_of_bins(x);
  f[12] = detail::crossing_points_of(x);
  return f;
}

inline FeatureMatrix extract_feature_matrix(const std::vector<std::vector<double>>& series,
                                            const std::vector<std::string>& ids,
                                            std::size_t period) {
  if (series.size() != ids.size())
    throw std::invalid_argument("extract_feature_matrix: ids/series mismatch");
  FeatureMatrix fm;
  fm.ids = ids;
  fm.rows.reserve(series.size());
  for (const auto& x : series) fm.rows.push_back(extract_features(x, period));
  return fm;
}

// Column-wise z-scores with population standard deviation. Constant columns
// become zero so they cannot dominate (or break) Euclidean distances.
inline FeatureMatrix standardize(const FeatureMatrix& fm) {
  if (fm.rows.size() < 2) throw std::invalid_argument("standardize: need at least 2 rows");
  FeatureMatrix out = fm;
  const double n = static_cast<double>(fm.rows.size());
  for (std::size_t c = 0; c < kFeatureCount; ++c) {
    double mean = 0.0;
    for (const auto& r : fm.rows) mean += r[c];
    mean /= n;
    double var = 0.0;
    for (const auto& r : fm.rows) var += (r[c] - mean) * (r[c] - mean);
    var /= n;
    const double sd = std::sqrt(var);
    for (auto& r : out.rows) r[c] = sd > 1e-12 ? (r[c] - mean) / sd : 0.0;
  }
  out.standardized = true;
  return out;
}

inline std::string features_to_csv(const FeatureMatrix& fm) {
  std::ostringstream out;
  out << "series_id";
  for (const char* name : kFeatureNames) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < fm.rows.size(); ++i) {
    out << fm.ids[i];
    for (double v : fm.rows[i]) out << ',' << format_double(v);
    out << '\n';
  }
  return out.str();
}

}  // namespace gfm
