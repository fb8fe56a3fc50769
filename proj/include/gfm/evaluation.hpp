#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfm/csv.hpp"

namespace gfm {

// Thrown when the scaled-error denominator vanishes (constant seasonal-naive
// in-sample differences); callers exclude the series and count the exclusion.
struct MaseUndefined : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Symmetric mean absolute percentage error, in percent. The standard form
// treats a term with F = Y = 0 as zero. The zero-safe form replaces each
// term's denominator with max(|Y|+|F|+eps, 0.5+eps).
inline double smape(std::span<const double> forecasts, std::span<const double> actuals,
                    bool zero_safe = false, double epsilon = 0.1) {
  if (forecasts.size() != actuals.size() || forecasts.empty())
    throw std::invalid_argument("smape: need matching nonempty inputs");
  double sum = 0.0;
  for (std::size_t k = 0; k < forecasts.size(); ++k) {
    const double num = std::abs(forecasts[k] - actuals[k]);
    if (zero_safe) {
      sum += num / std::max(std::abs(actuals[k]) + std::abs(forecasts[k]) + epsilon,
                            0.5 + epsilon);
    } else {
      const double denom = (std::abs(actuals[k]) + std::abs(forecasts[k])) / 2.0;
      if (denom > 0.0) sum += num / denom;
      // both zero: the symmetric form's limit is 0
    }
  }
  return 100.0 * sum / static_cast<double>(forecasts.size());
}

// Mean absolute scaled error against the in-sample seasonal-naive forecast.
inline double mase(std::span<const double> forecasts, std::span<const double> actuals,
                   std::span<const double> train, std::size_t seasonal_period) {
  if (forecasts.size() != actuals.size() || forecasts.empty())
    throw std::invalid_argument("mase: need matching nonempty inputs");
  if (train.size() <= seasonal_period)
    throw std::invalid_argument("mase: train length must exceed seasonal_period");
  const auto n = static_cast<double>(forecasts.size());
  const auto m = static_cast<double>(train.size());
  const auto s = static_cast<double>(seasonal_period);
  double naive = 0.0;
  for (std::size_t k = seasonal_period; k < train.size(); ++k)
    naive += std::abs(train[k] - train[k - seasonal_period]);
  const double denom = n / (m - s) * naive;
  if (denom <= 0.0) throw MaseUndefined("mase: zero seasonal-naive denominator");
  double num = 0.0;
  for (std::size_t k = 0; k < forecasts.size(); ++k)
    num += std::abs(forecasts[k] - actuals[k]);
  return num / denom;
}

struct Aggregates {
  double mean = 0.0;
  double median = 0.0;
};

inline Aggregates aggregate(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate: empty input");
  Aggregates a;
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  a.mean = sum / static_cast<double>(sorted.size());
  const std::size_t n = sorted.size();
  a.median = n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  return a;
}

struct SeriesMetrics {
  double smape = 0.0;
  std::optional<double> mase;  // absent when the denominator vanished
};

struct MetricResult {
  std::vector<std::pair<std::string, SeriesMetrics>> per_series;  // sorted by id
  double mean_smape = 0.0;
  double median_smape = 0.0;
  std::optional<double> mean_mase;
  std::optional<double> median_mase;
  std::size_t mase_excluded = 0;
};

// Scores one forecast row per series against the actuals; `trains` supplies
// the in-sample history for the MASE denominator.
inline MetricResult evaluate_forecasts(
    const std::map<std::string, std::vector<double>>& forecasts,
    const std::map<std::string, std::vector<double>>& actuals,
    const std::map<std::string, std::vector<double>>& trains, std::size_t seasonal_period,
    bool zero_safe = false, double epsilon = 0.1) {
  MetricResult res;
  std::vector<double> smapes, mases;
  for (const auto& [id, f] : forecasts) {
    auto ia = actuals.find(id);
    if (ia == actuals.end()) throw std::invalid_argument("evaluate: missing actuals for " + id);
    SeriesMetrics sm;
    sm.smape = smape(f, ia->second, zero_safe, epsilon);
    smapes.push_back(sm.smape);
    auto it = trains.find(id);
    if (it != trains.end()) {
      try {
        sm.mase = mase(f, ia->second, it->second, seasonal_period);
        mases.push_back(*sm.mase);
      } catch (const MaseUndefined&) {
        ++res.mase_excluded;
      } catch (const std::invalid_argument&) {
        ++res.mase_excluded;
      }
    } else {
      ++res.mase_excluded;
    }
    res.per_series.emplace_back(id, sm);
  }
  if (smapes.empty()) throw std::invalid_argument("evaluate: no series");
  const auto agg_smape = aggregate(smapes);
  res.mean_smape = agg_smape.mean;
  res.median_smape = agg_smape.median;
  if (!mases.empty()) {
    const auto agg_mase = aggregate(mases);
    res.mean_mase = agg_mase.mean;
    res.median_mase = agg_mase.median;
  }
  return res;
}

}  // namespace gfm
