#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gfm {

struct NormalizeResult {
  std::vector<double> values;
  double divisor = 1.0;
  double shift = 0.0;  // added before dividing; nonzero only for the degenerate-mean rule
};

// Divides by the series mean. A series whose mean is not positive is first
// shifted by (1 - min) so the result stays finite and positive; the shift is
// recorded for the inverse.
inline NormalizeResult mean_normalize(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean_normalize: empty input");
  double sum = 0.0;
  double min_v = x[0];
  for (double v : x) {
    if (!std::isfinite(v)) throw std::invalid_argument("mean_normalize: non-finite input");
    sum += v;
    min_v = std::min(min_v, v);
  }
  const double mean = sum / static_cast<double>(x.size());
  NormalizeResult r;
  if (mean > 0.0) {
    r.divisor = mean;
    r.shift = 0.0;
  } else {
    r.divisor = 1.0;
    r.shift = 1.0 - min_v;
  }
  r.values.reserve(x.size());
  for (double v : x) r.values.push_back((v + r.shift) / r.divisor);
  return r;
}

// log(x + 1), defined for x >= 0 only.
inline std::vector<double> log_transform(std::span<const double> x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (double v : x) {
    if (v < 0.0) throw std::invalid_argument("log_transform: negative input");
    out.push_back(std::log1p(v));
  }
  return out;
}

inline std::vector<double> log_inverse(std::span<const double> y) {
  std::vector<double> out;
  out.reserve(y.size());
  for (double v : y) out.push_back(std::expm1(v));
  return out;
}

namespace detail {

// Centred moving average; the classical trend estimate. Even windows use the
// standard (w+1)-point average with half weights at the ends. Values outside
// [begin, end) of the returned range are undefined.
struct TrendEstimate {
  std::vector<double> values;  // full length; only [begin, end) is meaningful
  std::size_t begin = 0;
  std::size_t end = 0;
};

inline TrendEstimate centered_ma(std::span<const double> x, std::size_t window) {
  const std::size_t n = x.size();
  TrendEstimate t;
  t.values.assign(n, 0.0);
  if (window <= 1) {
    for (std::size_t i = 0; i < n; ++i) t.values[i] = x[i];
    t.begin = 0;
    t.end = n;
    return t;
  }
  const std::size_t half = window / 2;
  if (n < window + (window % 2 == 0 ? 1 : 0)) {
    t.begin = t.end = 0;
    return t;
  }
  t.begin = half;
  t.end = n - half;
  if (window % 2 == 1) {
    for (std::size_t i = t.begin; i < t.end; ++i) {
      double s = 0.0;
      for (std::size_t j = i - half; j <= i + half; ++j) s += x[j];
      t.values[i] = s / static_cast<double>(window);
    }
  } else {
    for (std::size_t i = t.begin; i < t.end; ++i) {
      double s = 0.5 * (x[i - half] + x[i + half]);
      for (std::size_t j = i - half + 1; j <= i + half - 1; ++j) s += x[j];
      t.values[i] = s / static_cast<double>(window);
    }
  }
  return t;
}

}  // namespace detail

struct Decomposition {
  std::vector<double> seasonal;        // full length, period-periodic, zero mean per cycle
  std::vector<double> deseasonalized;  // x - seasonal
  std::vector<double> indices;         // one index per phase (t % period)
};

// Classical additive decomposition: centred-MA trend, per-phase mean seasonal
// indices re-centred to zero mean. Adding `seasonal` back (extended
// periodically) inverts exactly.
inline Decomposition classical_decompose(std::span<const double> x, std::size_t period) {
  if (period == 0) throw std::invalid_argument("classical_decompose: period must be positive");
  if (x.size() < 2 * period)
    throw std::invalid_argument("classical_decompose: need length >= 2*period, got " +
                                std::to_string(x.size()));
  const std::size_t n = x.size();
  Decomposition d;
  d.indices.assign(period, 0.0);
  if (period > 1) {
    auto trend = detail::centered_ma(x, period);
    std::vector<double> sums(period, 0.0);
    std::vector<std::size_t> counts(period, 0);
    for (std::size_t i = trend.begin; i < trend.end; ++i) {
      sums[i % period] += x[i] - trend.values[i];
      ++counts[i % period];
    }
    for (std::size_t p = 0; p < period; ++p)
      d.indices[p] = counts[p] ? sums[p] / static_cast<double>(counts[p]) : 0.0;
    double mean_idx = 0.0;
    for (double v : d.indices) mean_idx += v;
    mean_idx /= static_cast<double>(period);
    for (double& v : d.indices) v -= mean_idx;
  }
  d.seasonal.resize(n);
  d.deseasonalized.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    d.seasonal[i] = d.indices[i % period];
    d.deseasonalized[i] = x[i] - d.seasonal[i];
  }
  return d;
}

// [sin(2*pi*k*t/period), cos(2*pi*k*t/period)] for k = 1..K, interleaved.
inline std::vector<double> fourier_terms(std::size_t t, double period, std::size_t k_terms) {
  if (period <= 0.0) throw std::invalid_argument("fourier_terms: period must be positive");
  if (k_terms == 0) throw std::invalid_argument("fourier_terms: K must be positive");
  if (static_cast<double>(k_terms) > std::floor(period / 2.0))
    throw std::invalid_argument("fourier_terms: K exceeds floor(period/2)");
  std::vector<double> out;
  out.reserve(2 * k_terms);
  for (std::size_t k = 1; k <= k_terms; ++k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(t) / period;
    out.push_back(std::sin(angle));
    out.push_back(std::cos(angle));
  }
  return out;
}

// Lag-window size heuristic: ceil(1.25 * max(horizon, seasonal_period)).
inline std::size_t input_window_size(std::size_t horizon, std::size_t seasonal_period) {
  if (horizon == 0 || seasonal_period == 0)
    throw std::invalid_argument("input_window_size: arguments must be positive");
  const double m = static_cast<double>(std::max(horizon, seasonal_period));
  return static_cast<std::size_t>(std::ceil(1.25 * m));
}

// Training instances pooled across series: each row is the n lagged values
// (oldest first) optionally followed by exogenous regressors of the target
// time index; the target is the next value.
struct WindowSet {
  std::size_t lag_count = 0;
  std::size_t exog_count = 0;
  std::vector<std::vector<double>> inputs;
  std::vector<double> targets;
  std::vector<std::size_t> series_index;

  std::size_t input_dim() const { return lag_count + exog_count; }
  std::size_t rows() const { return inputs.size(); }
};

inline WindowSet make_windows(const std::vector<std::vector<double>>& series, std::size_t n,
                              const std::vector<std::string>& ids = {},
                              const std::vector<std::vector<std::vector<double>>>& exog = {}) {
  if (n == 0) throw std::invalid_argument("make_windows: window size must be positive");
  if (!exog.empty() && exog.size() != series.size())
    throw std::invalid_argument("make_windows: exog/series count mismatch");
  WindowSet ws;
  ws.lag_count = n;
  if (!exog.empty() && !exog.front().empty()) ws.exog_count = exog.front().front().size();
  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& x = series[s];
    if (x.size() < n + 1) {
      const std::string name = s < ids.size() ? ids[s] : std::to_string(s);
      throw std::invalid_argument("make_windows: series '" + name + "' shorter than window+1 (" +
                                  std::to_string(x.size()) + " < " + std::to_string(n + 1) + ")");
    }
    if (!exog.empty() && exog[s].size() != x.size())
      throw std::invalid_argument("make_windows: exog rows must align with series values");
    for (std::size_t t = n; t < x.size(); ++t) {
      std::vector<double> row(x.begin() + static_cast<std::ptrdiff_t>(t - n),
                              x.begin() + static_cast<std::ptrdiff_t>(t));
      if (!exog.empty()) {
        row.insert(row.end(), exog[s][t].begin(), exog[s][t].end());
        if (exog[s][t].size() != ws.exog_count)
          throw std::invalid_argument("make_windows: ragged exog width");
      }
      ws.inputs.push_back(std::move(row));
      ws.targets.push_back(x[t]);
      ws.series_index.push_back(s);
    }
  }
  return ws;
}

// ---------------------------------------------------------------------------
// Per-series pipeline: mean normalisation, optional log, optional
// deseasonalisation or Fourier regressors. Every applied step records enough
// to invert exactly, including over the forecast horizon.

enum class SeasonalityPolicy { none, deseasonalize, fourier };

inline SeasonalityPolicy seasonality_policy_from_string(const std::string& s) {
  if (s == "none") return SeasonalityPolicy::none;
  if (s == "deseasonalize") return SeasonalityPolicy::deseasonalize;
  if (s == "fourier") return SeasonalityPolicy::fourier;
  throw std::invalid_argument("unknown seasonality policy: " + s);
}

struct PipelineConfig {
  SeasonalityPolicy policy = SeasonalityPolicy::none;
  bool log_transform = false;
  std::size_t fourier_k = 3;  // clamped to floor(period/2)
};

struct PreprocessRecord {
  std::string series_id;
  double mean_divisor = 1.0;
  double shift = 0.0;
  bool log_applied = false;
  std::optional<std::vector<double>> seasonal_indices;  // per phase t % period
  std::size_t period = 1;
  std::size_t length = 0;  // original length; horizon phases continue from here
  std::vector<std::string> pipeline_order;
};

struct PreprocessedSeries {
  std::vector<double> values;
  std::vector<std::vector<double>> exog;  // per time index; empty when unused
  PreprocessRecord record;
};

inline PreprocessedSeries preprocess_series(const std::string& id, std::span<const double> x,
                                            std::size_t period, const PipelineConfig& cfg) {
  PreprocessedSeries out;
  out.record.series_id = id;
  out.record.period = period;
  out.record.length = x.size();

  NormalizeResult norm = mean_normalize(x);
  out.record.mean_divisor = norm.divisor;
  out.record.shift = norm.shift;
  out.record.pipeline_order.push_back("normalize");
  out.values = std::move(norm.values);

  if (cfg.log_transform) {
    bool nonneg = true;
    for (double v : out.values) nonneg &= v >= 0.0;
    // Series with negative normalised values keep their scale; the record
    // tracks which steps actually ran.
    if (nonneg) {
      out.values = gfm::log_transform(out.values);
      out.record.log_applied = true;
      out.record.pipeline_order.push_back("log");
    }
  }

  if (cfg.policy == SeasonalityPolicy::deseasonalize && period > 1 &&
      out.values.size() >= 2 * period) {
    Decomposition d = classical_decompose(out.values, period);
    out.record.seasonal_indices = d.indices;
    out.record.pipeline_order.push_back("deseasonalize");
    out.values = std::move(d.deseasonalized);
  } else if (cfg.policy == SeasonalityPolicy::fourier && period > 1) {
    const std::size_t max_k = static_cast<std::size_t>(std::floor(period / 2.0));
    const std::size_t k = std::min(cfg.fourier_k, max_k);
    if (k >= 1) {
      out.exog.reserve(out.values.size());
      for (std::size_t t = 0; t < out.values.size(); ++t)
        out.exog.push_back(fourier_terms(t, static_cast<double>(period), k));
      out.record.pipeline_order.push_back("fourier");
    }
  }
  return out;
}

// Inverts the pipeline over the original sample positions.
inline std::vector<double> inverse_series(std::span<const double> y,
                                          const PreprocessRecord& rec) {
  std::vector<double> out(y.begin(), y.end());
  for (auto it = rec.pipeline_order.rbegin(); it != rec.pipeline_order.rend(); ++it) {
    if (*it == "deseasonalize") {
      const auto& idx = *rec.seasonal_indices;
      for (std::size_t t = 0; t < out.size(); ++t) out[t] += idx[t % rec.period];
    } else if (*it == "log") {
      for (double& v : out) v = std::expm1(v);
    } else if (*it == "normalize") {
      for (double& v : out) v = v * rec.mean_divisor - rec.shift;
    }
  }
  return out;
}

// Inverts the pipeline for forecasts, whose time indices continue the series.
inline std::vector<double> inverse_forecast(std::span<const double> f,
                                            const PreprocessRecord& rec) {
  std::vector<double> out(f.begin(), f.end());
  for (auto it = rec.pipeline_order.rbegin(); it != rec.pipeline_order.rend(); ++it) {
    if (*it == "deseasonalize") {
      const auto& idx = *rec.seasonal_indices;
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += idx[(rec.length + j) % rec.period];
    } else if (*it == "log") {
      for (double& v : out) v = std::expm1(v);
    } else if (*it == "normalize") {
      for (double& v : out) v = v * rec.mean_divisor - rec.shift;
    }
  }
  return out;
}

// Exogenous rows for the horizon continuation, matching what
// preprocess_series produced for the sample positions.
inline std::vector<std::vector<double>> horizon_exog(const PreprocessedSeries& ps,
                                                     std::size_t horizon) {
  std::vector<std::vector<double>> out;
  if (ps.exog.empty()) return out;
  const std::size_t width = ps.exog.front().size();
  const std::size_t k = width / 2;
  out.reserve(horizon);
  for (std::size_t j = 0; j < horizon; ++j)
    out.push_back(fourier_terms(ps.record.length + j,
                                static_cast<double>(ps.record.period), k));
  return out;
}

}  // namespace gfm
