#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "gfm/preprocess.hpp"
#include "gfm/rng.hpp"

namespace gfm {

// ---------------------------------------------------------------------------
// Pooled regression: one linear model over the pooled lag windows of many
// series, solved exactly through the normal equations.

struct PooledRegressionModel {
  std::vector<double> coefficients;  // lag_count + exog_count entries
  double intercept = 0.0;
  double l2_weight = 0.0;
  std::size_t window_size = 0;  // lag count, excluding exogenous columns

  std::size_t input_dim() const { return coefficients.size(); }

  double predict(std::span<const double> x) const {
    double y = intercept;
    for (std::size_t i = 0; i < coefficients.size(); ++i) y += coefficients[i] * x[i];
    return y;
  }
};

namespace detail {

// Cholesky solve of a symmetric positive-definite system; returns false when
// a pivot collapses (singular or indefinite input).
inline bool cholesky_solve(std::vector<std::vector<double>> a, std::vector<double> b,
                           std::vector<double>& x) {
  const std::size_t n = a.size();
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j][j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j][k] * a[j][k];
    if (!(d > 1e-12)) return false;
    a[j][j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i][j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i][k] * a[j][k];
      a[i][j] = s / a[j][j];
    }
  }
  // forward substitution (L y = b), then back substitution (L^T x = y)
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i][k] * b[k];
    b[i] = s / a[i][i];
  }
  x.assign(n, 0.0);
  for (std::size_t ii = n; ii-- > 0;) {
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a[k][ii] * x[k];
    x[ii] = s / a[ii][ii];
  }
  return true;
}

}  // namespace detail

// Minimises sum of squared errors + l2_weight * ||coefficients||^2, with the
// intercept left unpenalised.
inline PooledRegressionModel fit_pr(const WindowSet& ws, double l2_weight = 0.0) {
  if (l2_weight < 0.0) throw std::invalid_argument("fit_pr: l2_weight must be nonnegative");
  const std::size_t dim = ws.input_dim();
  const std::size_t rows = ws.rows();
  if (rows < dim + 1)
    throw std::invalid_argument("fit_pr: need at least input_dim+1 rows, got " +
                                std::to_string(rows));
  const std::size_t p = dim + 1;  // intercept first
  std::vector<std::vector<double>> a(p, std::vector<double>(p, 0.0));
  std::vector<double> b(p, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& x = ws.inputs[r];
    a[0][0] += 1.0;
    b[0] += ws.targets[r];
    for (std::size_t i = 0; i < dim; ++i) {
      a[i + 1][0] += x[i];
      a[0][i + 1] += x[i];
      b[i + 1] += x[i] * ws.targets[r];
      for (std::size_t j = 0; j <= i; ++j) {
        a[i + 1][j + 1] += x[i] * x[j];
        if (j != i) a[j + 1][i + 1] += x[i] * x[j];
      }
    }
  }
  for (std::size_t i = 1; i < p; ++i) a[i][i] += l2_weight;

  std::vector<double> beta;
  if (!detail::cholesky_solve(std::move(a), std::move(b), beta))
    throw std::runtime_error(
        "fit_pr: singular normal equations; set l2_weight > 0 to regularise");
  PooledRegressionModel model;
  model.intercept = beta[0];
  model.coefficients.assign(beta.begin() + 1, beta.end());
  model.l2_weight = l2_weight;
  model.window_size = ws.lag_count;
  for (double c : model.coefficients)
    if (!std::isfinite(c)) throw std::runtime_error("fit_pr: non-finite coefficients");
  return model;
}

// ---------------------------------------------------------------------------
// Single-hidden-layer network, sigmoid hidden units, identity output, trained
// by full-batch gradient descent on MSE + decay * sum of squared parameters.

struct FfnnOptions {
  int hidden_nodes = 5;
  double decay = 0.0;
  int epochs = 200;
  double learning_rate = 0.05;
};

struct FFNNModel {
  std::size_t input_dim = 0;
  std::size_t window_size = 0;  // lag count
  int hidden_nodes = 0;
  double decay = 0.0;
  std::vector<double> w_in;      // input_dim * hidden, row-major by input
  std::vector<double> b_hidden;  // hidden
  std::vector<double> w_out;     // hidden
  double b_out = 0.0;

  double predict(std::span<const double> x) const {
    double y = b_out;
    for (int j = 0; j < hidden_nodes; ++j) {
      double z = b_hidden[static_cast<std::size_t>(j)];
      for (std::size_t i = 0; i < input_dim; ++i)
        z += w_in[i * static_cast<std::size_t>(hidden_nodes) + static_cast<std::size_t>(j)] * x[i];
      y += w_out[static_cast<std::size_t>(j)] / (1.0 + std::exp(-z));
    }
    return y;
  }
};

struct FfnnGradient {
  std::vector<double> w_in;
  std::vector<double> b_hidden;
  std::vector<double> w_out;
  double b_out = 0.0;
};

// Mean squared error plus the decay penalty; fills `grad` by backprop.
inline double ffnn_loss_and_gradient(const FFNNModel& m,
                                     const std::vector<std::vector<double>>& inputs,
                                     const std::vector<double>& targets, FfnnGradient& grad) {
  const std::size_t rows = inputs.size();
  const auto h = static_cast<std::size_t>(m.hidden_nodes);
  grad.w_in.assign(m.w_in.size(), 0.0);
  grad.b_hidden.assign(h, 0.0);
  grad.w_out.assign(h, 0.0);
  grad.b_out = 0.0;

  double loss = 0.0;
  std::vector<double> act(h);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& x = inputs[r];
    double y = m.b_out;
    for (std::size_t j = 0; j < h; ++j) {
      double z = m.b_hidden[j];
      for (std::size_t i = 0; i < m.input_dim; ++i) z += m.w_in[i * h + j] * x[i];
      act[j] = 1.0 / (1.0 + std::exp(-z));
      y += m.w_out[j] * act[j];
    }
    const double err = y - targets[r];
    loss += err * err;
    const double dy = 2.0 * err / static_cast<double>(rows);
    grad.b_out += dy;
    for (std::size_t j = 0; j < h; ++j) {
      grad.w_out[j] += dy * act[j];
      const double dz = dy * m.w_out[j] * act[j] * (1.0 - act[j]);
      grad.b_hidden[j] += dz;
      for (std::size_t i = 0; i < m.input_dim; ++i) grad.w_in[i * h + j] += dz * x[i];
    }
  }
  loss /= static_cast<double>(rows);

  if (m.decay > 0.0) {
    for (std::size_t i = 0; i < m.w_in.size(); ++i) {
      loss += m.decay * m.w_in[i] * m.w_in[i];
      grad.w_in[i] += 2.0 * m.decay * m.w_in[i];
    }
    for (std::size_t j = 0; j < h; ++j) {
      loss += m.decay * (m.b_hidden[j] * m.b_hidden[j] + m.w_out[j] * m.w_out[j]);
      grad.b_hidden[j] += 2.0 * m.decay * m.b_hidden[j];
      grad.w_out[j] += 2.0 * m.decay * m.w_out[j];
    }
    loss += m.decay * m.b_out * m.b_out;
    grad.b_out += 2.0 * m.decay * m.b_out;
  }
  return loss;
}

inline double ffnn_loss(const FFNNModel& m, const std::vector<std::vector<double>>& inputs,
                        const std::vector<double>& targets) {
  FfnnGradient scratch;
  return ffnn_loss_and_gradient(m, inputs, targets, scratch);
}

// Seeded uniform(-0.5, 0.5) initialisation; the draw order is part of the
// reproducibility contract.
inline FFNNModel init_ffnn(std::size_t input_dim, std::size_t lag_count, const FfnnOptions& opt,
                           std::uint64_t seed) {
  if (opt.hidden_nodes < 1) throw std::invalid_argument("init_ffnn: hidden_nodes must be >= 1");
  if (opt.decay < 0.0) throw std::invalid_argument("init_ffnn: decay must be nonnegative");
  FFNNModel m;
  m.input_dim = input_dim;
  m.window_size = lag_count;
  m.hidden_nodes = opt.hidden_nodes;
  m.decay = opt.decay;
  Rng rng(seed);
  const auto h = static_cast<std::size_t>(opt.hidden_nodes);
  m.w_in.resize(input_dim * h);
  for (auto& w : m.w_in) w = rng.uniform(-0.5, 0.5);
  m.b_hidden.resize(h);
  for (auto& w : m.b_hidden) w = rng.uniform(-0.5, 0.5);
  m.w_out.resize(h);
  for (auto& w : m.w_out) w = rng.uniform(-0.5, 0.5);
  m.b_out = rng.uniform(-0.5, 0.5);
  return m;
}

inline FFNNModel fit_ffnn(const WindowSet& ws, const FfnnOptions& opt, std::uint64_t seed) {
  if (ws.rows() < 1) throw std::invalid_argument("fit_ffnn: empty window set");
  FFNNModel m = init_ffnn(ws.input_dim(), ws.lag_count, opt, seed);
  FfnnGradient grad;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const double loss = ffnn_loss_and_gradient(m, ws.inputs, ws.targets, grad);
    if (!std::isfinite(loss))
      throw std::runtime_error("fit_ffnn: training diverged (non-finite loss); "
                               "lower learning_rate or decay");
    const double lr = opt.learning_rate;
    for (std::size_t i = 0; i < m.w_in.size(); ++i) m.w_in[i] -= lr * grad.w_in[i];
    for (std::size_t j = 0; j < m.b_hidden.size(); ++j) m.b_hidden[j] -= lr * grad.b_hidden[j];
    for (std::size_t j = 0; j < m.w_out.size(); ++j) m.w_out[j] -= lr * grad.w_out[j];
    m.b_out -= lr * grad.b_out;
  }
  for (double w : m.w_in)
    if (!std::isfinite(w)) throw std::runtime_error("fit_ffnn: non-finite parameters");
  return m;
}

// ---------------------------------------------------------------------------
// Recursive single-step forecasting shared by both global model types.

using GfmModel = std::variant<PooledRegressionModel, FFNNModel>;

inline std::size_t model_window(const GfmModel& m) {
  return std::visit([](const auto& x) { return x.window_size; }, m);
}

inline std::size_t model_input_dim(const GfmModel& m) {
  return std::visit(
      [](const auto& x) -> std::size_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, PooledRegressionModel>)
          return x.input_dim();
        else
          return x.input_dim;
      },
      m);
}

inline double model_predict(const GfmModel& m, std::span<const double> x) {
  return std::visit([&](const auto& model) { return model.predict(x); }, m);
}

// Each step feeds the last n observed-or-forecast values (plus that step's
// exogenous row, when the model was trained with one) back into the model.
inline std::vector<double> forecast_recursive(
    const GfmModel& model, std::span<const double> history, std::size_t horizon,
    const std::vector<std::vector<double>>& exog = {}) {
  const std::size_t n = model_window(model);
  const std::size_t dim = model_input_dim(model);
  if (history.size() < n)
    throw std::invalid_argument("forecast_recursive: history shorter than model window");
  if (!exog.empty() && exog.size() != horizon)
    throw std::invalid_argument("forecast_recursive: need one exog row per step");
  if (exog.empty() && dim != n)
    throw std::invalid_argument("forecast_recursive: model expects exogenous inputs");

  std::vector<double> window(history.end() - static_cast<std::ptrdiff_t>(n), history.end());
  std::vector<double> out;
  out.reserve(horizon);
  std::vector<double> input(dim);
  for (std::size_t step = 0; step < horizon; ++step) {
    std::copy(window.begin(), window.end(), input.begin());
    if (!exog.empty()) {
      if (exog[step].size() != dim - n)
        throw std::invalid_argument("forecast_recursive: exog width mismatch");
      std::copy(exog[step].begin(), exog[step].end(), input.begin() + static_cast<std::ptrdiff_t>(n));
    }
    const double y = model_predict(model, input);
    out.push_back(y);
    window.erase(window.begin());
    window.push_back(y);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Local univariate models: the exponential-smoothing family plus seasonal
// naive. Smoothing parameters come from a 0.05-step grid minimising in-sample
// one-step squared error.

enum class LocalKind { ses, holt, holt_winters_additive, seasonal_naive };

struct LocalModel {
  LocalKind kind = LocalKind::ses;
  double alpha = 0.0, beta = 0.0, gamma = 0.0;
  double level = 0.0, trend = 0.0;
  std::vector<double> seasonal;  // last period states; forecast j uses j % period
  std::size_t period = 1;
};

namespace detail {

struct SmoothingFit {
  double sse = std::numeric_limits<double>::infinity();
  double level = 0.0, trend = 0.0;
  std::vector<double> seasonal;
};

inline SmoothingFit run_ses(std::span<const double> x, double alpha) {
  SmoothingFit f;
  double level = x[0];
  f.sse = 0.0;
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double e = x[t] - level;
    f.sse += e * e;
    level = alpha * x[t] + (1.0 - alpha) * level;
  }
  f.level = level;
  return f;
}

inline SmoothingFit run_holt(std::span<const double> x, double alpha, double beta) {
  SmoothingFit f;
  double level = x[0];
  double trend = x[1] - x[0];
  f.sse = 0.0;
  for (std::size_t t = 1; t < x.size(); ++t) {
    const double pred = level + trend;
    const double e = x[t] - pred;
    f.sse += e * e;
    const double prev_level = level;
    level = alpha * x[t] + (1.0 - alpha) * (level + trend);
    trend = beta * (level - prev_level) + (1.0 - beta) * trend;
  }
  f.level = level;
  f.trend = trend;
  return f;
}

inline SmoothingFit run_holt_winters(std::span<const double> x, std::size_t p, double alpha,
                                     double beta, double gamma) {
  SmoothingFit f;
  // Initial states from the first two cycles: trend from cycle means, level
  // placed at the end of cycle one, seasonals detrended.
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    m1 += x[i];
    m2 += x[p + i];
  }
  m1 /= static_cast<double>(p);
  m2 /= static_cast<double>(p);
  double trend = (m2 - m1) / static_cast<double>(p);
  double level = m1 + trend * (static_cast<double>(p) - 1.0) / 2.0;
  std::vector<double> seasonal(x.size(), 0.0);
  for (std::size_t i = 0; i < p; ++i)
    seasonal[i] = x[i] - (m1 + (static_cast<double>(i) - (static_cast<double>(p) - 1.0) / 2.0) * trend);

  f.sse = 0.0;
  for (std::size_t t = p; t < x.size(); ++t) {
    const double pred = level + trend + seasonal[t - p];
    const double e = x[t] - pred;
    f.sse += e * e;
    const double prev_level = level;
    level = alpha * (x[t] - seasonal[t - p]) + (1.0 - alpha) * (level + trend);
    trend = beta * (level - prev_level) + (1.0 - beta) * trend;
    seasonal[t] = gamma * (x[t] - level) + (1.0 - gamma) * seasonal[t - p];
  }
  f.level = level;
  f.trend = trend;
  f.seasonal.assign(seasonal.end() - static_cast<std::ptrdiff_t>(p), seasonal.end());
  return f;
}

}  // namespace detail

inline LocalModel fit_local(std::span<const double> x, LocalKind kind, std::size_t period) {
  if (period == 0) throw std::invalid_argument("fit_local: period must be positive");
  LocalModel m;
  m.kind = kind;
  m.period = period;

  constexpr int kGridSteps = 20;  // 0.00, 0.05, ..., 1.00
  auto grid = [](int i) { return static_cast<double>(i) / kGridSteps; };

  switch (kind) {
    case LocalKind::ses: {
      if (x.size() < 2) throw std::invalid_argument("fit_local: ses needs length >= 2");
      detail::SmoothingFit best;
      for (int i = 0; i <= kGridSteps; ++i) {
        auto f = detail::run_ses(x, grid(i));
        if (f.sse < best.sse) {
          best = f;
          m.alpha = grid(i);
        }
      }
      m.level = best.level;
      break;
    }
    case LocalKind::holt: {
      if (x.size() < 2) throw std::invalid_argument("fit_local: holt needs length >= 2");
      detail::SmoothingFit best;
      for (int i = 0; i <= kGridSteps; ++i)
        for (int j = 0; j <= kGridSteps; ++j) {
          auto f = detail::run_holt(x, grid(i), grid(j));
          if (f.sse < best.sse) {
            best = f;
            m.alpha = grid(i);
            m.beta = grid(j);
          }
        }
      m.level = best.level;
      m.trend = best.trend;
      break;
    }
    case LocalKind::holt_winters_additive: {
      if (period < 2)
        throw std::invalid_argument("fit_local: holt_winters needs period >= 2");
      if (x.size() < 2 * period)
        throw std::invalid_argument("fit_local: holt_winters needs length >= 2*period");
      detail::SmoothingFit best;
      for (int i = 0; i <= kGridSteps; ++i)
        for (int j = 0; j <= kGridSteps; ++j)
          for (int g = 0; g <= kGridSteps; ++g) {
            auto f = detail::run_holt_winters(x, period, grid(i), grid(j), grid(g));
            if (f.sse < best.sse) {
              best = f;
              m.alpha = grid(i);
              m.beta = grid(j);
              m.gamma = grid(g);
            }
          }
      m.level = best.level;
      m.trend = best.trend;
      m.seasonal = best.seasonal;
      break;
    }
    case LocalKind::seasonal_naive: {
      if (x.size() < std::max<std::size_t>(2, period))
        throw std::invalid_argument("fit_local: seasonal_naive needs length >= period");
      m.seasonal.assign(x.end() - static_cast<std::ptrdiff_t>(period), x.end());
      break;
    }
  }
  return m;
}

inline std::vector<double> forecast_local(const LocalModel& m, std::size_t horizon) {
  std::vector<double> out;
  out.reserve(horizon);
  for (std::size_t j = 0; j < horizon; ++j) {
    switch (m.kind) {
      case LocalKind::ses:
        out.push_back(m.level);
        break;
      case LocalKind::holt:
        out.push_back(m.level + static_cast<double>(j + 1) * m.trend);
        break;
      case LocalKind::holt_winters_additive:
        out.push_back(m.level + static_cast<double>(j + 1) * m.trend +
                      m.seasonal[j % m.period]);
        break;
      case LocalKind::seasonal_naive:
        out.push_back(m.seasonal[j % m.period]);
        break;
    }
  }
  return out;
}

}  // namespace gfm
