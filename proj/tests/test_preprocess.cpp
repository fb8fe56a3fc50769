#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gfm/preprocess.hpp"
#include "gfm/rng.hpp"

using namespace gfm;
using Catch::Approx;

TEST_CASE("mean_normalize divides by the mean") {
  auto r = mean_normalize(std::vector<double>{2, 4, 6});
  CHECK(r.divisor == Approx(4.0));
  CHECK(r.shift == 0.0);
  CHECK(r.values[0] == Approx(0.5));
  CHECK(r.values[1] == Approx(1.0));
  CHECK(r.values[2] == Approx(1.5));

  auto eq = mean_normalize(std::vector<double>{5, 5});
  CHECK(eq.divisor == Approx(5.0));
  CHECK(eq.values == std::vector<double>{1.0, 1.0});
}

TEST_CASE("mean_normalize degenerate-mean shift rule") {
  auto r = mean_normalize(std::vector<double>{0, 0, 0});
  CHECK(r.divisor == 1.0);
  CHECK(r.shift == 1.0);
  for (double v : r.values) {
    CHECK(std::isfinite(v));
    CHECK(v == Approx(1.0));
  }
  auto neg = mean_normalize(std::vector<double>{-3, 1});  // mean = -1
  CHECK(neg.divisor == 1.0);
  CHECK(neg.shift == Approx(4.0));
  CHECK(neg.values[0] == Approx(1.0));
}

TEST_CASE("log_transform examples and round trip") {
  CHECK(log_transform(std::vector<double>{0.0})[0] == Approx(0.0));
  CHECK(log_transform(std::vector<double>{std::exp(1.0) - 1.0})[0] == Approx(1.0));
  std::vector<double> x{0.5, 2, 7};
  auto back = log_inverse(log_transform(x));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(back[i] == Approx(x[i]).epsilon(1e-12));
  CHECK_THROWS_AS(log_transform(std::vector<double>{-0.1}), std::invalid_argument);
}

TEST_CASE("classical_decompose flattens a pure periodic series") {
  // period-4 pattern plus a constant: deseasonalized must be that constant
  const std::vector<double> pattern{2.0, -1.0, 0.5, -1.5};
  const double level = 10.0;
  std::vector<double> x;
  for (int i = 0; i < 24; ++i) x.push_back(level + pattern[i % 4]);
  auto d = classical_decompose(x, 4);
  const double expected = level + (pattern[0] + pattern[1] + pattern[2] + pattern[3]) / 4.0;
  for (double v : d.deseasonalized) CHECK(v == Approx(expected).margin(1e-9));
  double idx_mean = 0.0;
  for (double v : d.indices) idx_mean += v;
  CHECK(std::abs(idx_mean / 4.0) < 1e-9);
}

TEST_CASE("classical_decompose with period 1 is the identity") {
  std::vector<double> x{3, 1, 4, 1, 5};
  auto d = classical_decompose(x, 1);
  for (double v : d.seasonal) CHECK(v == 0.0);
  CHECK(d.deseasonalized == x);
}

TEST_CASE("classical_decompose rejects short series") {
  CHECK_THROWS_AS(classical_decompose(std::vector<double>{1, 2, 3}, 2), std::invalid_argument);
}

TEST_CASE("seasonal re-extension reconstructs a held-out periodic tail") {
  const std::vector<double> pattern{1.0, 3.0, -2.0, 0.5, -2.5};
  std::vector<double> full;
  for (int i = 0; i < 40; ++i) full.push_back(7.0 + pattern[i % 5]);
  const std::size_t horizon = 10;
  std::vector<double> head(full.begin(), full.end() - horizon);
  auto d = classical_decompose(head, 5);
  // constant deseasonalized level continued + periodic extension
  const double level = d.deseasonalized[0];
  for (std::size_t j = 0; j < horizon; ++j) {
    const double rebuilt = level + d.indices[(head.size() + j) % 5];
    CHECK(rebuilt == Approx(full[head.size() + j]).margin(1e-9));
  }
}

TEST_CASE("fourier_terms basic values and periodicity") {
  auto f0 = fourier_terms(0, 12.0, 1);
  CHECK(f0[0] == Approx(0.0).margin(1e-12));
  CHECK(f0[1] == Approx(1.0).margin(1e-12));

  auto fq = fourier_terms(3, 12.0, 1);  // quarter period
  CHECK(fq[0] == Approx(1.0).margin(1e-12));
  CHECK(fq[1] == Approx(0.0).margin(1e-12));

  auto a = fourier_terms(5, 12.0, 3);
  auto b = fourier_terms(17, 12.0, 3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == Approx(b[i]).margin(1e-9));

  CHECK_THROWS_AS(fourier_terms(0, 12.0, 7), std::invalid_argument);
}

TEST_CASE("input_window_size heuristic") {
  CHECK(input_window_size(18, 12) == 23);
  CHECK(input_window_size(6, 12) == 15);
  CHECK(input_window_size(1, 1) == 2);
}

TEST_CASE("input_window_size is monotone in both arguments") {
  for (std::size_t h = 1; h < 30; ++h)
    for (std::size_t p = 1; p < 30; ++p) {
      CHECK(input_window_size(h + 1, p) >= input_window_size(h, p));
      CHECK(input_window_size(h, p + 1) >= input_window_size(h, p));
    }
}

TEST_CASE("make_windows produces contiguous lag/target pairs") {
  auto ws = make_windows({{1, 2, 3, 4, 5}}, 2);
  REQUIRE(ws.rows() == 3);
  CHECK(ws.inputs[0] == std::vector<double>{1, 2});
  CHECK(ws.targets[0] == 3);
  CHECK(ws.inputs[1] == std::vector<double>{2, 3});
  CHECK(ws.targets[1] == 4);
  CHECK(ws.inputs[2] == std::vector<double>{3, 4});
  CHECK(ws.targets[2] == 5);
}

TEST_CASE("make_windows boundary and counting") {
  auto one = make_windows({{1, 2, 3}}, 2);
  CHECK(one.rows() == 1);

  std::vector<std::vector<double>> two{{1, 2, 3, 4, 5, 6}, {1, 2, 3, 4, 5, 6, 7, 8}};
  auto ws = make_windows(two, 3);
  CHECK(ws.rows() == 3 + 5);
  for (std::size_t r = 0; r < ws.rows(); ++r) CHECK(ws.series_index[r] == (r < 3 ? 0u : 1u));

  CHECK_THROWS_WITH(make_windows({{1, 2}}, 2, {"tiny"}),
                    Catch::Matchers::ContainsSubstring("tiny"));
}

TEST_CASE("pipeline round trip over fuzzed series") {
  Rng rng(20240811);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t len = 12 + rng.below(60);
    std::vector<double> x;
    const int kind = static_cast<int>(rng.below(5));
    for (std::size_t t = 0; t < len; ++t) {
      switch (kind) {
        case 0: x.push_back(0.0); break;                           // all zero
        case 1: x.push_back(7.25); break;                          // constant
        case 2: x.push_back(rng.uniform(-50.0, 50.0)); break;      // signed noise
        case 3: x.push_back(rng.uniform(0.0, 100.0)); break;       // nonnegative
        default:
          x.push_back(10.0 + 5.0 * std::sin(2.0 * 3.14159265358979 * t / 6.0) +
                      rng.normal(0.0, 0.5));
      }
    }
    PipelineConfig cfg;
    cfg.log_transform = rng.below(2) == 0;
    const int policy = static_cast<int>(rng.below(3));
    cfg.policy = policy == 0   ? SeasonalityPolicy::none
                 : policy == 1 ? SeasonalityPolicy::deseasonalize
                               : SeasonalityPolicy::fourier;
    auto ps = preprocess_series("s", x, 6, cfg);
    auto back = inverse_series(ps.values, ps.record);
    REQUIRE(back.size() == x.size());
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double tol = 1e-9 * std::max(1.0, std::abs(x[t]));
      CHECK(std::abs(back[t] - x[t]) <= tol);
    }
  }
}

TEST_CASE("pipeline records the applied steps in order") {
  std::vector<double> x;
  for (int i = 0; i < 30; ++i) x.push_back(5.0 + (i % 6));
  PipelineConfig cfg;
  cfg.log_transform = true;
  cfg.policy = SeasonalityPolicy::deseasonalize;
  auto ps = preprocess_series("s", x, 6, cfg);
  CHECK(ps.record.pipeline_order ==
        std::vector<std::string>{"normalize", "log", "deseasonalize"});
  CHECK(ps.record.log_applied);
  REQUIRE(ps.record.seasonal_indices.has_value());

  // negative values suppress the log step but keep everything invertible
  std::vector<double> with_neg{-5, 10, 2, -1, 4, 6, 7, 8, -2, 3, 1, 9};
  auto ps2 = preprocess_series("n", with_neg, 6, cfg);
  CHECK(!ps2.record.log_applied);
  auto back = inverse_series(ps2.values, ps2.record);
  for (std::size_t t = 0; t < with_neg.size(); ++t)
    CHECK(back[t] == Approx(with_neg[t]).margin(1e-9));
}

TEST_CASE("fourier policy emits exogenous rows aligned with the horizon") {
  std::vector<double> x;
  for (int i = 0; i < 30; ++i) x.push_back(5.0 + (i % 6));
  PipelineConfig cfg;
  cfg.policy = SeasonalityPolicy::fourier;
  cfg.fourier_k = 2;
  auto ps = preprocess_series("s", x, 6, cfg);
  REQUIRE(ps.exog.size() == x.size());
  CHECK(ps.exog[0].size() == 4);
  auto hx = horizon_exog(ps, 3);
  REQUIRE(hx.size() == 3);
  // horizon rows continue the sample's time indexing
  auto expect = fourier_terms(30, 6.0, 2);
  for (std::size_t i = 0; i < 4; ++i) CHECK(hx[0][i] == Approx(expect[i]).margin(1e-12));
}
