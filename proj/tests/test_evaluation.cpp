#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gfm/evaluation.hpp"
#include "gfm/rng.hpp"
#include "gfm/stats.hpp"

using namespace gfm;
using Catch::Approx;

TEST_CASE("smape hand-derived cases") {
  std::vector<double> y{4.0, 5.0, 6.0};
  CHECK(smape(y, y) == Approx(0.0).margin(1e-12));
  CHECK(smape(std::vector<double>{110.0}, std::vector<double>{90.0}) ==
        Approx(20.0).margin(1e-9));
  CHECK(smape(std::vector<double>{0.2}, std::vector<double>{0.0}, true, 0.1) ==
        Approx(100.0 * 0.2 / 0.6).margin(1e-9));
  // both-zero term contributes nothing in the standard form
  CHECK(smape(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}) ==
        Approx(0.0).margin(1e-12));
  CHECK_THROWS_AS(smape(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                  std::invalid_argument);
}

TEST_CASE("smape stays within [0, 200] and scales out") {
  Rng rng(101);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t n = 1 + rng.below(12);
    std::vector<double> f(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // keep |y|+|f| comfortably above the zero-safe clause
      f[i] = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.4, 20.0);
      y[i] = (rng.below(2) ? 1.0 : -1.0) * rng.uniform(0.4, 20.0);
    }
    const double standard = smape(f, y);
    CHECK(standard >= 0.0);
    CHECK(standard <= 200.0 + 1e-9);
    const double c = rng.uniform(1.0, 10.0);
    std::vector<double> cf(n), cy(n);
    for (std::size_t i = 0; i < n; ++i) {
      cf[i] = c * f[i];
      cy[i] = c * y[i];
    }
    CHECK(std::abs(smape(cf, cy) - standard) < 1e-9);

    const double safe = smape(f, y, true, 0.1);
    CHECK(safe >= 0.0);
  }
}

TEST_CASE("zero-safe smape stays bounded when the clause binds") {
  // tiny values: the max() clause caps the denominator at 0.5 + eps
  const double v = smape(std::vector<double>{0.01}, std::vector<double>{0.0}, true, 0.1);
  CHECK(v == Approx(100.0 * 0.01 / 0.6).margin(1e-12));
  CHECK(v >= 0.0);
}

TEST_CASE("mase hand-derived cases") {
  std::vector<double> train{1, 2, 3, 4};
  CHECK(mase(std::vector<double>{5.0}, std::vector<double>{6.0}, train, 1) ==
        Approx(1.0).margin(1e-9));
  CHECK(mase(std::vector<double>{6.0}, std::vector<double>{6.0}, train, 1) ==
        Approx(0.0).margin(1e-12));

  std::vector<double> f{5.0, 7.0}, y{6.0, 6.5}, tr{1, 2, 4, 3, 5};
  const double base = mase(f, y, tr, 1);
  std::vector<double> f10, y10, tr10;
  for (double v : f) f10.push_back(10 * v);
  for (double v : y) y10.push_back(10 * v);
  for (double v : tr) tr10.push_back(10 * v);
  CHECK(mase(f10, y10, tr10, 1) == Approx(base).margin(1e-9));
}

TEST_CASE("mase flags a constant in-sample naive denominator") {
  std::vector<double> train(6, 3.0);
  CHECK_THROWS_AS(mase(std::vector<double>{1.0}, std::vector<double>{2.0}, train, 1),
                  MaseUndefined);
  CHECK_THROWS_AS(mase(std::vector<double>{1.0}, std::vector<double>{2.0},
                       std::vector<double>{1.0}, 1),
                  std::invalid_argument);
}

TEST_CASE("aggregate mean and median") {
  auto a = aggregate(std::vector<double>{1, 2, 3});
  CHECK(a.mean == Approx(2.0));
  CHECK(a.median == Approx(2.0));
  auto b = aggregate(std::vector<double>{4, 1, 3, 2});
  CHECK(b.median == Approx(2.5));
  auto c = aggregate(std::vector<double>{7.5});
  CHECK(c.mean == Approx(7.5));
  CHECK(c.median == Approx(7.5));
}

TEST_CASE("evaluate_forecasts fills per-series metrics and exclusion counts") {
  std::map<std::string, std::vector<double>> forecasts{{"a", {5.0}}, {"b", {2.0}}};
  std::map<std::string, std::vector<double>> actuals{{"a", {6.0}}, {"b", {2.0}}};
  std::map<std::string, std::vector<double>> trains{{"a", {1, 2, 3, 4}}, {"b", {3, 3, 3, 3}}};
  auto res = evaluate_forecasts(forecasts, actuals, trains, 1);
  REQUIRE(res.per_series.size() == 2);
  CHECK(res.per_series[0].first == "a");
  CHECK(res.per_series[0].second.mase.has_value());
  CHECK(!res.per_series[1].second.mase.has_value());  // constant train excluded
  CHECK(res.mase_excluded == 1);
  REQUIRE(res.mean_mase.has_value());
  CHECK(*res.mean_mase == Approx(1.0).margin(1e-9));
}

TEST_CASE("friedman statistic matches the hand-computed example") {
  // 3 models x 4 datasets, strict order A < B < C everywhere
  std::vector<std::vector<double>> errors;
  for (int d = 0; d < 4; ++d) errors.push_back({1.0 + d, 2.0 + d, 3.0 + d});
  auto r = friedman_test(errors);
  CHECK(r.statistic == Approx(8.0).margin(1e-12));
  // chi-square tail with two degrees of freedom has the closed form e^{-x/2}
  CHECK(r.p_value == Approx(std::exp(-4.0)).margin(1e-10));
  CHECK(r.average_ranks[0] == Approx(1.0));
  CHECK(r.average_ranks[1] == Approx(2.0));
  CHECK(r.average_ranks[2] == Approx(3.0));
}

TEST_CASE("friedman with identical models ties every rank") {
  std::vector<std::vector<double>> errors(3, std::vector<double>{5.0, 5.0, 5.0});
  auto r = friedman_test(errors);
  CHECK(r.statistic == Approx(0.0).margin(1e-12));
  CHECK(r.p_value == Approx(1.0));
  for (double rank : r.average_ranks) CHECK(rank == Approx(2.0));
}

TEST_CASE("friedman is invariant under column permutation and ranks are consistent") {
  Rng rng(55);
  std::vector<std::vector<double>> errors;
  for (int d = 0; d < 6; ++d) {
    std::vector<double> row;
    for (int m = 0; m < 4; ++m) row.push_back(rng.uniform(0.0, 1.0));
    errors.push_back(row);
  }
  auto r = friedman_test(errors);
  // permute columns 0 <-> 2
  auto permuted = errors;
  for (auto& row : permuted) std::swap(row[0], row[2]);
  auto rp = friedman_test(permuted);
  CHECK(rp.statistic == Approx(r.statistic).margin(1e-12));
  CHECK(rp.average_ranks[0] == Approx(r.average_ranks[2]));
  // average ranks across models average to (k+1)/2
  double sum = 0.0;
  for (double v : r.average_ranks) sum += v;
  CHECK(sum / 4.0 == Approx(2.5).margin(1e-12));
  CHECK_THROWS_AS(friedman_test({{1.0}, {2.0}}), std::invalid_argument);
}

namespace {

// Independent enumeration oracle for small signed-rank cases.
double wilcoxon_enumeration_oracle(std::vector<double> a, std::vector<double> b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) d.push_back(a[i] - b[i]);
  const std::size_t n = d.size();
  std::vector<double> abs_d;
  for (double v : d) abs_d.push_back(std::abs(v));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return abs_d[x] < abs_d[y]; });
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
    for (std::size_t t = i; t <= j; ++t)
      rank[order[t]] = (static_cast<double>(i + j)) / 2.0 + 1.0;
    i = j + 1;
  }
  double w = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (d[k] > 0) w += rank[k];
  std::size_t ge = 0, le = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    double wm = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (mask & (1ULL << k)) wm += rank[k];
    if (wm >= w - 1e-12) ++ge;
    if (wm <= w + 1e-12) ++le;
  }
  const double tail = static_cast<double>(std::min(ge, le)) / std::pow(2.0, double(n));
  return std::min(1.0, 2.0 * tail);
}

}  // namespace

TEST_CASE("wilcoxon exact five-pair case") {
  std::vector<double> a{2, 4, 6, 8, 10}, b{1, 3, 5, 7, 9};
  CHECK(wilcoxon_signed_rank(a, b) == Approx(0.0625).margin(1e-15));
  CHECK(wilcoxon_enumeration_oracle(a, b) == Approx(0.0625).margin(1e-15));
}

TEST_CASE("wilcoxon equals the enumeration oracle on random small samples") {
  Rng rng(202);
  for (int rep = 0; rep < 40; ++rep) {
    const std::size_t n = 2 + rng.below(9);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = rng.uniform(0.0, 4.0);
      b[i] = rng.below(4) == 0 ? a[i] : rng.uniform(0.0, 4.0);
    }
    bool all_zero = false;
    const double p = wilcoxon_signed_rank(a, b, &all_zero);
    if (all_zero) {
      CHECK(p == 1.0);
      continue;
    }
    CHECK(p == Approx(wilcoxon_enumeration_oracle(a, b)).margin(1e-12));
    CHECK(wilcoxon_signed_rank(b, a) == Approx(p).margin(1e-12));  // swap symmetry
  }
}

TEST_CASE("wilcoxon flags identical samples") {
  std::vector<double> a{1, 2, 3};
  bool all_zero = false;
  CHECK(wilcoxon_signed_rank(a, a, &all_zero) == 1.0);
  CHECK(all_zero);
}

TEST_CASE("wilcoxon normal approximation behaves sensibly above 20 pairs") {
  Rng rng(203);
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) {
    const double v = rng.uniform(0.0, 1.0);
    a.push_back(v + 0.5);  // uniformly shifted: strongly significant
    b.push_back(v);
  }
  const double p = wilcoxon_signed_rank(a, b);
  CHECK(p > 0.0);
  CHECK(p < 1e-4);
  CHECK(wilcoxon_signed_rank(b, a) == Approx(p).margin(1e-12));

  std::vector<double> c, d;
  Rng noise(204);
  for (int i = 0; i < 40; ++i) {
    c.push_back(noise.uniform(0.0, 1.0));
    d.push_back(noise.uniform(0.0, 1.0));
  }
  const double pn = wilcoxon_signed_rank(c, d);
  CHECK(pn >= 0.0);
  CHECK(pn <= 1.0);
}

TEST_CASE("holm adjustment matches the worked example") {
  auto adj = holm_adjust(std::vector<double>{0.01, 0.04, 0.03});
  REQUIRE(adj.size() == 3);
  CHECK(adj[0] == Approx(0.03).margin(1e-12));
  CHECK(adj[1] == Approx(0.06).margin(1e-12));
  CHECK(adj[2] == Approx(0.06).margin(1e-12));

  auto single = holm_adjust(std::vector<double>{0.2});
  CHECK(single[0] == Approx(0.2));

  auto zeros = holm_adjust(std::vector<double>{0.0, 0.0, 0.0});
  for (double v : zeros) CHECK(v == 0.0);
}

TEST_CASE("holm adjustment properties hold on fuzzed inputs") {
  Rng rng(301);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = 1 + rng.below(10);
    std::vector<double> p(m);
    for (auto& v : p) v = rng.uniform(0.0, 1.0);
    auto adj = holm_adjust(p);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    for (std::size_t i = 0; i < m; ++i) {
      CHECK(adj[i] >= p[i]);  // adjusted >= raw
      CHECK(adj[i] <= 1.0);
      if (i > 0) CHECK(adj[order[i]] >= adj[order[i - 1]] - 1e-15);  // monotone in raw order
    }
  }
}

TEST_CASE("stat_test_report wires ranks and holm-adjusted pairs together") {
  std::vector<std::vector<double>> errors;
  for (int d = 0; d < 5; ++d)
    errors.push_back({1.0 + 0.1 * d, 2.0 + 0.1 * d, 3.0 + 0.1 * d});
  auto rep = stat_test_report(errors, {"A", "B", "C"});
  REQUIRE(rep.pairwise.size() == 3);
  for (const auto& pc : rep.pairwise) CHECK(pc.holm_p >= pc.raw_p);
  CHECK(rep.friedman_statistic == Approx(10.0).margin(1e-9));
  double sum = 0.0;
  for (double r : rep.average_ranks) sum += r;
  CHECK(sum == Approx(6.0));
}
