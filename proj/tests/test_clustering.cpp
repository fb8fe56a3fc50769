#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "gfm/clustering.hpp"
#include "gfm/rng.hpp"

using namespace gfm;
using Catch::Approx;

namespace {

// Explicit enumeration of every monotone alignment path, independent of the
// dynamic-programming implementation.
double dtw_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
  double best = std::numeric_limits<double>::infinity();
  struct Frame {
    std::size_t i, j;
    double cost;
  };
  std::vector<Frame> stack{{0, 0, std::abs(a[0] - b[0])}};
  while (!stack.empty()) {
    Frame f = stack.back();
    stack.pop_back();
    if (f.i == a.size() - 1 && f.j == b.size() - 1) {
      best = std::min(best, f.cost);
      continue;
    }
    if (f.i + 1 < a.size() && f.j + 1 < b.size())
      stack.push_back({f.i + 1, f.j + 1, f.cost + std::abs(a[f.i + 1] - b[f.j + 1])});
    if (f.i + 1 < a.size())
      stack.push_back({f.i + 1, f.j, f.cost + std::abs(a[f.i + 1] - b[f.j])});
    if (f.j + 1 < b.size())
      stack.push_back({f.i, f.j + 1, f.cost + std::abs(a[f.i] - b[f.j + 1])});
  }
  return best;
}

FeatureMatrix two_blob_features(int per_blob, double separation, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix fm;
  for (int i = 0; i < 2 * per_blob; ++i) {
    FeatureVector r{};
    const double cx = i < per_blob ? 0.0 : separation;
    r[0] = cx + rng.normal(0.0, 0.25);
    r[1] = rng.normal(0.0, 0.25);
    fm.rows.push_back(r);
    fm.ids.push_back("s" + std::to_string(i));
  }
  return fm;
}

bool labels_match_blobs(const ClusterAssignment& a, int per_blob) {
  std::set<int> first, second;
  for (int i = 0; i < per_blob; ++i) first.insert(a.labels[static_cast<std::size_t>(i)]);
  for (int i = per_blob; i < 2 * per_blob; ++i)
    second.insert(a.labels[static_cast<std::size_t>(i)]);
  return first.size() == 1 && second.size() == 1 && *first.begin() != *second.begin();
}

void check_partition(const ClusterAssignment& a, std::size_t count) {
  REQUIRE(a.labels.size() == count);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(a.k), 0);
  for (int l : a.labels) {
    REQUIRE(l >= 0);
    REQUIRE(l < a.k);
    ++sizes[static_cast<std::size_t>(l)];
  }
  for (int c = 0; c < a.k; ++c) {
    const bool empty = sizes[static_cast<std::size_t>(c)] == 0;
    const bool recorded =
        std::find(a.collapsed.begin(), a.collapsed.end(), c) != a.collapsed.end();
    CHECK(empty == recorded);
  }
}

}  // namespace

TEST_CASE("kmeans with k=1 reports total scatter about the grand centroid") {
  auto fm = two_blob_features(4, 3.0, 1);
  auto a = kmeans(fm, 1, 42);
  check_partition(a, fm.rows.size());
  FeatureVector centroid{};
  for (const auto& r : fm.rows)
    for (std::size_t c = 0; c < kFeatureCount; ++c) centroid[c] += r[c];
  for (auto& v : centroid) v /= static_cast<double>(fm.rows.size());
  double ss = 0.0;
  for (const auto& r : fm.rows)
    for (std::size_t c = 0; c < kFeatureCount; ++c)
      ss += (r[c] - centroid[c]) * (r[c] - centroid[c]);
  CHECK(a.inertia == Approx(ss).margin(1e-9));
}

TEST_CASE("kmeans with k=rows gives singleton clusters and zero inertia") {
  auto fm = two_blob_features(3, 5.0, 2);
  auto a = kmeans(fm, static_cast<int>(fm.rows.size()), 7);
  CHECK(a.inertia == Approx(0.0).margin(1e-12));
  std::set<int> labels(a.labels.begin(), a.labels.end());
  CHECK(labels.size() == fm.rows.size());
}

TEST_CASE("kmeans separates well-separated blobs for every seed") {
  auto fm = two_blob_features(8, 10.0, 3);
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 17ULL, 99ULL, 12345ULL}) {
    auto a = kmeans(fm, 2, seed, KmeansInit::plusplus);
    CHECK(labels_match_blobs(a, 8));
    auto b = kmeans(fm, 2, seed, KmeansInit::random);
    CHECK(labels_match_blobs(b, 8));
  }
}

TEST_CASE("kmeans inertia trace never increases") {
  Rng rng(123);
  FeatureMatrix fm;
  for (int i = 0; i < 40; ++i) {
    FeatureVector r{};
    for (auto& v : r) v = rng.uniform(-2.0, 2.0);
    fm.rows.push_back(r);
    fm.ids.push_back("s" + std::to_string(i));
  }
  for (int k : {2, 3, 5}) {
    auto a = kmeans(fm, k, 31 + static_cast<std::uint64_t>(k));
    REQUIRE(a.inertia_trace.size() >= 1);
    for (std::size_t i = 1; i < a.inertia_trace.size(); ++i)
      CHECK(a.inertia_trace[i] <= a.inertia_trace[i - 1] + 1e-9);
  }
}

TEST_CASE("kmeans is deterministic given the seed") {
  auto fm = two_blob_features(6, 2.0, 9);
  auto a = kmeans(fm, 3, 5);
  auto b = kmeans(fm, 3, 5);
  CHECK(a.labels == b.labels);
  CHECK(a.inertia == b.inertia);
}

TEST_CASE("dtw_distance hand cases") {
  std::vector<double> x{1, 5, 2, 3};
  CHECK(dtw_distance(x, x) == 0.0);
  CHECK(dtw_distance(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 2, 3}) == 0.0);
  CHECK(dtw_distance(std::vector<double>{0, 0}, std::vector<double>{1, 1}) == 2.0);
  CHECK_THROWS_AS(dtw_distance(std::vector<double>{}, x), std::invalid_argument);
}

TEST_CASE("dtw_distance equals the path-enumeration oracle on short pairs") {
  Rng rng(77);
  for (int rep = 0; rep < 60; ++rep) {
    std::vector<double> a(1 + rng.below(6)), b(1 + rng.below(6));
    for (auto& v : a) v = rng.uniform(-5.0, 5.0);
    for (auto& v : b) v = rng.uniform(-5.0, 5.0);
    CHECK(dtw_distance(a, b) == dtw_brute_force(a, b));
    CHECK(dtw_distance(b, a) == dtw_distance(a, b));  // symmetry
  }
}

TEST_CASE("dtw_distance is bounded by the pointwise L1 distance for equal lengths") {
  Rng rng(78);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(5 + rng.below(10)), b(a.size());
    for (auto& v : a) v = rng.uniform(-3.0, 3.0);
    for (auto& v : b) v = rng.uniform(-3.0, 3.0);
    double l1 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) l1 += std::abs(a[i] - b[i]);
    const double d = dtw_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= l1 + 1e-12);
  }
}

TEST_CASE("kmedoids_dtw separates a family from its perturbed variant") {
  std::vector<double> base{0, 1, 4, 9, 4, 1, 0, 1, 4, 9};
  std::vector<double> warped{0, 1, 1, 4, 9, 9, 4, 1, 0, 1, 4, 4, 9};  // dtw(base, warped) small
  std::vector<double> other{9, 0, 9, 0, 9, 0, 9, 0, 9, 0};
  std::vector<std::vector<double>> series;
  for (int i = 0; i < 3; ++i) series.push_back(i % 2 == 0 ? base : warped);
  for (int i = 0; i < 3; ++i) {
    auto v = other;
    v[0] += i;  // slight within-family variation
    series.push_back(v);
  }
  auto a = kmedoids_dtw(series, 2, 1);
  check_partition(a, series.size());
  std::set<int> fam_a(a.labels.begin(), a.labels.begin() + 3);
  std::set<int> fam_b(a.labels.begin() + 3, a.labels.end());
  CHECK(fam_a.size() == 1);
  CHECK(fam_b.size() == 1);
  CHECK(*fam_a.begin() != *fam_b.begin());
}

TEST_CASE("kmedoids_dtw trivial cases") {
  std::vector<std::vector<double>> series{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}};
  auto all = kmedoids_dtw(series, 3, 1);
  CHECK(all.inertia == 0.0);

  auto one = kmedoids_dtw({{5, 5, 5}}, 1, 1);
  CHECK(one.labels == std::vector<int>{0});
  CHECK(one.inertia == 0.0);
}

TEST_CASE("kmedoids swap trace never increases") {
  Rng rng(500);
  std::vector<std::vector<double>> series;
  for (int i = 0; i < 12; ++i) {
    std::vector<double> v(15);
    for (auto& x : v) x = rng.uniform(0.0, 10.0);
    series.push_back(v);
  }
  auto a = kmedoids_dtw(series, 3, 2);
  for (std::size_t i = 1; i < a.inertia_trace.size(); ++i)
    CHECK(a.inertia_trace[i] <= a.inertia_trace[i - 1] + 1e-12);
}

TEST_CASE("random_partition basics") {
  auto one = random_partition(7, 1, 9);
  for (int l : one.labels) CHECK(l == 0);

  auto a = random_partition(20, 4, 123);
  auto b = random_partition(20, 4, 123);
  CHECK(a.labels == b.labels);
  check_partition(a, 20);
  CHECK(a.collapsed.empty());  // repair rule guarantees no empty cluster

  auto singletons = random_partition(6, 6, 5);
  std::set<int> seen(singletons.labels.begin(), singletons.labels.end());
  CHECK(seen.size() == 6);

  CHECK_THROWS_AS(random_partition(3, 4, 1), std::invalid_argument);
}

TEST_CASE("random_partition never leaves an empty cluster") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto a = random_partition(9, 7, seed);
    check_partition(a, 9);
    CHECK(a.collapsed.empty());
  }
}

TEST_CASE("elbow_pick matches an independent geometry oracle") {
  const std::vector<double> ks{1, 2, 3, 4, 5, 6};
  const std::vector<double> wcss{100, 40, 35, 33, 32, 31};
  // point-line distance computed the textbook way
  const double x1 = ks.front(), y1 = wcss.front(), x2 = ks.back(), y2 = wcss.back();
  std::size_t expect = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double d = std::abs((y2 - y1) * ks[i] - (x2 - x1) * wcss[i] + x2 * y1 - y2 * x1) /
                     std::sqrt((y2 - y1) * (y2 - y1) + (x2 - x1) * (x2 - x1));
    if (d > best) {
      best = d;
      expect = i;
    }
  }
  CHECK(expect == 1);  // k = 2
  CHECK(elbow_pick(ks, wcss) == expect);
}

TEST_CASE("elbow_pick tie-breaks a linear profile to the smallest k") {
  const std::vector<double> ks{2, 3, 4, 5};
  const std::vector<double> wcss{80, 60, 40, 20};
  CHECK(elbow_pick(ks, wcss) == 0);
}

TEST_CASE("elbow_optimal_k finds two blobs") {
  auto fm = two_blob_features(10, 12.0, 21);
  CHECK(elbow_optimal_k(fm, 1, 6, 77) == 2);
  CHECK_THROWS_AS(elbow_optimal_k(fm, 3, 2, 1), std::invalid_argument);
}

TEST_CASE("every method yields a valid partition") {
  auto fm = two_blob_features(5, 1.0, 33);
  std::vector<std::vector<double>> raw;
  for (int i = 0; i < 10; ++i) {
    std::vector<double> v(12);
    Rng r(static_cast<std::uint64_t>(i) + 1000);
    for (auto& x : v) x = r.uniform(0.0, 5.0);
    raw.push_back(v);
  }
  for (int k : {1, 2, 3, 7, 10}) {
    check_partition(kmeans(fm, k, 4, KmeansInit::random), 10);
    check_partition(kmeans(fm, k, 4, KmeansInit::plusplus), 10);
    check_partition(kmedoids_dtw(raw, k, 4), 10);
    check_partition(random_partition(10, k, 4), 10);
  }
}
