#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfm/dtw.hpp"
#include "gfm/features.hpp"
#include "gfm/rng.hpp"

namespace gfm {

enum class ClusterMethod { kmeans, kmeanspp, kmedoids_dtw, random };

inline ClusterMethod cluster_method_from_string(const std::string& s) {
  if (s == "kmeans") return ClusterMethod::kmeans;
  if (s == "kmeanspp") return ClusterMethod::kmeanspp;
  if (s == "kmedoids_dtw") return ClusterMethod::kmedoids_dtw;
  if (s == "random") return ClusterMethod::random;
  throw std::invalid_argument("unknown cluster method: " + s);
}

inline std::string to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::kmeanspp: return "kmeanspp";
    case ClusterMethod::kmedoids_dtw: return "kmedoids_dtw";
    case ClusterMethod::random: return "random";
  }
  return "kmeans";
}

// One partition of the series. `inertia` is the within-cluster sum of squared
// distances (total within-cluster DTW cost for k-medoids). `inertia_trace`
// records the objective after each assignment pass.
struct ClusterAssignment {
  std::vector<int> labels;
  int k = 1;
  std::uint64_t seed = 0;
  ClusterMethod method = ClusterMethod::kmeans;
  double inertia = 0.0;
  std::vector<double> inertia_trace;
  // Clusters left empty at termination (duplicate-point edge cases only).
  std::vector<int> collapsed;

  void record_collapsed() {
    std::vector<bool> seen(static_cast<std::size_t>(k), false);
    for (int l : labels) seen[static_cast<std::size_t>(l)] = true;
    collapsed.clear();
    for (int c = 0; c < k; ++c)
      if (!seen[static_cast<std::size_t>(c)]) collapsed.push_back(c);
  }

  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i)
      out[static_cast<std::size_t>(labels[i])].push_back(i);
    return out;
  }
};

enum class KmeansInit { random, plusplus };

namespace detail {

inline double sq_dist(const FeatureVector& a, const FeatureVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline std::vector<FeatureVector> kmeans_init_centroids(const std::vector<FeatureVector>& rows,
                                                        int k, KmeansInit init, Rng& rng) {
  std::vector<FeatureVector> centroids;
  centroids.reserve(static_cast<std::size_t>(k));
  if (init == KmeansInit::random) {
    auto idx = rng.sample_indices(rows.size(), static_cast<std::size_t>(k));
    for (std::size_t i : idx) centroids.push_back(rows[i]);
    return centroids;
  }
  // k-means++: first centroid uniform, the rest sampled proportional to the
  // squared distance to the nearest chosen centroid.
  centroids.push_back(rows[rng.below(rows.size())]);
  std::vector<double> d2(rows.size());
  while (centroids.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centroids) best = std::min(best, sq_dist(rows[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total > 0.0) {
      const double r = rng.uniform01() * total;
      double acc = 0.0;
      pick = rows.size() - 1;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(rows.size());
    }
    centroids.push_back(rows[pick]);
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm over feature rows (callers standardize first). Runs until
// the assignment is stable or 300 iterations. Empty clusters are repaired by
// re-seeding the centroid at the point farthest from its own centroid.
inline ClusterAssignment kmeans(const FeatureMatrix& fm, int k, std::uint64_t seed,
                                KmeansInit init = KmeansInit::plusplus) {
  const std::size_t n = fm.rows.size();
  if (k < 1) throw std::invalid_argument("kmeans: k must be positive");
  if (static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("kmeans: k exceeds number of rows");

  Rng rng(seed);
  auto centroids = detail::kmeans_init_centroids(fm.rows, k, init, rng);

  ClusterAssignment out;
  out.k = k;
  out.seed = seed;
  out.method = init == KmeansInit::plusplus ? ClusterMethod::kmeanspp : ClusterMethod::kmeans;
  out.labels.assign(n, -1);

  std::vector<int> labels(n, -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    double wcss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = detail::sq_dist(fm.rows[i], centroids[static_cast<std::size_t>(c)]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
      wcss += best_d;
    }
    out.inertia_trace.push_back(wcss);
    out.inertia = wcss;
    if (!changed && iter > 0) break;

    std::vector<FeatureVector> sums(static_cast<std::size_t>(k), FeatureVector{});
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto c = static_cast<std::size_t>(labels[i]);
      for (std::size_t f = 0; f < kFeatureCount; ++f) sums[c][f] += fm.rows[i][f];
      ++counts[c];
    }
    std::vector<bool> taken(n, false);
    for (int c = 0; c < k; ++c) {
      auto cc = static_cast<std::size_t>(c);
      if (counts[cc] > 0) {
        for (std::size_t f = 0; f < kFeatureCount; ++f)
          centroids[cc][f] = sums[cc][f] / static_cast<double>(counts[cc]);
      } else {
        // farthest point from its current centroid, skipping already-used
        // repair points so two empty clusters never grab the same row
        std::size_t far_i = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (taken[i]) continue;
          const double d =
              detail::sq_dist(fm.rows[i], centroids[static_cast<std::size_t>(labels[i])]);
          if (d > far_d) {
            far_d = d;
            far_i = i;
          }
        }
        centroids[cc] = fm.rows[far_i];
        taken[far_i] = true;
      }
    }
  }
  out.labels = std::move(labels);
  out.record_collapsed();
  return out;
}

// PAM over a precomputed distance matrix: greedy BUILD, then best-improvement
// SWAP capped at 100 accepted swaps. Deterministic; ties resolve to the
// lowest index.
inline ClusterAssignment pam_from_distances(const std::vector<std::vector<double>>& dist, int k,
                                            std::uint64_t seed, ClusterMethod method) {
  const std::size_t n = dist.size();
  if (k < 1) throw std::invalid_argument("kmedoids: k must be positive");
  if (static_cast<std::size_t>(k) > n)
    throw std::invalid_argument("kmedoids: k exceeds number of series");

  std::vector<std::size_t> medoids;
  std::vector<bool> is_medoid(n, false);
  {  // BUILD: first medoid minimises total distance, the rest maximise gain
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      double c = 0.0;
      for (std::size_t j = 0; j < n; ++j) c += dist[i][j];
      if (c < best_cost) {
        best_cost = c;
        best = i;
      }
    }
    medoids.push_back(best);
    is_medoid[best] = true;
    std::vector<double> nearest(n);
    for (std::size_t j = 0; j < n; ++j) nearest[j] = dist[best][j];
    while (medoids.size() < static_cast<std::size_t>(k)) {
      std::size_t pick = 0;
      double best_gain = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (is_medoid[i]) continue;
        double gain = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          gain += std::max(0.0, nearest[j] - dist[i][j]);
        if (gain > best_gain) {
          best_gain = gain;
          pick = i;
        }
      }
      medoids.push_back(pick);
      is_medoid[pick] = true;
      for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dist[pick][j]);
    }
  }

  auto assignment_cost = [&](const std::vector<std::size_t>& meds, std::vector<int>* labels) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      int best_c = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < meds.size(); ++c) {
        const double d = dist[meds[c]][j];
        if (d < best_d) {
          best_d = d;
          best_c = static_cast<int>(c);
        }
      }
      if (labels) (*labels)[j] = best_c;
      total += best_d;
    }
    return total;
  };

  ClusterAssignment out;
  out.k = k;
  out.seed = seed;
  out.method = method;
  out.labels.assign(n, 0);
  double cost = assignment_cost(medoids, &out.labels);
  out.inertia_trace.push_back(cost);

  for (int swap = 0; swap < 100; ++swap) {
    double best_cost = cost;
    std::size_t best_m = 0, best_h = 0;
    bool found = false;
    for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
      for (std::size_t h = 0; h < n; ++h) {
        if (is_medoid[h]) continue;
        std::vector<std::size_t> trial = medoids;
        trial[mi] = h;
        const double c = assignment_cost(trial, nullptr);
        if (c < best_cost - 1e-12) {
          best_cost = c;
          best_m = mi;
          best_h = h;
          found = true;
        }
      }
    }
    if (!found) break;
    is_medoid[medoids[best_m]] = false;
    medoids[best_m] = best_h;
    is_medoid[best_h] = true;
    cost = assignment_cost(medoids, &out.labels);
    out.inertia_trace.push_back(cost);
  }
  out.inertia = cost;
  out.record_collapsed();
  return out;
}

// K-medoids with DTW distances over the raw observations.
inline ClusterAssignment kmedoids_dtw(const std::vector<std::vector<double>>& series, int k,
                                      std::uint64_t seed, int workers = 1) {
  auto dist = pairwise_dtw(series, workers);
  return pam_from_distances(dist, k, seed, ClusterMethod::kmedoids_dtw);
}

// Uniform random labels; empty clusters are filled by moving the first
// member of the largest cluster.
inline ClusterAssignment random_partition(std::size_t count, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("random_partition: k must be positive");
  if (static_cast<std::size_t>(k) > count)
    throw std::invalid_argument("random_partition: k exceeds number of series");
  Rng rng(seed);
  ClusterAssignment out;
  out.k = k;
  out.seed = seed;
  out.method = ClusterMethod::random;
  out.labels.resize(count);
  for (auto& l : out.labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));

  while (true) {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : out.labels) ++sizes[static_cast<std::size_t>(l)];
    int empty = -1;
    for (int c = 0; c < k; ++c)
      if (sizes[static_cast<std::size_t>(c)] == 0) {
        empty = c;
        break;
      }
    if (empty < 0) break;
    int largest = 0;
    for (int c = 1; c < k; ++c)
      if (sizes[static_cast<std::size_t>(c)] > sizes[static_cast<std::size_t>(largest)])
        largest = c;
    for (auto& l : out.labels)
      if (l == largest) {
        l = empty;
        break;
      }
  }
  return out;
}

// Knee of the (k, WCSS) curve: the index maximising perpendicular distance to
// the chord between the first and last points. Ties go to the smallest k.
inline std::size_t elbow_pick(std::span<const double> ks, std::span<const double> wcss) {
  if (ks.size() != wcss.size() || ks.empty())
    throw std::invalid_argument("elbow_pick: need matching nonempty profiles");
  if (ks.size() == 1) return 0;
  const double x0 = ks.front(), y0 = wcss.front();
  const double dx = ks.back() - x0, dy = wcss.back() - y0;
  const double norm = std::sqrt(dx * dx + dy * dy);
  std::size_t best = 0;
  double best_d = -1.0;
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const double cross = (ks[i] - x0) * dy - (wcss[i] - y0) * dx;
    const double d = norm > 0.0 ? std::abs(cross) / norm : 0.0;
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

// Elbow-method cluster count: per k, the best of 5 seeded k-means restarts
// supplies the WCSS profile.
inline int elbow_optimal_k(const FeatureMatrix& fm, int k_min, int k_max, std::uint64_t seed,
                           KmeansInit init = KmeansInit::plusplus) {
  if (k_min < 1 || k_min > k_max || static_cast<std::size_t>(k_max) > fm.rows.size())
    throw std::invalid_argument("elbow_optimal_k: invalid k range");
  std::vector<double> ks, wcss;
  for (int k = k_min; k <= k_max; ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < 5; ++r) {
      auto a = kmeans(fm, k, derive_seed(seed, "elbow", static_cast<std::uint64_t>(k) * 8 +
                                                            static_cast<std::uint64_t>(r)),
                      init);
      best = std::min(best, a.inertia);
    }
    ks.push_back(static_cast<double>(k));
    wcss.push_back(best);
  }
  return k_min + static_cast<int>(elbow_pick(ks, wcss));
}

inline std::string clusters_to_csv(const std::vector<std::string>& ids,
                                   const ClusterAssignment& a) {
  std::ostringstream out;
  out << "series_id,cluster,method,k,seed\n";
  for (std::size_t i = 0; i < ids.size(); ++i)
    out << ids[i] << ',' << a.labels[i] << ',' << to_string(a.method) << ',' << a.k << ','
        << a.seed << '\n';
  return out.str();
}

}  // namespace gfm
