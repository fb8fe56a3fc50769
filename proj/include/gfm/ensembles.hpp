#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfm/clustering.hpp"
#include "gfm/evaluation.hpp"
#include "gfm/learners.hpp"
#include "gfm/parallel.hpp"
#include "gfm/preprocess.hpp"
#include "gfm/rng.hpp"
#include "gfm/timeseries.hpp"

namespace gfm {

struct LearnerConfig {
  enum class Kind { pr, ffnn };
  Kind kind = Kind::pr;
  double l2_weight = 0.0;  // pooled regression ridge weight
  FfnnOptions ffnn;
};

inline LearnerConfig::Kind learner_kind_from_string(const std::string& s) {
  if (s == "pr") return LearnerConfig::Kind::pr;
  if (s == "ffnn") return LearnerConfig::Kind::ffnn;
  throw std::invalid_argument("unknown learner kind: " + s);
}

// Everything a single global-model training/forecasting pass needs to know.
struct GfmSpec {
  LearnerConfig learner;
  PipelineConfig pipeline;
  std::size_t window = 0;  // lag count
  std::size_t horizon = 0;
  std::size_t seasonal_period = 1;
  bool clamp_nonnegative = false;
  int workers = 1;
};

// Per-(series, iteration) forecasts in the original scale. Final forecasts
// are always recomputable as the row-wise mean of the stored rows.
struct ForecastRow {
  std::string series_id;
  std::uint32_t iteration = 0;
  std::vector<double> values;
};

// Which submodel produced which rows: one entry per (iteration, cluster or
// specialist or seed index) listing the member series. Every persisted row
// traces back to exactly one entry.
struct ProvenanceEntry {
  std::uint32_t iteration = 0;
  int submodel = 0;
  std::vector<std::string> series_ids;
};

struct ForecastMatrix {
  std::string model_tag;
  std::string provenance_kind;  // baseline | cluster | specialists | seed | local | combine
  std::size_t horizon = 0;
  std::vector<ProvenanceEntry> provenance;
  std::vector<ForecastRow> rows;

  void sort_rows() {
    std::sort(rows.begin(), rows.end(), [](const ForecastRow& a, const ForecastRow& b) {
      return a.series_id != b.series_id ? a.series_id < b.series_id
                                        : a.iteration < b.iteration;
    });
  }

  std::map<std::string, std::vector<double>> final_rows() const {
    std::map<std::string, std::vector<double>> sums;
    std::map<std::string, std::size_t> counts;
    for (const auto& r : rows) {
      auto& s = sums[r.series_id];
      if (s.empty()) s.assign(horizon, 0.0);
      for (std::size_t i = 0; i < r.values.size(); ++i) s[i] += r.values[i];
      ++counts[r.series_id];
    }
    for (auto& [id, s] : sums)
      for (auto& v : s) v /= static_cast<double>(counts[id]);
    return sums;
  }
};

inline std::string forecast_rows_to_csv(const std::vector<const ForecastMatrix*>& matrices) {
  std::ostringstream out;
  std::size_t horizon = 0;
  for (const auto* m : matrices) horizon = std::max(horizon, m->horizon);
  out << "series_id,model_tag,iteration";
  for (std::size_t h = 1; h <= horizon; ++h) out << ",h" << h;
  out << '\n';
  for (const auto* m : matrices)
    for (const auto& r : m->rows) {
      out << r.series_id << ',' << m->model_tag << ',' << r.iteration;
      for (double v : r.values) out << ',' << format_double(v);
      out << '\n';
    }
  return out.str();
}

inline std::string final_forecasts_to_csv(const std::vector<const ForecastMatrix*>& matrices) {
  std::ostringstream out;
  std::size_t horizon = 0;
  for (const auto* m : matrices) horizon = std::max(horizon, m->horizon);
  out << "series_id,model_tag";
  for (std::size_t h = 1; h <= horizon; ++h) out << ",h" << h;
  out << '\n';
  for (const auto* m : matrices)
    for (const auto& [id, values] : m->final_rows()) {
      out << id << ',' << m->model_tag;
      for (double v : values) out << ',' << format_double(v);
      out << '\n';
    }
  return out.str();
}

// ---------------------------------------------------------------------------
// Shared machinery: preprocessing of the training histories, pooled training,
// recursive forecasting back to the original scale.

struct PreparedSeries {
  std::string id;
  std::vector<double> history;  // original-scale observations before the target window
  PreprocessedSeries pp;
};

inline std::vector<PreparedSeries> prepare_series(const Dataset& ds, const GfmSpec& spec) {
  auto splits = split_for_test(ds);
  std::vector<PreparedSeries> out;
  out.reserve(splits.size());
  for (auto& sp : splits) {
    if (sp.train.size() < spec.window)
      throw std::invalid_argument("prepare_series: series '" + sp.id +
                                  "' training part shorter than the model window (" +
                                  std::to_string(sp.train.size()) + " < " +
                                  std::to_string(spec.window) + ")");
    PreparedSeries ps;
    ps.id = sp.id;
    ps.history = sp.train;
    ps.pp = preprocess_series(sp.id, sp.train, spec.seasonal_period, spec.pipeline);
    out.push_back(std::move(ps));
  }
  return out;
}

namespace detail {

// Pools the members' windows and fits one global model. Returns nothing when
// the member pool is too small to train (fewer rows than input_dim + 1).
inline std::optional<GfmModel> try_train_gfm(const std::vector<const PreparedSeries*>& members,
                                             const GfmSpec& spec, std::uint64_t seed) {
  std::vector<std::vector<double>> values;
  std::vector<std::string> ids;
  std::vector<std::vector<std::vector<double>>> exog;
  bool any_exog = false;
  for (const auto* ps : members) any_exog |= !ps->pp.exog.empty();
  for (const auto* ps : members) {
    if (ps->pp.values.size() < spec.window + 1) continue;  // can be forecast, not trained on
    values.push_back(ps->pp.values);
    ids.push_back(ps->id);
    if (any_exog) exog.push_back(ps->pp.exog);
  }
  if (values.empty()) return std::nullopt;
  WindowSet ws = make_windows(values, spec.window, ids, exog);
  if (ws.rows() < ws.input_dim() + 1) return std::nullopt;
  if (spec.learner.kind == LearnerConfig::Kind::pr)
    return GfmModel(fit_pr(ws, spec.learner.l2_weight));
  return GfmModel(fit_ffnn(ws, spec.learner.ffnn, seed));
}

inline std::vector<double> forecast_one(const GfmModel& model, const PreparedSeries& ps,
                                        const GfmSpec& spec) {
  auto exog = horizon_exog(ps.pp, spec.horizon);
  auto f = forecast_recursive(model, ps.pp.values, spec.horizon, exog);
  auto orig = inverse_forecast(f, ps.pp.record);
  if (spec.clamp_nonnegative)
    for (auto& v : orig) v = std::max(0.0, v);
  return orig;
}

inline std::vector<const PreparedSeries*> all_pointers(const std::vector<PreparedSeries>& v) {
  std::vector<const PreparedSeries*> out;
  out.reserve(v.size());
  for (const auto& ps : v) out.push_back(&ps);
  return out;
}

// Rows are estimated without building windows, to decide fallbacks up front.
inline bool pool_too_small(const std::vector<const PreparedSeries*>& members,
                           const GfmSpec& spec) {
  std::size_t rows = 0;
  std::size_t exog_width = 0;
  for (const auto* ps : members) {
    if (ps->pp.values.size() >= spec.window + 1) rows += ps->pp.values.size() - spec.window;
    if (!ps->pp.exog.empty()) exog_width = ps->pp.exog.front().size();
  }
  return rows < spec.window + exog_width + 1;
}

inline FeatureMatrix standardized_features(const std::vector<PreparedSeries>& prepared,
                                           std::size_t period) {
  std::vector<std::vector<double>> histories;
  std::vector<std::string> ids;
  for (const auto& ps : prepared) {
    histories.push_back(ps.history);
    ids.push_back(ps.id);
  }
  return standardize(extract_feature_matrix(histories, ids, period));
}

inline ClusterAssignment cluster_once(const std::vector<PreparedSeries>& prepared,
                                      const FeatureMatrix* fm,
                                      const std::vector<std::vector<double>>* dtw_dist,
                                      ClusterMethod method, int k, std::uint64_t seed) {
  switch (method) {
    case ClusterMethod::kmeans:
      return kmeans(*fm, k, seed, KmeansInit::random);
    case ClusterMethod::kmeanspp:
      return kmeans(*fm, k, seed, KmeansInit::plusplus);
    case ClusterMethod::kmedoids_dtw:
      return pam_from_distances(*dtw_dist, k, seed, ClusterMethod::kmedoids_dtw);
    case ClusterMethod::random:
      return random_partition(prepared.size(), k, seed);
  }
  throw std::logic_error("cluster_once: unreachable");
}

}  // namespace detail

// Single global model over the whole dataset.
inline ForecastMatrix run_baseline(const Dataset& ds, const GfmSpec& spec, std::uint64_t seed,
                                   std::string tag = "Baseline") {
  auto prepared = prepare_series(ds, spec);
  auto model = detail::try_train_gfm(detail::all_pointers(prepared), spec,
                                     derive_seed(seed, "train", 0));
  if (!model)
    throw std::runtime_error("run_baseline: too few training windows for the dataset");
  ForecastMatrix fm;
  fm.model_tag = std::move(tag);
  fm.provenance_kind = "baseline";
  fm.horizon = spec.horizon;
  fm.rows.resize(prepared.size());
  ProvenanceEntry all{0, 0, {}};
  for (const auto& ps : prepared) all.series_ids.push_back(ps.id);
  fm.provenance.push_back(std::move(all));
  parallel_for(prepared.size(), spec.workers, [&](std::size_t i) {
    fm.rows[i] = {prepared[i].id, 0, detail::forecast_one(*model, prepared[i], spec)};
  });
  fm.sort_rows();
  return fm;
}

namespace detail {

struct ClusterTask {
  std::uint32_t iteration = 0;
  int cluster = 0;
  std::uint64_t train_seed = 0;
  std::vector<std::size_t> member_indices;
};

// Executes the (iteration, cluster) grid: per task one model trained on the
// member pool (or the shared fallback model when the pool is too small),
// forecasting every member. Deterministic under any worker count.
inline ForecastMatrix run_cluster_tasks(const std::vector<PreparedSeries>& prepared,
                                        const GfmSpec& spec,
                                        const std::vector<ClusterTask>& tasks,
                                        std::uint64_t fallback_seed, std::string tag) {
  std::optional<GfmModel> fallback;
  for (const auto& t : tasks) {
    std::vector<const PreparedSeries*> members;
    for (auto i : t.member_indices) members.push_back(&prepared[i]);
    if (pool_too_small(members, spec)) {
      fallback = try_train_gfm(all_pointers(prepared), spec,
                               derive_seed(fallback_seed, "train", 0));
      if (!fallback)
        throw std::runtime_error("ensemble: dataset too small even for the fallback model");
      break;
    }
  }

  std::vector<std::vector<ForecastRow>> slots(tasks.size());
  parallel_for(tasks.size(), spec.workers, [&](std::size_t ti) {
    const auto& task = tasks[ti];
    std::vector<const PreparedSeries*> members;
    for (auto i : task.member_indices) members.push_back(&prepared[i]);
    if (members.empty()) return;
    std::optional<GfmModel> model;
    if (!pool_too_small(members, spec)) model = try_train_gfm(members, spec, task.train_seed);
    const GfmModel& use = model ? *model : *fallback;
    for (const auto* ps : members)
      slots[ti].push_back({ps->id, task.iteration, forecast_one(use, *ps, spec)});
  });

  ForecastMatrix fm;
  fm.model_tag = std::move(tag);
  fm.provenance_kind = "cluster";
  fm.horizon = spec.horizon;
  for (const auto& task : tasks) {
    ProvenanceEntry e{task.iteration, task.cluster, {}};
    for (auto i : task.member_indices) e.series_ids.push_back(prepared[i].id);
    fm.provenance.push_back(std::move(e));
  }
  for (auto& s : slots)
    for (auto& r : s) fm.rows.push_back(std::move(r));
  fm.sort_rows();
  return fm;
}

}  // namespace detail

// One clustering per k in [k_lo, k_hi] under a shared seed; one model per
// cluster; per-series forecasts averaged across the k iterations.
inline ForecastMatrix run_cluster_number(const Dataset& ds, const GfmSpec& spec,
                                         ClusterMethod method, int k_lo, int k_hi,
                                         std::uint64_t seed,
                                         std::string tag = "Cluster.Number") {
  if (k_lo < 1 || k_lo > k_hi) throw std::invalid_argument("run_cluster_number: bad k range");
  auto prepared = prepare_series(ds, spec);
  if (static_cast<std::size_t>(k_hi) > prepared.size())
    throw std::invalid_argument("run_cluster_number: k range exceeds series count");

  std::optional<FeatureMatrix> fm;
  std::optional<std::vector<std::vector<double>>> dist;
  if (method == ClusterMethod::kmeans || method == ClusterMethod::kmeanspp)
    fm = detail::standardized_features(prepared, spec.seasonal_period);
  if (method == ClusterMethod::kmedoids_dtw) {
    std::vector<std::vector<double>> histories;
    for (const auto& ps : prepared) histories.push_back(ps.history);
    dist = pairwise_dtw(histories, spec.workers);
  }

  const std::uint64_t shared_cluster_seed = derive_seed(seed, "cluster");
  const std::size_t stride = prepared.size();
  std::vector<detail::ClusterTask> tasks;
  for (int k = k_lo; k <= k_hi; ++k) {
    const auto iteration = static_cast<std::uint32_t>(k - k_lo);
    auto assignment = detail::cluster_once(prepared, fm ? &*fm : nullptr,
                                           dist ? &*dist : nullptr, method, k,
                                           shared_cluster_seed);
    auto members_by_cluster = assignment.members();
    for (std::size_t c = 0; c < members_by_cluster.size(); ++c) {
      if (members_by_cluster[c].empty()) continue;
      detail::ClusterTask t;
      t.iteration = iteration;
      t.cluster = static_cast<int>(c);
      t.member_indices = members_by_cluster[c];
      t.train_seed =
          derive_seed(seed, "train", static_cast<std::uint64_t>(iteration) * stride + c);
      tasks.push_back(std::move(t));
    }
  }
  return detail::run_cluster_tasks(prepared, spec, tasks, derive_seed(seed, "fallback"),
                                   std::move(tag));
}

// Repeated clustering at a fixed k (elbow-optimal unless overridden) under
// fresh per-iteration seeds; forecasts averaged across iterations.
inline ForecastMatrix run_cluster_seed(const Dataset& ds, const GfmSpec& spec,
                                       ClusterMethod method, int iterations, int elbow_k_lo,
                                       int elbow_k_hi, std::uint64_t seed, int k_override = 0,
                                       std::string tag = "Cluster.Seed") {
  if (method == ClusterMethod::kmedoids_dtw)
    throw std::invalid_argument("run_cluster_seed: no optimal-k rule for DTW k-medoids");
  if (iterations < 1) throw std::invalid_argument("run_cluster_seed: iterations must be >= 1");
  auto prepared = prepare_series(ds, spec);

  std::optional<FeatureMatrix> fm;
  if (method != ClusterMethod::random || k_override <= 0)
    fm = detail::standardized_features(prepared, spec.seasonal_period);
  int k = k_override;
  if (k <= 0) {
    const int hi = std::min<int>(elbow_k_hi, static_cast<int>(prepared.size()));
    const int lo = std::min(elbow_k_lo, hi);
    k = elbow_optimal_k(*fm, lo, hi, derive_seed(seed, "elbow"));
  }
  if (static_cast<std::size_t>(k) > prepared.size())
    throw std::invalid_argument("run_cluster_seed: k exceeds series count");

  const std::size_t stride = prepared.size();
  std::vector<detail::ClusterTask> tasks;
  for (int it = 0; it < iterations; ++it) {
    auto assignment = detail::cluster_once(prepared, fm ? &*fm : nullptr, nullptr, method, k,
                                           derive_seed(seed, "cluster", static_cast<std::uint64_t>(it)));
    auto members_by_cluster = assignment.members();
    for (std::size_t c = 0; c < members_by_cluster.size(); ++c) {
      if (members_by_cluster[c].empty()) continue;
      detail::ClusterTask t;
      t.iteration = static_cast<std::uint32_t>(it);
      t.cluster = static_cast<int>(c);
      t.member_indices = members_by_cluster[c];
      t.train_seed =
          derive_seed(seed, "train", static_cast<std::uint64_t>(it) * stride + c);
      tasks.push_back(std::move(t));
    }
  }
  return detail::run_cluster_tasks(prepared, spec, tasks, derive_seed(seed, "fallback"),
                                   std::move(tag));
}

// Clustered non-ensemble: one clustering, one model per cluster, one forecast
// per series.
inline ForecastMatrix run_cluster_oc(const Dataset& ds, const GfmSpec& spec,
                                     ClusterMethod method, int elbow_k_lo, int elbow_k_hi,
                                     std::uint64_t seed, int k_override = 0,
                                     std::string tag = "Cluster.OC",
                                     ClusterAssignment* out_assignment = nullptr) {
  auto prepared = prepare_series(ds, spec);

  std::optional<FeatureMatrix> fm;
  std::optional<std::vector<std::vector<double>>> dist;
  if (method == ClusterMethod::kmeans || method == ClusterMethod::kmeanspp || k_override <= 0)
    fm = detail::standardized_features(prepared, spec.seasonal_period);
  if (method == ClusterMethod::kmedoids_dtw) {
    std::vector<std::vector<double>> histories;
    for (const auto& ps : prepared) histories.push_back(ps.history);
    dist = pairwise_dtw(histories, spec.workers);
  }

  int k = k_override;
  if (k <= 0) {
    const int hi = std::min<int>(elbow_k_hi, static_cast<int>(prepared.size()));
    const int lo = std::min(elbow_k_lo, hi);
    k = elbow_optimal_k(*fm, lo, hi, derive_seed(seed, "elbow"));
  }
  if (static_cast<std::size_t>(k) > prepared.size())
    throw std::invalid_argument("run_cluster_oc: k exceeds series count");

  auto assignment = detail::cluster_once(prepared, fm ? &*fm : nullptr,
                                         dist ? &*dist : nullptr, method, k,
                                         derive_seed(seed, "cluster", 0));
  if (out_assignment) *out_assignment = assignment;

  std::vector<detail::ClusterTask> tasks;
  auto members_by_cluster = assignment.members();
  for (std::size_t c = 0; c < members_by_cluster.size(); ++c) {
    if (members_by_cluster[c].empty()) continue;
    detail::ClusterTask t;
    t.iteration = 0;
    t.cluster = static_cast<int>(c);
    t.member_indices = members_by_cluster[c];
    t.train_seed = derive_seed(seed, "train", c);
    tasks.push_back(std::move(t));
  }
  return detail::run_cluster_tasks(prepared, spec, tasks, derive_seed(seed, "fallback"),
                                   std::move(tag));
}

// ---------------------------------------------------------------------------
// Ensemble of specialists.

// Each series joins the training sets of its N lowest-error specialists;
// ties break toward the lower specialist index.
inline std::vector<std::vector<std::size_t>> reassign_series(
    const std::vector<std::vector<double>>& val_errors, std::size_t top_n) {
  if (val_errors.empty()) throw std::invalid_argument("reassign_series: empty error matrix");
  const std::size_t n_specialists = val_errors.front().size();
  if (top_n < 1 || top_n > n_specialists)
    throw std::invalid_argument("reassign_series: N out of range");
  std::vector<std::vector<std::size_t>> sets(n_specialists);
  for (std::size_t s = 0; s < val_errors.size(); ++s) {
    const auto& errs = val_errors[s];
    if (errs.size() != n_specialists)
      throw std::invalid_argument("reassign_series: ragged error matrix");
    std::vector<std::size_t> order(n_specialists);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return errs[a] < errs[b]; });
    for (std::size_t r = 0; r < top_n; ++r) sets[order[r]].push_back(s);
  }
  return sets;
}

struct SpecialistConfig {
  int specialists = 4;      // K
  int top_n = 2;            // N
  int max_rounds = 10;
  bool use_previous_round = true;  // forecast with the last non-degraded state
};

struct SpecialistTrace {
  std::vector<double> mean_val_errors;                       // per completed round
  std::vector<std::vector<std::vector<std::size_t>>> round_assignments;
  std::vector<std::vector<std::vector<double>>> round_errors;  // [round][series][specialist]
  int chosen_round = 0;                                      // 1-based
};

using SpecialistErrorHook = std::function<double(
    int round, std::size_t specialist, const std::string& id,
    std::span<const double> forecast, std::span<const double> actual)>;

// Iterative specialist training: random half-samples to start, then rounds of
// train / validate / top-N reassignment until the mean best-specialist
// validation error grows (or max_rounds). Final forecasts average each
// series' top-N specialists.
inline ForecastMatrix run_specialists(const Dataset& ds, const GfmSpec& spec,
                                      const SpecialistConfig& cfg, std::uint64_t seed,
                                      SpecialistTrace* trace = nullptr,
                                      const SpecialistErrorHook& hook = {},
                                      std::string tag = "Ensemble.Specialists") {
  if (cfg.specialists < 1 || cfg.top_n < 1 || cfg.top_n > cfg.specialists)
    throw std::invalid_argument("run_specialists: need K >= N >= 1");
  const auto n_spec = static_cast<std::size_t>(cfg.specialists);

  auto prepared_full = prepare_series(ds, spec);
  const std::size_t count = prepared_full.size();

  // Inner holdout: the last horizon of each training history validates the
  // specialists; models never train on it.
  std::vector<PreparedSeries> prepared_inner;
  std::vector<std::vector<double>> val_actuals(count);
  prepared_inner.reserve(count);
  for (const auto& ps : prepared_full) {
    if (ps.history.size() < spec.horizon + spec.window)
      throw std::invalid_argument("run_specialists: series '" + ps.id +
                                  "' too short for an inner validation holdout");
    PreparedSeries inner;
    inner.id = ps.id;
    inner.history.assign(ps.history.begin(),
                         ps.history.end() - static_cast<std::ptrdiff_t>(spec.horizon));
    inner.pp = preprocess_series(inner.id, inner.history, spec.seasonal_period, spec.pipeline);
    val_actuals[prepared_inner.size()].assign(
        ps.history.end() - static_cast<std::ptrdiff_t>(spec.horizon), ps.history.end());
    prepared_inner.push_back(std::move(inner));
  }

  // Round-one samples: an independent random half per specialist.
  const std::size_t half = (count + 1) / 2;
  std::vector<std::vector<std::size_t>> assignments(n_spec);
  for (std::size_t i = 0; i < n_spec; ++i) {
    Rng rng(derive_seed(seed, "spec-sample", i));
    assignments[i] = rng.sample_indices(count, half);
    std::sort(assignments[i].begin(), assignments[i].end());
  }

  std::optional<GfmModel> fallback;
  auto train_round = [&](const std::vector<std::vector<std::size_t>>& sets) {
    std::vector<GfmModel> models(n_spec, GfmModel(PooledRegressionModel{}));
    parallel_for(n_spec, spec.workers, [&](std::size_t i) {
      std::vector<const PreparedSeries*> members;
      for (auto s : sets[i]) members.push_back(&prepared_inner[s]);
      auto m = detail::try_train_gfm(members, spec, derive_seed(seed, "spec-init", i));
      models[i] = m ? *m : *fallback;
    });
    return models;
  };
  // Shared fallback for degenerate pools, trained once up front.
  {
    auto m = detail::try_train_gfm(detail::all_pointers(prepared_inner), spec,
                                   derive_seed(seed, "fallback"));
    if (!m) throw std::runtime_error("run_specialists: dataset too small to train");
    fallback = *m;
  }

  std::vector<GfmModel> chosen_models;
  std::vector<std::vector<double>> chosen_errors;
  std::vector<GfmModel> prev_models;
  std::vector<std::vector<double>> prev_errors;
  double prev_mean = 0.0;
  int chosen_round = 0;

  for (int round = 1; round <= cfg.max_rounds; ++round) {
    if (round > 1) {
      assignments = reassign_series(prev_errors, static_cast<std::size_t>(cfg.top_n));
      for (std::size_t i = 0; i < n_spec; ++i) {
        if (!assignments[i].empty()) continue;
        // specialist nobody picked: restart it on a small random sample
        Rng rng(derive_seed(seed, "spec-reseed",
                            static_cast<std::uint64_t>(round) * n_spec + i));
        const std::size_t tenth = std::max<std::size_t>(1, (count + 9) / 10);
        assignments[i] = rng.sample_indices(count, tenth);
        std::sort(assignments[i].begin(), assignments[i].end());
      }
    }

    auto models = train_round(assignments);
    std::vector<std::vector<double>> errors(count, std::vector<double>(n_spec, 0.0));
    parallel_for(n_spec, spec.workers, [&](std::size_t i) {
      for (std::size_t s = 0; s < count; ++s) {
        auto f = detail::forecast_one(models[i], prepared_inner[s], spec);
        errors[s][i] = hook ? hook(round, i, prepared_inner[s].id, f, val_actuals[s])
                            : smape(f, val_actuals[s]);
      }
    });
    double mean_err = 0.0;
    for (std::size_t s = 0; s < count; ++s)
      mean_err += *std::min_element(errors[s].begin(), errors[s].end());
    mean_err /= static_cast<double>(count);

    if (trace) {
      trace->mean_val_errors.push_back(mean_err);
      trace->round_assignments.push_back(assignments);
      trace->round_errors.push_back(errors);
    }

    if (round > 1 && mean_err > prev_mean) {
      if (cfg.use_previous_round) {
        chosen_models = std::move(prev_models);
        chosen_errors = std::move(prev_errors);
        chosen_round = round - 1;
      } else {
        chosen_models = std::move(models);
        chosen_errors = std::move(errors);
        chosen_round = round;
      }
      break;
    }
    prev_models = std::move(models);
    prev_errors = std::move(errors);
    prev_mean = mean_err;
    chosen_round = round;
  }
  if (chosen_models.empty()) {
    chosen_models = std::move(prev_models);
    chosen_errors = std::move(prev_errors);
  }
  if (trace) trace->chosen_round = chosen_round;

  // Testing phase: per series, mean of its top-N specialists' forecasts from
  // the full (pre-test) histories.
  ForecastMatrix out;
  out.model_tag = std::move(tag);
  out.provenance_kind = "specialists";
  out.horizon = spec.horizon;
  std::vector<std::vector<ForecastRow>> slots(count);
  std::vector<std::vector<std::size_t>> picked(count);
  parallel_for(count, spec.workers, [&](std::size_t s) {
    std::vector<std::size_t> order(n_spec);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return chosen_errors[s][a] < chosen_errors[s][b];
    });
    for (int r = 0; r < cfg.top_n; ++r) {
      const std::size_t which = order[static_cast<std::size_t>(r)];
      auto f = detail::forecast_one(chosen_models[which], prepared_full[s], spec);
      slots[s].push_back({prepared_full[s].id, static_cast<std::uint32_t>(r), std::move(f)});
      picked[s].push_back(which);
    }
  });
  for (int r = 0; r < cfg.top_n; ++r) {
    std::map<std::size_t, ProvenanceEntry> by_spec;
    for (std::size_t s = 0; s < count; ++s) {
      auto& e = by_spec[picked[s][static_cast<std::size_t>(r)]];
      e.iteration = static_cast<std::uint32_t>(r);
      e.submodel = static_cast<int>(picked[s][static_cast<std::size_t>(r)]);
      e.series_ids.push_back(prepared_full[s].id);
    }
    for (auto& [spec_idx, e] : by_spec) out.provenance.push_back(std::move(e));
  }
  for (auto& rows : slots)
    for (auto& r : rows) out.rows.push_back(std::move(r));
  out.sort_rows();
  return out;
}

// One full-dataset model per seed, averaged.
inline ForecastMatrix run_seed_ensemble(const Dataset& ds, const GfmSpec& spec,
                                        const std::vector<std::uint64_t>& seeds,
                                        std::string tag = "Ensemble.Seed") {
  if (seeds.empty()) throw std::invalid_argument("run_seed_ensemble: need at least one seed");
  auto prepared = prepare_series(ds, spec);
  auto members = detail::all_pointers(prepared);
  std::vector<std::optional<GfmModel>> models(seeds.size());
  parallel_for(seeds.size(), spec.workers, [&](std::size_t j) {
    models[j] = detail::try_train_gfm(members, spec, derive_seed(seeds[j], "train", 0));
  });
  ForecastMatrix out;
  out.model_tag = std::move(tag);
  out.provenance_kind = "seed";
  out.horizon = spec.horizon;
  for (std::size_t j = 0; j < seeds.size(); ++j) {
    ProvenanceEntry e{static_cast<std::uint32_t>(j), static_cast<int>(j), {}};
    for (const auto& ps : prepared) e.series_ids.push_back(ps.id);
    out.provenance.push_back(std::move(e));
  }
  std::vector<std::vector<ForecastRow>> slots(seeds.size());
  parallel_for(seeds.size(), spec.workers, [&](std::size_t j) {
    if (!models[j]) throw std::runtime_error("run_seed_ensemble: too few training windows");
    for (const auto& ps : prepared)
      slots[j].push_back(
          {ps.id, static_cast<std::uint32_t>(j), detail::forecast_one(*models[j], ps, spec)});
  });
  for (auto& rows : slots)
    for (auto& r : rows) out.rows.push_back(std::move(r));
  out.sort_rows();
  return out;
}

// Equal-weight combination of the matrices' final forecasts.
inline ForecastMatrix combine_forecasts(const std::vector<ForecastMatrix>& matrices,
                                        std::string tag = "") {
  if (matrices.empty()) throw std::invalid_argument("combine_forecasts: empty input");
  const std::size_t horizon = matrices.front().horizon;
  std::vector<std::map<std::string, std::vector<double>>> finals;
  finals.reserve(matrices.size());
  for (const auto& m : matrices) {
    if (m.horizon != horizon) throw std::invalid_argument("combine_forecasts: horizon mismatch");
    finals.push_back(m.final_rows());
    if (finals.back().size() != finals.front().size())
      throw std::invalid_argument("combine_forecasts: series set mismatch");
    for (const auto& [id, _] : finals.back())
      if (!finals.front().count(id))
        throw std::invalid_argument("combine_forecasts: series set mismatch: " + id);
  }
  ForecastMatrix out;
  if (tag.empty()) {
    for (std::size_t i = 0; i < matrices.size(); ++i)
      tag += (i ? "+" : "") + matrices[i].model_tag;
  }
  out.model_tag = std::move(tag);
  out.provenance_kind = "combine";
  out.horizon = horizon;
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    ProvenanceEntry e{0, static_cast<int>(i), {}};
    for (const auto& [id, _] : finals.front()) e.series_ids.push_back(id);
    out.provenance.push_back(std::move(e));
  }
  for (const auto& [id, _] : finals.front()) {
    std::vector<double> sum(horizon, 0.0);
    for (const auto& fr : finals) {
      const auto& row = fr.at(id);
      for (std::size_t h = 0; h < horizon; ++h) sum[h] += row[h];
    }
    for (auto& v : sum) v /= static_cast<double>(matrices.size());
    out.rows.push_back({id, 0, std::move(sum)});
  }
  out.sort_rows();
  return out;
}

}  // namespace gfm
