#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfm/config.hpp"
#include "gfm/ensembles.hpp"
#include "gfm/evaluation.hpp"
#include "gfm/version.hpp"

namespace gfm {

// Effective model settings derived from a config (after any tuning).
inline GfmSpec make_gfm_spec(const ExperimentConfig& cfg) {
  GfmSpec spec;
  spec.learner.kind = learner_kind_from_string(cfg.learner_kind);
  spec.learner.l2_weight = cfg.l2_weight;
  spec.learner.ffnn = {cfg.hidden_nodes, cfg.decay, cfg.epochs, cfg.learning_rate};
  spec.pipeline.policy = seasonality_policy_from_string(cfg.dataset.seasonality_policy);
  spec.pipeline.log_transform = spec.learner.kind == LearnerConfig::Kind::ffnn;
  spec.pipeline.fourier_k = cfg.fourier_k;
  spec.window = cfg.window_size > 0
                    ? cfg.window_size
                    : input_window_size(cfg.dataset.horizon, cfg.dataset.seasonal_period);
  spec.horizon = cfg.dataset.horizon;
  spec.seasonal_period = cfg.dataset.seasonal_period;
  spec.clamp_nonnegative = cfg.dataset.nonnegative;
  spec.workers = cfg.workers;
  return spec;
}

struct TunedHyperparameters {
  int hidden_nodes = 0;
  double decay = 0.0;
  double best_mean_smape = 0.0;
  int trials = 0;
  bool exhaustive = false;
  bool applies = false;  // pr has nothing to tune
};

// Random search over the configured ranges, scored by the mean validation
// sMAPE of a baseline model on a random tuning subset of size
// ceil(count / max submodels per iteration). Degenerate discrete ranges that
// fit in the budget are enumerated exhaustively instead.
inline TunedHyperparameters tune_hyperparameters(const Dataset& ds,
                                                 const ExperimentConfig& cfg) {
  if (!cfg.tuning.enabled) throw std::invalid_argument("tune_hyperparameters: tuning disabled");
  if (cfg.tuning.budget < 1)
    throw std::invalid_argument("tune_hyperparameters: budget must be >= 1");

  TunedHyperparameters best;
  best.hidden_nodes = cfg.hidden_nodes;
  best.decay = cfg.decay;
  if (learner_kind_from_string(cfg.learner_kind) != LearnerConfig::Kind::ffnn) return best;
  best.applies = true;

  const std::size_t max_submodels =
      static_cast<std::size_t>(std::max(cfg.cluster.k_hi, cfg.specialists.k));
  const std::size_t subset_size = std::max<std::size_t>(
      1, (ds.series.size() + max_submodels - 1) / max_submodels);
  Rng subset_rng(derive_seed(cfg.master_seed, "tuning-subset"));
  auto subset_idx = subset_rng.sample_indices(ds.series.size(), subset_size);
  std::sort(subset_idx.begin(), subset_idx.end());

  Dataset trimmed = truncate_test(ds);
  Dataset subset;
  subset.name = ds.name + "-tuning";
  subset.horizon = ds.horizon;
  subset.seasonal_period = ds.seasonal_period;
  for (auto i : subset_idx) subset.series.push_back(trimmed.series[i]);

  auto actuals_map = [&]() {
    std::map<std::string, std::vector<double>> m;
    for (const auto& sp : split_for_test(subset)) m[sp.id] = sp.test;
    return m;
  }();

  const int range_size = cfg.ranges.hidden_hi - cfg.ranges.hidden_lo + 1;
  const bool exhaustive =
      cfg.ranges.decay_lo == cfg.ranges.decay_hi && range_size <= cfg.tuning.budget;
  best.exhaustive = exhaustive;
  const int trials = exhaustive ? range_size : cfg.tuning.budget;

  double best_err = std::numeric_limits<double>::infinity();
  for (int t = 0; t < trials; ++t) {
    int hidden;
    double decay;
    if (exhaustive) {
      hidden = cfg.ranges.hidden_lo + t;
      decay = cfg.ranges.decay_lo;
    } else {
      Rng rng(derive_seed(cfg.master_seed, "tuning-trial", static_cast<std::uint64_t>(t)));
      hidden = static_cast<int>(rng.uniform_int(cfg.ranges.hidden_lo, cfg.ranges.hidden_hi));
      decay = rng.uniform(cfg.ranges.decay_lo, cfg.ranges.decay_hi);
    }
    ExperimentConfig trial_cfg = cfg;
    trial_cfg.hidden_nodes = hidden;
    trial_cfg.decay = decay;
    GfmSpec spec = make_gfm_spec(trial_cfg);
    auto fm = run_baseline(subset, spec,
                           derive_seed(cfg.master_seed, "tuning-eval",
                                       static_cast<std::uint64_t>(t)));
    double mean_err = 0.0;
    std::size_t n = 0;
    for (const auto& [id, f] : fm.final_rows()) {
      mean_err += smape(f, actuals_map.at(id), cfg.zero_safe_smape, cfg.smape_epsilon);
      ++n;
    }
    mean_err /= static_cast<double>(n);
    if (mean_err < best_err) {
      best_err = mean_err;
      best.hidden_nodes = hidden;
      best.decay = decay;
    }
  }
  best.best_mean_smape = best_err;
  best.trials = trials;
  return best;
}

// ---------------------------------------------------------------------------
// Variant dispatch.

namespace detail {

inline ForecastMatrix run_local_variant(const Dataset& ds, const GfmSpec& spec, LocalKind kind,
                                        std::string tag) {
  auto splits = split_for_test(ds);
  ForecastMatrix out;
  out.model_tag = std::move(tag);
  out.provenance_kind = "local";
  out.horizon = spec.horizon;
  ProvenanceEntry all{0, 0, {}};
  for (const auto& sp : splits) all.series_ids.push_back(sp.id);
  out.provenance.push_back(std::move(all));
  out.rows.resize(splits.size());
  parallel_for(splits.size(), spec.workers, [&](std::size_t i) {
    auto model = fit_local(splits[i].train, kind, spec.seasonal_period);
    auto f = forecast_local(model, spec.horizon);
    if (spec.clamp_nonnegative)
      for (auto& v : f) v = std::max(0.0, v);
    out.rows[i] = {splits[i].id, 0, std::move(f)};
  });
  out.sort_rows();
  return out;
}

}  // namespace detail

// Runs one named variant. Combination variants are written "A+B+C" and
// average the finals of their parts (each part runs under its own stable
// seed, so a part's forecasts match its standalone run).
inline ForecastMatrix run_variant(const std::string& name, const Dataset& ds,
                                  const ExperimentConfig& cfg, const GfmSpec& spec) {
  if (name.find('+') != std::string::npos) {
    std::vector<ForecastMatrix> parts;
    std::stringstream ss(name);
    std::string part;
    while (std::getline(ss, part, '+')) {
      if (part.empty()) throw std::invalid_argument("empty component in variant: " + name);
      parts.push_back(run_variant(part, ds, cfg, spec));
    }
    return combine_forecasts(parts, name);
  }

  const std::uint64_t seed = derive_seed(cfg.master_seed, "variant:" + name);
  const auto& cl = cfg.cluster;
  if (name == "Baseline") return run_baseline(ds, spec, seed, name);
  if (name == "Kmeans.Number")
    return run_cluster_number(ds, spec, ClusterMethod::kmeans, cl.k_lo, cl.k_hi, seed, name);
  if (name == "KmeansPlus.Number")
    return run_cluster_number(ds, spec, ClusterMethod::kmeanspp, cl.k_lo, cl.k_hi, seed, name);
  if (name == "DTW.Number")
    return run_cluster_number(ds, spec, ClusterMethod::kmedoids_dtw, cl.k_lo, cl.k_hi, seed,
                              name);
  if (name == "Random.Number")
    return run_cluster_number(ds, spec, ClusterMethod::random, cl.k_lo, cl.k_hi, seed, name);
  if (name == "Kmeans.Seed")
    return run_cluster_seed(ds, spec, ClusterMethod::kmeans, cl.seed_iterations, cl.k_lo,
                            cl.k_hi, seed, 0, name);
  if (name == "KmeansPlus.Seed")
    return run_cluster_seed(ds, spec, ClusterMethod::kmeanspp, cl.seed_iterations, cl.k_lo,
                            cl.k_hi, seed, 0, name);
  if (name == "Random.Seed")
    return run_cluster_seed(ds, spec, ClusterMethod::random, cl.seed_iterations, cl.k_lo,
                            cl.k_hi, seed, 0, name);
  if (name == "Kmeans.OC")
    return run_cluster_oc(ds, spec, ClusterMethod::kmeans, cl.k_lo, cl.k_hi, seed, 0, name);
  if (name == "KmeansPlus.OC")
    return run_cluster_oc(ds, spec, ClusterMethod::kmeanspp, cl.k_lo, cl.k_hi, seed, 0, name);
  if (name == "Random.OC")
    return run_cluster_oc(ds, spec, ClusterMethod::random, cl.k_lo, cl.k_hi, seed, 0, name);
  if (name == "DTW.OC")
    return run_cluster_oc(ds, spec, ClusterMethod::kmedoids_dtw, cl.k_lo, cl.k_hi, seed, 0,
                          name);
  if (name == "Ensemble.Specialists") {
    SpecialistConfig sc;
    sc.specialists = cfg.specialists.k;
    sc.top_n = cfg.specialists.top_n;
    sc.max_rounds = cfg.specialists.max_rounds;
    sc.use_previous_round = cfg.specialists.final_round == "previous";
    return run_specialists(ds, spec, sc, seed, nullptr, {}, name);
  }
  if (name == "Ensemble.Seed") {
    std::vector<std::uint64_t> seeds = cfg.seed_ensemble_seeds;
    if (seeds.empty())
      for (std::uint64_t j = 0; j < 5; ++j) seeds.push_back(derive_seed(seed, "member", j));
    return run_seed_ensemble(ds, spec, seeds, name);
  }
  if (name == "Local.SES") return detail::run_local_variant(ds, spec, LocalKind::ses, name);
  if (name == "Local.Holt") return detail::run_local_variant(ds, spec, LocalKind::holt, name);
  if (name == "Local.HW")
    return detail::run_local_variant(ds, spec, LocalKind::holt_winters_additive, name);
  if (name == "Local.SeasonalNaive")
    return detail::run_local_variant(ds, spec, LocalKind::seasonal_naive, name);
  throw std::invalid_argument("unknown variant: " + name);
}

// ---------------------------------------------------------------------------
// End-to-end experiment.

struct RunManifest {
  std::string version = kVersion;
  json resolved_config;
  std::map<std::string, std::uint64_t> variant_seeds;
  json hyperparameters;
  std::map<std::string, json> provenance;  // per variant: submodel membership
  std::vector<std::pair<std::string, double>> stage_times_ms;
  std::vector<std::string> deviations = {
      "seasonal decomposition uses the classical moving-average method",
      "local forecasting legs use the exponential-smoothing family plus seasonal naive",
      "hyperparameter search is a seeded random search over the configured ranges",
      "feature matrices are column-standardised before k-means clustering",
  };
  std::vector<std::string> warnings;

  json to_json() const {
    json j;
    j["version"] = version;
    j["config"] = resolved_config;
    j["variant_seeds"] = variant_seeds;
    j["hyperparameters"] = hyperparameters;
    json times = json::object();
    for (const auto& [k, v] : stage_times_ms) times[k] = v;
    j["stage_times_ms"] = times;
    json prov = json::object();
    for (const auto& [k, v] : provenance) prov[k] = v;
    j["provenance"] = prov;
    j["deviations"] = deviations;
    j["warnings"] = warnings;
    return j;
  }
};

struct ExperimentResult {
  std::vector<ForecastMatrix> forecasts;  // one per variant, config order
  std::vector<MetricResult> metrics;      // aligned with forecasts
  RunManifest manifest;
};

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

// Fails fast with the offending ids instead of erroring deep inside a run.
inline void check_lengths(const Dataset& ds, const GfmSpec& spec, bool tuning) {
  const std::size_t need =
      spec.window + 1 + spec.horizon * (tuning ? 2 : 1);
  std::string bad;
  for (const auto& s : ds.series)
    if (s.values.size() < need) {
      if (!bad.empty()) bad += ", ";
      bad += s.id;
    }
  if (!bad.empty())
    throw std::invalid_argument(
        "dataset: series too short for window " + std::to_string(spec.window) + " and horizon " +
        std::to_string(spec.horizon) + " (need length >= " + std::to_string(need) +
        "): " + bad);
}

inline std::vector<std::string> distinct_groups(const Dataset& ds) {
  std::set<std::string> g;
  for (const auto& s : ds.series)
    if (!s.group.empty()) g.insert(s.group);
  return {g.begin(), g.end()};
}

inline Dataset subset_by_group(const Dataset& ds, const std::string& group) {
  Dataset out;
  out.name = ds.name + "#" + group;
  out.horizon = ds.horizon;
  out.seasonal_period = ds.seasonal_period;
  for (const auto& s : ds.series)
    if (s.group == group) out.series.push_back(s);
  return out;
}

}  // namespace detail

inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       const std::optional<Dataset>& preloaded = std::nullopt) {
  ExperimentResult result;
  auto& manifest = result.manifest;
  manifest.warnings = validate_config(config);

  auto t_load = std::chrono::steady_clock::now();
  Dataset ds = preloaded ? *preloaded
                         : load_dataset(config.dataset.path, config.dataset.horizon,
                                        config.dataset.seasonal_period,
                                        imputation_from_string(config.dataset.imputation),
                                        config.dataset.name);
  manifest.stage_times_ms.emplace_back("load", detail::ms_since(t_load));

  ExperimentConfig cfg = config;
  {
    // Specialists carve a second holdout out of the training part, as does
    // tuning; both need an extra horizon of room.
    bool inner_holdout = cfg.tuning.enabled;
    for (const auto& v : cfg.variants)
      inner_holdout |= v.find("Ensemble.Specialists") != std::string::npos;
    GfmSpec pre_spec = make_gfm_spec(cfg);
    detail::check_lengths(ds, pre_spec, inner_holdout);
  }

  if (cfg.tuning.enabled) {
    auto t_tune = std::chrono::steady_clock::now();
    auto tuned = tune_hyperparameters(ds, cfg);
    manifest.stage_times_ms.emplace_back("tune", detail::ms_since(t_tune));
    if (tuned.applies) {
      cfg.hidden_nodes = tuned.hidden_nodes;
      cfg.decay = tuned.decay;
      manifest.hyperparameters = {{"hidden_nodes", tuned.hidden_nodes},
                                  {"decay", tuned.decay},
                                  {"trials", tuned.trials},
                                  {"exhaustive", tuned.exhaustive},
                                  {"tuning_mean_smape", tuned.best_mean_smape}};
    } else {
      manifest.warnings.push_back("tuning requested but the pr learner has no hyperparameters");
      manifest.hyperparameters = json::object();
    }
  } else {
    manifest.hyperparameters = {{"hidden_nodes", cfg.hidden_nodes}, {"decay", cfg.decay}};
  }

  const GfmSpec spec = make_gfm_spec(cfg);
  manifest.resolved_config = config_to_json(cfg);
  manifest.resolved_config["effective_window"] = spec.window;

  auto groups = detail::distinct_groups(ds);
  const bool grouped = cfg.group_by && groups.size() >= 2;
  if (cfg.group_by && !grouped)
    manifest.warnings.push_back("group_by requested but the dataset has fewer than 2 groups");

  auto test_splits = split_for_test(ds);
  std::map<std::string, std::vector<double>> actuals, trains;
  for (const auto& sp : test_splits) {
    actuals[sp.id] = sp.test;
    trains[sp.id] = sp.train;
  }

  for (const auto& name : cfg.variants) {
    const auto t_variant = std::chrono::steady_clock::now();
    manifest.variant_seeds[name] = derive_seed(cfg.master_seed, "variant:" + name);
    try {
      ForecastMatrix fm;
      if (grouped) {
        fm.model_tag = name;
        fm.horizon = spec.horizon;
        for (const auto& g : groups) {
          ExperimentConfig gcfg = cfg;
          gcfg.master_seed = derive_seed(cfg.master_seed, "group:" + g);
          auto part = run_variant(name, detail::subset_by_group(ds, g), gcfg, spec);
          fm.provenance_kind = part.provenance_kind;
          for (auto& e : part.provenance) fm.provenance.push_back(std::move(e));
          for (auto& r : part.rows) fm.rows.push_back(std::move(r));
        }
        fm.sort_rows();
      } else {
        fm = run_variant(name, ds, cfg, spec);
      }
      result.metrics.push_back(evaluate_forecasts(fm.final_rows(), actuals, trains,
                                                  cfg.dataset.seasonal_period,
                                                  cfg.zero_safe_smape, cfg.smape_epsilon));
      json entries = json::array();
      for (const auto& e : fm.provenance)
        entries.push_back({{"iteration", e.iteration},
                           {"submodel", e.submodel},
                           {"series_ids", e.series_ids}});
      manifest.provenance[name] = {{"kind", fm.provenance_kind}, {"entries", entries}};
      result.forecasts.push_back(std::move(fm));
    } catch (const std::exception& e) {
      throw std::runtime_error("variant '" + name + "': " + e.what());
    }
    manifest.stage_times_ms.emplace_back("variant:" + name, detail::ms_since(t_variant));
  }
  return result;
}

// Writes the run artifacts under `out_dir`.
inline void persist_experiment(const ExperimentResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const auto path = [&](const char* f) { return (fs::path(out_dir) / f).string(); };

  std::vector<const ForecastMatrix*> ptrs;
  for (const auto& fm : result.forecasts) ptrs.push_back(&fm);
  write_text_file(path("forecasts.csv"), forecast_rows_to_csv(ptrs));
  write_text_file(path("final_forecasts.csv"), final_forecasts_to_csv(ptrs));

  std::ostringstream metrics;
  metrics << "model_tag,series_id,smape,mase\n";
  json aggregates;
  for (std::size_t i = 0; i < result.forecasts.size(); ++i) {
    const auto& tag = result.forecasts[i].model_tag;
    const auto& mr = result.metrics[i];
    for (const auto& [id, m] : mr.per_series)
      metrics << tag << ',' << id << ',' << format_double(m.smape) << ','
              << (m.mase ? format_double(*m.mase) : std::string()) << '\n';
    json a = {{"mean_smape", mr.mean_smape},
              {"median_smape", mr.median_smape},
              {"mase_excluded", mr.mase_excluded}};
    if (mr.mean_mase) {
      a["mean_mase"] = *mr.mean_mase;
      a["median_mase"] = *mr.median_mase;
    }
    aggregates["models"][tag] = a;
  }
  write_text_file(path("metrics.csv"), metrics.str());
  write_text_file(path("aggregates.json"), aggregates.dump(2) + "\n");
  write_text_file(path("manifest.json"), result.manifest.to_json().dump(2) + "\n");
}

}  // namespace gfm
