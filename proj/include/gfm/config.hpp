#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfm/ensembles.hpp"
#include "gfm/preprocess.hpp"
#include "gfm/timeseries.hpp"

namespace gfm {

using json = nlohmann::json;

struct DatasetConfig {
  std::string path;
  std::string name;
  std::size_t horizon = 1;
  std::size_t seasonal_period = 1;
  std::string seasonality_policy = "none";
  bool nonnegative = false;
  std::string imputation = "zero";
};

struct LearnerRanges {
  int hidden_lo = 1, hidden_hi = 12;
  double decay_lo = 0.0, decay_hi = 0.1;
};

struct TuningConfig {
  bool enabled = false;
  int budget = 10;
};

struct ClusterConfig {
  int k_lo = 2, k_hi = 7;
  int seed_iterations = 6;
};

struct SpecialistsConfig {
  int k = 4;
  int top_n = 2;
  int max_rounds = 10;
  std::string final_round = "previous";  // previous | last
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::string learner_kind = "pr";
  double l2_weight = 0.0;
  int hidden_nodes = 5;
  double decay = 0.01;
  int epochs = 200;
  double learning_rate = 0.05;
  LearnerRanges ranges;
  std::size_t window_size = 0;  // 0 = heuristic
  std::size_t fourier_k = 3;
  std::vector<std::string> variants = {"Baseline"};
  ClusterConfig cluster;
  SpecialistsConfig specialists;
  std::vector<std::uint64_t> seed_ensemble_seeds;  // empty = 5 derived from master
  std::uint64_t master_seed = 1;
  TuningConfig tuning;
  bool zero_safe_smape = false;
  double smape_epsilon = 0.1;
  bool group_by = false;
  int workers = 1;
};

namespace detail {

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::read_field(d, "path", cfg.dataset.path);
    detail::read_field(d, "name", cfg.dataset.name);
    detail::read_field(d, "horizon", cfg.dataset.horizon);
    detail::read_field(d, "seasonal_period", cfg.dataset.seasonal_period);
    detail::read_field(d, "seasonality_policy", cfg.dataset.seasonality_policy);
    detail::read_field(d, "nonnegative", cfg.dataset.nonnegative);
    detail::read_field(d, "imputation", cfg.dataset.imputation);
  }
  if (j.contains("learner")) {
    const auto& l = j.at("learner");
    detail::read_field(l, "kind", cfg.learner_kind);
    detail::read_field(l, "l2_weight", cfg.l2_weight);
    detail::read_field(l, "hidden_nodes", cfg.hidden_nodes);
    detail::read_field(l, "decay", cfg.decay);
    detail::read_field(l, "epochs", cfg.epochs);
    detail::read_field(l, "learning_rate", cfg.learning_rate);
    if (l.contains("hidden_range")) {
      cfg.ranges.hidden_lo = l.at("hidden_range").at(0).get<int>();
      cfg.ranges.hidden_hi = l.at("hidden_range").at(1).get<int>();
    }
    if (l.contains("decay_range")) {
      cfg.ranges.decay_lo = l.at("decay_range").at(0).get<double>();
      cfg.ranges.decay_hi = l.at("decay_range").at(1).get<double>();
    }
  }
  detail::read_field(j, "window_size", cfg.window_size);
  detail::read_field(j, "fourier_k", cfg.fourier_k);
  detail::read_field(j, "variants", cfg.variants);
  if (j.contains("cluster")) {
    const auto& c = j.at("cluster");
    if (c.contains("k_range")) {
      cfg.cluster.k_lo = c.at("k_range").at(0).get<int>();
      cfg.cluster.k_hi = c.at("k_range").at(1).get<int>();
    }
    detail::read_field(c, "seed_iterations", cfg.cluster.seed_iterations);
  }
  if (j.contains("specialists")) {
    const auto& s = j.at("specialists");
    detail::read_field(s, "k", cfg.specialists.k);
    detail::read_field(s, "top_n", cfg.specialists.top_n);
    detail::read_field(s, "max_rounds", cfg.specialists.max_rounds);
    detail::read_field(s, "final_round", cfg.specialists.final_round);
  }
  detail::read_field(j, "seed_ensemble_seeds", cfg.seed_ensemble_seeds);
  if (j.contains("seeds")) detail::read_field(j.at("seeds"), "master", cfg.master_seed);
  if (j.contains("tuning")) {
    detail::read_field(j.at("tuning"), "enabled", cfg.tuning.enabled);
    detail::read_field(j.at("tuning"), "budget", cfg.tuning.budget);
  }
  detail::read_field(j, "zero_safe_smape", cfg.zero_safe_smape);
  detail::read_field(j, "smape_epsilon", cfg.smape_epsilon);
  detail::read_field(j, "group_by", cfg.group_by);
  detail::read_field(j, "workers", cfg.workers);
  return cfg;
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["dataset"] = {{"path", cfg.dataset.path},
                  {"name", cfg.dataset.name},
                  {"horizon", cfg.dataset.horizon},
                  {"seasonal_period", cfg.dataset.seasonal_period},
                  {"seasonality_policy", cfg.dataset.seasonality_policy},
                  {"nonnegative", cfg.dataset.nonnegative},
                  {"imputation", cfg.dataset.imputation}};
  j["learner"] = {{"kind", cfg.learner_kind},
                  {"l2_weight", cfg.l2_weight},
                  {"hidden_nodes", cfg.hidden_nodes},
                  {"decay", cfg.decay},
                  {"epochs", cfg.epochs},
                  {"learning_rate", cfg.learning_rate},
                  {"hidden_range", {cfg.ranges.hidden_lo, cfg.ranges.hidden_hi}},
                  {"decay_range", {cfg.ranges.decay_lo, cfg.ranges.decay_hi}}};
  j["window_size"] = cfg.window_size;
  j["fourier_k"] = cfg.fourier_k;
  j["variants"] = cfg.variants;
  j["cluster"] = {{"k_range", {cfg.cluster.k_lo, cfg.cluster.k_hi}},
                  {"seed_iterations", cfg.cluster.seed_iterations}};
  j["specialists"] = {{"k", cfg.specialists.k},
                      {"top_n", cfg.specialists.top_n},
                      {"max_rounds", cfg.specialists.max_rounds},
                      {"final_round", cfg.specialists.final_round}};
  j["seed_ensemble_seeds"] = cfg.seed_ensemble_seeds;
  j["seeds"] = {{"master", cfg.master_seed}};
  j["tuning"] = {{"enabled", cfg.tuning.enabled}, {"budget", cfg.tuning.budget}};
  j["zero_safe_smape"] = cfg.zero_safe_smape;
  j["smape_epsilon"] = cfg.smape_epsilon;
  j["group_by"] = cfg.group_by;
  j["workers"] = cfg.workers;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  json j;
  in >> j;
  return config_from_json(j);
}

// Basic sanity plus the warnings the run manifest surfaces.
inline std::vector<std::string> validate_config(const ExperimentConfig& cfg) {
  std::vector<std::string> warnings;
  learner_kind_from_string(cfg.learner_kind);
  seasonality_policy_from_string(cfg.dataset.seasonality_policy);
  imputation_from_string(cfg.dataset.imputation);
  if (cfg.dataset.horizon == 0) throw std::invalid_argument("config: horizon must be positive");
  if (cfg.dataset.seasonal_period == 0)
    throw std::invalid_argument("config: seasonal_period must be positive");
  if (cfg.ranges.hidden_lo < 1 || cfg.ranges.hidden_lo > cfg.ranges.hidden_hi)
    throw std::invalid_argument("config: empty hidden_range");
  if (cfg.ranges.decay_lo < 0.0 || cfg.ranges.decay_lo > cfg.ranges.decay_hi)
    throw std::invalid_argument("config: empty decay_range");
  if (cfg.cluster.k_lo < 1 || cfg.cluster.k_lo > cfg.cluster.k_hi)
    throw std::invalid_argument("config: empty cluster k_range");
  if (cfg.specialists.top_n < 1 || cfg.specialists.top_n > cfg.specialists.k)
    throw std::invalid_argument("config: specialists need k >= top_n >= 1");
  if (cfg.specialists.final_round != "previous" && cfg.specialists.final_round != "last")
    throw std::invalid_argument("config: specialists.final_round must be previous|last");
  if (cfg.variants.empty()) throw std::invalid_argument("config: no variants");
  if (cfg.learner_kind == "pr") {
    for (const auto& v : cfg.variants)
      if (v == "Ensemble.Seed")
        warnings.push_back(
            "Ensemble.Seed with the pr learner collapses to Baseline (seed-free fit)");
  }
  return warnings;
}

}  // namespace gfm
