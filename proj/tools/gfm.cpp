// Command-line front end: feature extraction, clustering, full experiment
// runs, evaluation, significance testing, and synthetic data generation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gfm/clustering.hpp"
#include "gfm/config.hpp"
#include "gfm/features.hpp"
#include "gfm/harness.hpp"
#include "gfm/stats.hpp"
#include "gfm/synth.hpp"
#include "gfm/version.hpp"

namespace fs = std::filesystem;
using gfm::json;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int workers = 1;
};

gfm::ExperimentConfig resolve_config(const GlobalOptions& g) {
  if (g.config_path.empty()) throw std::runtime_error("--config is required");
  auto cfg = gfm::load_config(g.config_path);
  if (g.seed) cfg.master_seed = *g.seed;
  cfg.workers = g.workers;
  if (const char* env = std::getenv("GFM_WORKERS")) cfg.workers = std::max(1, std::atoi(env));
  return cfg;
}

gfm::Dataset load_from_config(const gfm::ExperimentConfig& cfg) {
  return gfm::load_dataset(cfg.dataset.path, cfg.dataset.horizon, cfg.dataset.seasonal_period,
                           gfm::imputation_from_string(cfg.dataset.imputation),
                           cfg.dataset.name);
}

std::string out_path(const GlobalOptions& g, const char* file) {
  fs::create_directories(g.out_dir);
  return (fs::path(g.out_dir) / file).string();
}

int cmd_features(const GlobalOptions& g) {
  auto cfg = resolve_config(g);
  auto ds = load_from_config(cfg);
  auto splits = gfm::split_for_test(ds);
  std::vector<std::vector<double>> histories;
  std::vector<std::string> ids;
  for (const auto& sp : splits) {
    histories.push_back(sp.train);
    ids.push_back(sp.id);
  }
  auto fm = gfm::extract_feature_matrix(histories, ids, cfg.dataset.seasonal_period);
  const auto path = out_path(g, "features.csv");
  gfm::write_text_file(path, gfm::features_to_csv(fm));
  std::cout << "wrote " << path << " (" << fm.rows.size() << " series)\n";
  return 0;
}

int cmd_cluster(const GlobalOptions& g, const std::string& method_name, int k) {
  auto cfg = resolve_config(g);
  auto ds = load_from_config(cfg);
  auto method = gfm::cluster_method_from_string(method_name);
  auto splits = gfm::split_for_test(ds);
  std::vector<std::vector<double>> histories;
  std::vector<std::string> ids;
  for (const auto& sp : splits) {
    histories.push_back(sp.train);
    ids.push_back(sp.id);
  }
  const std::uint64_t seed = gfm::derive_seed(cfg.master_seed, "cli-cluster");

  gfm::ClusterAssignment assignment;
  if (method == gfm::ClusterMethod::kmedoids_dtw) {
    if (k < 1) throw std::runtime_error("--k is required for kmedoids_dtw");
    assignment = gfm::kmedoids_dtw(histories, k, seed, cfg.workers);
  } else if (method == gfm::ClusterMethod::random) {
    if (k < 1) throw std::runtime_error("--k is required for random clustering");
    assignment = gfm::random_partition(ids.size(), k, seed);
  } else {
    auto fm = gfm::standardize(
        gfm::extract_feature_matrix(histories, ids, cfg.dataset.seasonal_period));
    if (k < 1) {
      const int hi = std::min<int>(cfg.cluster.k_hi, static_cast<int>(fm.rows.size()));
      const int lo = std::min(cfg.cluster.k_lo, hi);
      k = gfm::elbow_optimal_k(fm, lo, hi, gfm::derive_seed(cfg.master_seed, "cli-elbow"));
      std::cout << "elbow-selected k = " << k << "\n";
    }
    assignment = gfm::kmeans(fm, k, seed,
                             method == gfm::ClusterMethod::kmeanspp ? gfm::KmeansInit::plusplus
                                                                    : gfm::KmeansInit::random);
  }
  const auto path = out_path(g, "clusters.csv");
  gfm::write_text_file(path, gfm::clusters_to_csv(ids, assignment));
  std::cout << "wrote " << path << " (k=" << assignment.k << ")\n";
  return 0;
}

int cmd_run(const GlobalOptions& g) {
  auto cfg = resolve_config(g);
  auto result = gfm::run_experiment(cfg);
  gfm::persist_experiment(result, g.out_dir);
  for (const auto& w : result.manifest.warnings) std::cerr << "warning: " << w << "\n";
  for (std::size_t i = 0; i < result.forecasts.size(); ++i)
    std::cout << result.forecasts[i].model_tag
              << ": mean sMAPE = " << result.metrics[i].mean_smape
              << ", median sMAPE = " << result.metrics[i].median_smape << "\n";
  std::cout << "artifacts in " << g.out_dir << "\n";
  return 0;
}

int cmd_evaluate(const GlobalOptions& g, const std::string& forecasts_path) {
  auto cfg = resolve_config(g);
  auto ds = load_from_config(cfg);
  auto splits = gfm::split_for_test(ds);
  std::map<std::string, std::vector<double>> actuals, trains;
  for (const auto& sp : splits) {
    actuals[sp.id] = sp.test;
    trains[sp.id] = sp.train;
  }

  auto table = gfm::read_csv(forecasts_path);
  if (table.header.size() < 3 || table.header[0] != "series_id" ||
      table.header[1] != "model_tag")
    throw std::runtime_error(forecasts_path + ": expected header series_id,model_tag,h1..");
  std::map<std::string, std::map<std::string, std::vector<double>>> by_model;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::vector<double> values;
    for (std::size_t c = 2; c < row.size(); ++c)
      values.push_back(gfm::parse_double(
          row[c], forecasts_path + ":" + std::to_string(table.line_numbers[r])));
    by_model[row[1]][row[0]] = std::move(values);
  }

  std::ostringstream metrics;
  metrics << "model_tag,series_id,smape,mase\n";
  json aggregates;
  for (const auto& [tag, rows] : by_model) {
    auto mr = gfm::evaluate_forecasts(rows, actuals, trains, cfg.dataset.seasonal_period,
                                      cfg.zero_safe_smape, cfg.smape_epsilon);
    for (const auto& [id, m] : mr.per_series)
      metrics << tag << ',' << id << ',' << gfm::format_double(m.smape) << ','
              << (m.mase ? gfm::format_double(*m.mase) : std::string()) << '\n';
    json a = {{"mean_smape", mr.mean_smape},
              {"median_smape", mr.median_smape},
              {"mase_excluded", mr.mase_excluded}};
    if (mr.mean_mase) {
      a["mean_mase"] = *mr.mean_mase;
      a["median_mase"] = *mr.median_mase;
    }
    aggregates["models"][tag] = a;
    std::cout << tag << ": mean sMAPE = " << mr.mean_smape << "\n";
  }
  gfm::write_text_file(out_path(g, "metrics.csv"), metrics.str());
  gfm::write_text_file(out_path(g, "aggregates.json"), aggregates.dump(2) + "\n");
  return 0;
}

int cmd_stats(const GlobalOptions& g, const std::string& input_path) {
  auto table = gfm::read_csv(input_path);
  if (table.header.size() < 3)
    throw std::runtime_error(input_path + ": expected header dataset,model,mean_smape");
  std::vector<std::string> datasets, models;
  std::map<std::string, std::map<std::string, double>> cell;  // dataset -> model -> err
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() < 3) continue;
    const double v = gfm::parse_double(
        row[2], input_path + ":" + std::to_string(table.line_numbers[r]));
    if (!cell.count(row[0])) datasets.push_back(row[0]);
    if (std::find(models.begin(), models.end(), row[1]) == models.end())
      models.push_back(row[1]);
    cell[row[0]][row[1]] = v;
  }
  std::vector<std::vector<double>> errors;
  for (const auto& d : datasets) {
    std::vector<double> row;
    for (const auto& m : models) {
      auto it = cell[d].find(m);
      if (it == cell[d].end())
        throw std::runtime_error("stats: missing cell for dataset " + d + ", model " + m);
      row.push_back(it->second);
    }
    errors.push_back(std::move(row));
  }
  auto rep = gfm::stat_test_report(errors, models);

  json j;
  j["friedman"] = {{"statistic", rep.friedman_statistic}, {"p_value", rep.friedman_p}};
  json ranks = json::object();
  for (std::size_t i = 0; i < rep.models.size(); ++i) ranks[rep.models[i]] = rep.average_ranks[i];
  j["average_ranks"] = ranks;
  json pw = json::array();
  for (const auto& pc : rep.pairwise)
    pw.push_back({{"model_a", pc.model_a},
                  {"model_b", pc.model_b},
                  {"raw_p", pc.raw_p},
                  {"holm_p", pc.holm_p},
                  {"all_zero", pc.all_zero}});
  j["pairwise"] = pw;
  gfm::write_text_file(out_path(g, "stat_report.json"), j.dump(2) + "\n");
  gfm::write_text_file(out_path(g, "ranks.csv"), gfm::ranks_to_csv(rep));
  gfm::write_text_file(out_path(g, "pairwise_p.csv"), gfm::pairwise_to_csv(rep));
  std::cout << "Friedman statistic = " << rep.friedman_statistic
            << ", p = " << rep.friedman_p << "\n";
  return 0;
}

int cmd_synth(const GlobalOptions& g, const std::string& spec_path, std::size_t horizon,
              std::size_t period) {
  std::ifstream in(spec_path);
  if (!in) throw std::runtime_error("cannot open synth spec: " + spec_path);
  json j;
  in >> j;
  gfm::SynthSpec spec;
  if (j.contains("name")) spec.name = j.at("name").get<std::string>();
  if (j.contains("length")) spec.length = j.at("length").get<std::size_t>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  if (g.seed) spec.seed = *g.seed;
  for (const auto& f : j.at("families")) {
    gfm::SynthFamily fam;
    fam.name = f.at("name").get<std::string>();
    if (f.contains("count")) fam.count = f.at("count").get<int>();
    if (f.contains("ar")) fam.ar = f.at("ar").get<std::vector<double>>();
    if (f.contains("intercept")) fam.intercept = f.at("intercept").get<double>();
    if (f.contains("noise_sd")) fam.noise_sd = f.at("noise_sd").get<double>();
    if (f.contains("seasonal_amplitude"))
      fam.seasonal_amplitude = f.at("seasonal_amplitude").get<double>();
    if (f.contains("period")) fam.period = f.at("period").get<std::size_t>();
    spec.families.push_back(std::move(fam));
  }
  auto ds = gfm::generate_synthetic(spec, horizon, period);
  const auto path = out_path(g, "dataset.csv");
  gfm::save_dataset(ds, path);
  std::cout << "wrote " << path << " (" << ds.series.size() << " series x " << spec.length
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gfm: localised global forecasting models over time-series collections"};
  app.set_version_flag("--version", gfm::kVersion);
  app.require_subcommand(1);

  GlobalOptions g;
  app.add_option("--config", g.config_path, "experiment config JSON");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--seed", g.seed, "override the master seed");
  app.add_option("--workers", g.workers, "worker threads (env GFM_WORKERS overrides)");

  auto* features = app.add_subcommand("features", "extract per-series features to features.csv");
  features->fallthrough();

  auto* cluster = app.add_subcommand("cluster", "cluster series and write clusters.csv");
  cluster->fallthrough();
  std::string method = "kmeanspp";
  int k = 0;
  cluster->add_option("--method", method, "kmeans|kmeanspp|kmedoids_dtw|random");
  cluster->add_option("--k", k, "cluster count (0 = elbow for feature-based methods)");

  auto* run = app.add_subcommand("run", "run the configured experiment end to end");
  run->fallthrough();

  auto* evaluate = app.add_subcommand("evaluate", "score a final_forecasts.csv against a dataset");
  evaluate->fallthrough();
  std::string forecasts_path;
  evaluate->add_option("--forecasts", forecasts_path, "final forecasts CSV")->required();

  auto* stats = app.add_subcommand("stats", "Friedman + pairwise Wilcoxon/Holm report");
  stats->fallthrough();
  std::string stats_input;
  stats->add_option("--input", stats_input, "CSV with dataset,model,mean_smape")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset CSV");
  synth->fallthrough();
  std::string synth_spec;
  std::size_t synth_horizon = 12, synth_period = 1;
  synth->add_option("--spec", synth_spec, "synthetic spec JSON")->required();
  synth->add_option("--horizon", synth_horizon, "dataset horizon recorded for downstream runs");
  synth->add_option("--period", synth_period, "seasonal period");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("features")) return cmd_features(g);
    if (app.got_subcommand("cluster")) return cmd_cluster(g, method, k);
    if (app.got_subcommand("run")) return cmd_run(g);
    if (app.got_subcommand("evaluate")) return cmd_evaluate(g, forecasts_path);
    if (app.got_subcommand("stats")) return cmd_stats(g, stats_input);
    if (app.got_subcommand("synth")) return cmd_synth(g, synth_spec, synth_horizon, synth_period);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
