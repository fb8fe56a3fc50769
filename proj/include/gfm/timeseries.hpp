#pragma once

#include <cmath>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gfm/csv.hpp"

namespace gfm {

// One univariate series. Immutable after ingestion; safe to share across
// threads without locking.
struct TimeSeries {
  std::string id;
  std::vector<double> values;
  std::size_t seasonal_period = 1;
  std::string group;  // optional tag from a `group` CSV column; empty if absent
};

struct Dataset {
  std::string name;
  std::size_t horizon = 1;
  std::size_t seasonal_period = 1;
  std::vector<TimeSeries> series;

  const TimeSeries* find(const std::string& id) const {
    for (const auto& s : series)
      if (s.id == id) return &s;
    return nullptr;
  }
};

// train / validation / test segments of one series. Concatenated in that
// order they reconstruct the source series exactly.
struct SplitSeries {
  std::string id;
  std::vector<double> train;
  std::vector<double> validation;
  std::vector<double> test;
};

enum class Imputation { zero, locf };

inline Imputation imputation_from_string(const std::string& s) {
  if (s == "zero") return Imputation::zero;
  if (s == "locf") return Imputation::locf;
  throw std::invalid_argument("unknown imputation: " + s);
}

// Loads a long-format CSV (header `series_id,value`). Rows are grouped by id
// in appearance order. Empty value cells are imputed; a third column named
// `group` is kept as a per-series tag, any other third column is ignored.
inline Dataset load_dataset(const std::string& path, std::size_t horizon,
                            std::size_t seasonal_period,
                            Imputation imputation = Imputation::zero,
                            std::string name = "") {
  if (horizon == 0) throw std::invalid_argument("load_dataset: horizon must be positive");
  if (seasonal_period == 0)
    throw std::invalid_argument("load_dataset: seasonal_period must be positive");

  CsvTable table = read_csv(path);
  if (table.header.size() < 2 || table.header[0] != "series_id" || table.header[1] != "value")
    throw std::runtime_error(path + ": expected header starting with 'series_id,value'");
  const bool has_group = table.header.size() >= 3 && table.header[2] == "group";

  Dataset ds;
  ds.name = name.empty() ? path : std::move(name);
  ds.horizon = horizon;
  ds.seasonal_period = seasonal_period;

  std::map<std::string, std::size_t> index_of;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const std::size_t line = table.line_numbers[r];
    if (row.size() < 2)
      throw std::runtime_error(path + ":" + std::to_string(line) + ": expected at least 2 fields");
    const std::string& id = row[0];
    if (id.empty())
      throw std::runtime_error(path + ":" + std::to_string(line) + ": empty series_id");

    auto [it, inserted] = index_of.try_emplace(id, ds.series.size());
    if (inserted) {
      TimeSeries ts;
      ts.id = id;
      ts.seasonal_period = seasonal_period;
      ds.series.push_back(std::move(ts));
    }
    TimeSeries& ts = ds.series[it->second];

    double value;
    if (row[1].empty()) {
      if (imputation == Imputation::locf && !ts.values.empty())
        value = ts.values.back();
      else
        value = 0.0;
    } else {
      value = parse_double(row[1], path + ":" + std::to_string(line));
    }
    if (!std::isfinite(value))
      throw std::runtime_error(path + ":" + std::to_string(line) + ": non-finite value");
    ts.values.push_back(value);

    if (has_group && row.size() >= 3 && !row[2].empty()) {
      if (ts.group.empty())
        ts.group = row[2];
      else if (ts.group != row[2])
        throw std::runtime_error(path + ":" + std::to_string(line) +
                                 ": inconsistent group for series '" + id + "'");
    }
  }

  std::string too_short;
  for (const auto& ts : ds.series) {
    if (ts.values.size() <= 2 * horizon) {
      if (!too_short.empty()) too_short += ", ";
      too_short += ts.id;
    }
  }
  if (!too_short.empty())
    throw std::runtime_error(path + ": series shorter than 2*horizon+1 (horizon=" +
                             std::to_string(horizon) + "): " + too_short);
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  bool any_group = false;
  for (const auto& s : ds.series) any_group |= !s.group.empty();
  std::ostringstream out;
  out << (any_group ? "series_id,value,group\n" : "series_id,value\n");
  for (const auto& s : ds.series)
    for (double v : s.values) {
      out << s.id << ',' << format_double(v);
      if (any_group) out << ',' << s.group;
      out << '\n';
    }
  write_text_file(path, out.str());
}

namespace detail {
inline std::vector<SplitSeries> split_tail(const Dataset& ds, bool tail_is_test) {
  std::vector<SplitSeries> out;
  out.reserve(ds.series.size());
  const std::size_t h = ds.horizon;
  for (const auto& s : ds.series) {
    if (s.values.size() <= 2 * h)
      throw std::invalid_argument("split: series '" + s.id + "' has length " +
                                  std::to_string(s.values.size()) + " <= 2*horizon");
    SplitSeries sp;
    sp.id = s.id;
    sp.train.assign(s.values.begin(), s.values.end() - static_cast<std::ptrdiff_t>(h));
    auto tail_begin = s.values.end() - static_cast<std::ptrdiff_t>(h);
    if (tail_is_test)
      sp.test.assign(tail_begin, s.values.end());
    else
      sp.validation.assign(tail_begin, s.values.end());
    out.push_back(std::move(sp));
  }
  return out;
}
}  // namespace detail

// Holds out the final `horizon` observations as the validation segment.
inline std::vector<SplitSeries> split_for_validation(const Dataset& ds) {
  return detail::split_tail(ds, /*tail_is_test=*/false);
}

// Holds out the final `horizon` observations as the test segment.
inline std::vector<SplitSeries> split_for_test(const Dataset& ds) {
  return detail::split_tail(ds, /*tail_is_test=*/true);
}

// Dataset whose series are the train segments of `ds` (the view models see
// while tuning: its own last-horizon tail is then the validation holdout).
inline Dataset truncate_test(const Dataset& ds) {
  Dataset out;
  out.name = ds.name;
  out.horizon = ds.horizon;
  out.seasonal_period = ds.seasonal_period;
  out.series.reserve(ds.series.size());
  for (const auto& s : ds.series) {
    TimeSeries t;
    t.id = s.id;
    t.seasonal_period = s.seasonal_period;
    t.group = s.group;
    t.values.assign(s.values.begin(), s.values.end() - static_cast<std::ptrdiff_t>(ds.horizon));
    out.series.push_back(std::move(t));
  }
  return out;
}

}  // namespace gfm
