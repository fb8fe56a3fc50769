#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "gfm/rng.hpp"
#include "gfm/timeseries.hpp"

namespace gfm {

// One family of seeded autoregressive (optionally seasonal) generators.
struct SynthFamily {
  std::string name;
  int count = 10;
  std::vector<double> ar;            // phi_1..phi_p
  double intercept = 0.0;
  double noise_sd = 0.0;
  double seasonal_amplitude = 0.0;   // sine wave added on top
  std::size_t period = 1;
};

struct SynthSpec {
  std::string name = "synthetic";
  std::size_t length = 120;
  std::uint64_t seed = 1;
  std::vector<SynthFamily> families;
};

// Desk-scale dataset generator. Family membership is kept as the series'
// group tag, usable as ground truth for clustering checks.
inline Dataset generate_synthetic(const SynthSpec& spec, std::size_t horizon,
                                  std::size_t seasonal_period) {
  if (spec.length == 0) throw std::invalid_argument("generate_synthetic: zero length");
  if (spec.families.empty())
    throw std::invalid_argument("generate_synthetic: need at least one family");
  Dataset ds;
  ds.name = spec.name;
  ds.horizon = horizon;
  ds.seasonal_period = seasonal_period;

  constexpr std::size_t kBurnIn = 80;
  std::size_t global_index = 0;
  for (const auto& fam : spec.families) {
    if (fam.count < 1) throw std::invalid_argument("generate_synthetic: family count < 1");
    for (int c = 0; c < fam.count; ++c, ++global_index) {
      Rng rng(derive_seed(spec.seed, "series", global_index));
      const std::size_t p = fam.ar.size();
      const std::size_t total = kBurnIn + spec.length;
      std::vector<double> x;
      x.reserve(total);
      for (std::size_t t = 0; t < total; ++t) {
        double v = fam.intercept;
        for (std::size_t lag = 1; lag <= p; ++lag)
          if (t >= lag) v += fam.ar[lag - 1] * x[t - lag];
        if (fam.seasonal_amplitude != 0.0 && fam.period > 1)
          v += fam.seasonal_amplitude *
               std::sin(2.0 * std::numbers::pi * static_cast<double>(t) /
                        static_cast<double>(fam.period));
        if (fam.noise_sd > 0.0) v += rng.normal(0.0, fam.noise_sd);
        x.push_back(v);
      }
      TimeSeries ts;
      ts.id = fam.name + "_" + std::to_string(c);
      ts.seasonal_period = seasonal_period;
      ts.group = fam.name;
      ts.values.assign(x.begin() + kBurnIn, x.end());
      ds.series.push_back(std::move(ts));
    }
  }
  return ds;
}

}  // namespace gfm
