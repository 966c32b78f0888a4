#pragma once

#include <random>
#include <vector>

#include "opforge/hpo/space.hpp"

namespace opforge::hpo {

struct TpeParams {
  double gamma = 0.25;
  std::size_t n_startup = 10;
  std::size_t n_candidates = 24;
};

struct Observation {
  json config;
  double loss = 0.0;
};

// Per-dimension Parzen estimator over one observation set.
class ParzenDensity {
 public:
  // `values` are internal coordinates (continuous) or category indices.
  ParzenDensity(const Distribution& dist, const std::vector<double>& values);
  double log_pdf(double x) const;
  double draw(std::mt19937_64& rng) const;
  // Smoothed category probabilities; empty for continuous kinds.
  const std::vector<double>& weights() const { return weights_; }
  double bandwidth() const { return bw_; }

 private:
  const Distribution* dist_;
  std::vector<double> centers_;
  std::vector<double> mass_;  // truncation mass of each kernel on [lo, hi]
  std::vector<double> weights_;
  double bw_ = 0.0;
};

// Observations with non-finite losses sort last. Before n_startup finished
// observations this is exactly sample(space, rng).
json tpe_suggest(const SearchSpace& space, const std::vector<Observation>& history, std::mt19937_64& rng,
                 const TpeParams& params = {});

}  // namespace opforge::hpo
