#include "opforge/hpo/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace opforge::hpo {

namespace {

constexpr double kLogFloor = -700.0;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double safe_log(double p) { return p > 0.0 ? std::max(std::log(p), kLogFloor) : kLogFloor; }

}  // namespace

ParzenDensity::ParzenDensity(const Distribution& dist, const std::vector<double>& values) : dist_(&dist) {
  if (dist.categorical()) {
    std::size_t k = dist.n_categories();
    weights_.assign(k, 1.0);
    for (double v : values) weights_[static_cast<std::size_t>(v)] += 1.0;
    double total = static_cast<double>(values.size() + k);
    for (auto& w : weights_) w /= total;
    return;
  }
  double lo = dist.internal_lo(), hi = dist.internal_hi();
  double range = hi - lo;
  centers_ = values;
  if (centers_.empty()) return;
  bw_ = std::max(range / std::sqrt(static_cast<double>(centers_.size())), range / 50.0);
  mass_.reserve(centers_.size());
  for (double c : centers_) mass_.push_back(normal_cdf((hi - c) / bw_) - normal_cdf((lo - c) / bw_));
}

double ParzenDensity::log_pdf(double x) const {
  if (dist_->categorical()) return safe_log(weights_.at(static_cast<std::size_t>(x)));
  double lo = dist_->internal_lo(), hi = dist_->internal_hi();
  if (x < lo || x > hi) return kLogFloor;
  if (centers_.empty()) return -std::log(hi - lo);
  double s = 0.0;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    double z = (x - centers_[i]) / bw_;
    s += std::exp(-0.5 * z * z) / (mass_[i] * bw_ * std::sqrt(2.0 * M_PI));
  }
  return safe_log(s / static_cast<double>(centers_.size()));
}

double ParzenDensity::draw(std::mt19937_64& rng) const {
  if (dist_->categorical()) {
    std::discrete_distribution<std::size_t> pick(weights_.begin(), weights_.end());
    return static_cast<double>(pick(rng));
  }
  double lo = dist_->internal_lo(), hi = dist_->internal_hi();
  if (centers_.empty()) return std::uniform_real_distribution<double>(lo, hi)(rng);
  std::uniform_int_distribution<std::size_t> comp(0, centers_.size() - 1);
  double c = centers_[comp(rng)];
  std::normal_distribution<double> n(c, bw_);
  for (int attempt = 0; attempt < 100; ++attempt) {
    double x = n(rng);
    if (x >= lo && x <= hi) return x;
  }
  return std::clamp(c, lo, hi);
}

json tpe_suggest(const SearchSpace& space, const std::vector<Observation>& history, std::mt19937_64& rng,
                 const TpeParams& params) {
  if (history.size() < params.n_startup || history.size() < 2) return sample(space, rng);

  std::vector<std::size_t> order(history.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto key = [&](std::size_t i) {
    double l = history[i].loss;
    return std::isfinite(l) ? l : std::numeric_limits<double>::infinity();
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  auto n_good = static_cast<std::size_t>(std::ceil(params.gamma * static_cast<double>(history.size())));
  n_good = std::clamp<std::size_t>(n_good, 1, history.size() - 1);

  json out = json::object();
  for (const auto& [name, dist] : space.entries()) {
    if (dist.kind == Distribution::Kind::Choice && dist.options.size() == 1) {
      out[name] = dist.options.front();
      continue;
    }
    std::vector<double> good, bad;
    for (std::size_t r = 0; r < order.size(); ++r) {
      const json& cfg = history[order[r]].config;
      if (!cfg.contains(name)) continue;
      const json& v = cfg.at(name);
      double x;
      if (dist.categorical()) {
        std::size_t idx = dist.category_index(v);
        if (idx == static_cast<std::size_t>(-1)) continue;
        x = static_cast<double>(idx);
      } else {
        if (!v.is_number()) continue;
        double raw = std::clamp(v.get<double>(), dist.lo, dist.hi);
        x = dist.to_internal(raw);
      }
      (r < n_good ? good : bad).push_back(x);
    }
    ParzenDensity l(dist, good), g(dist, bad);
    double best_score = -std::numeric_limits<double>::infinity();
    json best_value;
    for (std::size_t c = 0; c < params.n_candidates; ++c) {
      double x = l.draw(rng);
      json value;
      if (dist.categorical()) {
        value = dist.category(static_cast<std::size_t>(x));
      } else {
        value = dist.finish(dist.from_internal(x));
        x = dist.to_internal(value.get<double>());
      }
      double score = l.log_pdf(x) - g.log_pdf(x);
      if (score > best_score) {
        best_score = score;
        best_value = value;
      }
    }
    out[name] = best_value;
  }
  return out;
}

}  // namespace opforge::hpo
