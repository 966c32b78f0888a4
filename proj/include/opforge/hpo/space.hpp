#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "opforge/model.hpp"

namespace opforge::hpo {

struct Distribution {
  enum class Kind { Choice, RandInt, Uniform, QUniform, LogUniform };

  Kind kind = Kind::Choice;
  std::vector<json> options;  // choice only
  double lo = 0.0, hi = 0.0;  // randint is [lo, hi)
  double q = 0.0;             // quniform quantum

  static Distribution choice(std::vector<json> options);
  static Distribution fixed(json value) { return choice({std::move(value)}); }
  static Distribution randint(std::int64_t lo, std::int64_t hi);
  static Distribution uniform(double lo, double hi);
  static Distribution quniform(double lo, double hi, double q);
  static Distribution loguniform(double lo, double hi);

  void validate() const;
  bool categorical() const { return kind == Kind::Choice || kind == Kind::RandInt; }
  std::size_t n_categories() const;
  json category(std::size_t i) const;
  // Index of `v` among the categories, or npos.
  std::size_t category_index(const json& v) const;
  // Continuous kinds are searched in a transformed coordinate (log for
  // loguniform); these map between the two.
  double to_internal(double v) const;
  double from_internal(double t) const;
  double internal_lo() const { return to_internal(lo); }
  double internal_hi() const { return to_internal(hi); }
  // Snap a continuous value onto the support (quantum, bounds).
  json finish(double v) const;

  json draw(std::mt19937_64& rng) const;

  // {"choice": [...]}, {"randint": [lo, hi]}, {"uniform": [lo, hi]},
  // {"quniform": [lo, hi, q]}, {"loguniform": [lo, hi]}; anything else is a
  // fixed value.
  json to_json() const;
  static Distribution from_json(const json& j);
};

class SearchSpace {
 public:
  SearchSpace& add(std::string name, Distribution d);
  bool contains(const std::string& name) const;
  const Distribution& at(const std::string& name) const;
  void erase(const std::string& name);
  const std::vector<std::pair<std::string, Distribution>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  json to_json() const;
  static SearchSpace from_json(const json& j);
  static SearchSpace load(const std::string& path);

 private:
  std::vector<std::pair<std::string, Distribution>> entries_;
};

// One independent draw per entry, in entry order.
json sample(const SearchSpace& space, std::mt19937_64& rng);

// Stream for (seed, stream id) pairs used across the sweep.
std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t id, std::uint32_t salt);

}  // namespace opforge::hpo
