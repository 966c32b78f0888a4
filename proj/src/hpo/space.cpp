#include "opforge/hpo/space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "opforge/error.hpp"

namespace opforge::hpo {

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

const char* kind_name(Distribution::Kind k) {
  switch (k) {
    case Distribution::Kind::Choice: return "choice";
    case Distribution::Kind::RandInt: return "randint";
    case Distribution::Kind::Uniform: return "uniform";
    case Distribution::Kind::QUniform: return "quniform";
    case Distribution::Kind::LogUniform: return "loguniform";
  }
  return "?";
}

}  // namespace

Distribution Distribution::choice(std::vector<json> options) {
  Distribution d;
  d.kind = Kind::Choice;
  d.options = std::move(options);
  d.validate();
  return d;
}

Distribution Distribution::randint(std::int64_t lo, std::int64_t hi) {
  Distribution d;
  d.kind = Kind::RandInt;
  d.lo = static_cast<double>(lo);
  d.hi = static_cast<double>(hi);
  d.validate();
  return d;
}

Distribution Distribution::uniform(double lo, double hi) {
  Distribution d;
  d.kind = Kind::Uniform;
  d.lo = lo;
  d.hi = hi;
  d.validate();
  return d;
}

Distribution Distribution::quniform(double lo, double hi, double q) {
  Distribution d;
  d.kind = Kind::QUniform;
  d.lo = lo;
  d.hi = hi;
  d.q = q;
  d.validate();
  return d;
}

Distribution Distribution::loguniform(double lo, double hi) {
  Distribution d;
  d.kind = Kind::LogUniform;
  d.lo = lo;
  d.hi = hi;
  d.validate();
  return d;
}

void Distribution::validate() const {
  if (kind == Kind::Choice) {
    if (options.empty()) throw ConfigError("choice needs at least one option");
    return;
  }
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
    throw ConfigError(std::string(kind_name(kind)) + " needs finite bounds with lo < hi");
  if (kind == Kind::RandInt && (lo != std::floor(lo) || hi != std::floor(hi)))
    throw ConfigError("randint bounds must be integers");
  if (kind == Kind::QUniform && !(q > 0.0 && std::isfinite(q))) throw ConfigError("quniform needs q > 0");
  if (kind == Kind::LogUniform && !(lo > 0.0)) throw ConfigError("loguniform needs lo > 0");
}

std::size_t Distribution::n_categories() const {
  if (kind == Kind::Choice) return options.size();
  if (kind == Kind::RandInt) return static_cast<std::size_t>(hi - lo);
  return 0;
}

json Distribution::category(std::size_t i) const {
  if (kind == Kind::Choice) return options.at(i);
  return static_cast<std::int64_t>(lo) + static_cast<std::int64_t>(i);
}

std::size_t Distribution::category_index(const json& v) const {
  if (kind == Kind::Choice) {
    for (std::size_t i = 0; i < options.size(); ++i)
      if (options[i] == v) return i;
    return npos;
  }
  if (kind == Kind::RandInt && v.is_number()) {
    double x = v.get<double>();
    if (x != std::floor(x) || x < lo || x >= hi) return npos;
    return static_cast<std::size_t>(x - lo);
  }
  return npos;
}

double Distribution::to_internal(double v) const { return kind == Kind::LogUniform ? std::log(v) : v; }

double Distribution::from_internal(double t) const { return kind == Kind::LogUniform ? std::exp(t) : t; }

json Distribution::finish(double v) const {
  v = std::clamp(v, lo, hi);
  if (kind == Kind::QUniform) {
    v = std::round(v / q) * q;
    // rounding may step just outside the bounds when lo/hi are off-grid
    if (v < lo) v += q;
    if (v > hi) v -= q;
  }
  return v;
}

json Distribution::draw(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::Choice:
    case Kind::RandInt: {
      std::uniform_int_distribution<std::size_t> pick(0, n_categories() - 1);
      return category(pick(rng));
    }
    case Kind::Uniform:
    case Kind::QUniform:
      return finish(std::uniform_real_distribution<double>(lo, hi)(rng));
    case Kind::LogUniform:
      return finish(std::exp(std::uniform_real_distribution<double>(std::log(lo), std::log(hi))(rng)));
  }
  return nullptr;
}

json Distribution::to_json() const {
  switch (kind) {
    case Kind::Choice: return {{"choice", options}};
    case Kind::RandInt: return {{"randint", {static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)}}};
    case Kind::Uniform: return {{"uniform", {lo, hi}}};
    case Kind::QUniform: return {{"quniform", {lo, hi, q}}};
    case Kind::LogUniform: return {{"loguniform", {lo, hi}}};
  }
  return nullptr;
}

Distribution Distribution::from_json(const json& j) {
  if (!j.is_object() || j.size() != 1) return fixed(j);
  const auto& [key, args] = *j.items().begin();
  auto num = [&](std::size_t i) {
    if (!args.is_array() || i >= args.size() || !args[i].is_number())
      throw ConfigError("malformed '" + key + "' arguments: " + args.dump());
    return args[i].get<double>();
  };
  auto arity = [&](std::size_t n) {
    if (!args.is_array() || args.size() != n)
      throw ConfigError("'" + key + "' takes " + std::to_string(n) + " arguments, got " + args.dump());
  };
  if (key == "choice") {
    if (!args.is_array()) throw ConfigError("choice needs a list of options");
    return choice(std::vector<json>(args.begin(), args.end()));
  }
  if (key == "randint") {
    arity(2);
    double lo = num(0), hi = num(1);
    if (lo != std::floor(lo) || hi != std::floor(hi)) throw ConfigError("randint bounds must be integers");
    return randint(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi));
  }
  if (key == "uniform") {
    arity(2);
    return uniform(num(0), num(1));
  }
  if (key == "quniform") {
    arity(3);
    return quniform(num(0), num(1), num(2));
  }
  if (key == "loguniform") {
    arity(2);
    return loguniform(num(0), num(1));
  }
  if (key == "randn") throw ConfigError("randn is not supported; use uniform or loguniform bounds");
  return fixed(j);
}

SearchSpace& SearchSpace::add(std::string name, Distribution d) {
  d.validate();
  if (contains(name)) throw ConfigError("search space already has '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(d));
  return *this;
}

bool SearchSpace::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

const Distribution& SearchSpace::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw LookupError("search space has no entry '" + name + "'");
}

void SearchSpace::erase(const std::string& name) {
  std::erase_if(entries_, [&](const auto& e) { return e.first == name; });
}

json SearchSpace::to_json() const {
  json j = json::object();
  for (const auto& [name, d] : entries_) j[name] = d.to_json();
  return j;
}

SearchSpace SearchSpace::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("search space must be an object");
  SearchSpace s;
  for (const auto& [name, v] : j.items()) s.add(name, Distribution::from_json(v));
  return s;
}

SearchSpace SearchSpace::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open search space file " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("search space file " + path + " is not valid JSON: " + e.what());
  }
}

json sample(const SearchSpace& space, std::mt19937_64& rng) {
  json c = json::object();
  for (const auto& [name, d] : space.entries()) c[name] = d.draw(rng);
  return c;
}

std::mt19937_64 stream_rng(std::uint64_t seed, std::uint64_t id, std::uint32_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32), salt};
  return std::mt19937_64(seq);
}

}  // namespace opforge::hpo
