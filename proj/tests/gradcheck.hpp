#pragma once

// Central-difference gradient probes shared by the unit and acceptance tests.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "opforge/ops.hpp"
#include "opforge/tensor.hpp"

namespace gradcheck {

using opforge::Tensor;

struct Report {
  std::size_t probes = 0;
  double worst = 0.0;  // largest relative error seen
  std::size_t nontrivial = 0;  // probes where either derivative exceeded 1e-6
};

// rel = |analytic - numeric| / max(|analytic|, |numeric|), with differences
// below `abs_floor` counted as exact (zero gradients).
inline double rel_error(double a, double n, double abs_floor = 1e-9) {
  double d = std::abs(a - n);
  if (d <= abs_floor) return 0.0;
  return d / std::max(std::abs(a), std::abs(n));
}

// `f` maps the current leaf values to a scalar tensor. Probes pick a random
// leaf, then a random entry, and compare d f / d entry.
inline Report check(const std::function<Tensor()>& f, std::vector<Tensor> leaves, std::size_t probes,
                    std::uint64_t seed, double h = 1e-6) {
  for (auto& l : leaves) l.zero_grad();
  Tensor out = f();
  opforge::backward(out);
  std::vector<std::vector<double>> analytic;
  for (auto& l : leaves) {
    if (l.has_grad())
      analytic.emplace_back(l.grad().begin(), l.grad().end());
    else
      analytic.emplace_back(l.size(), 0.0);
  }
  std::mt19937_64 rng(seed);
  Report r;
  opforge::NoGradGuard guard;
  for (std::size_t p = 0; p < probes; ++p) {
    std::size_t li = std::uniform_int_distribution<std::size_t>(0, leaves.size() - 1)(rng);
    std::size_t k = std::uniform_int_distribution<std::size_t>(0, leaves[li].size() - 1)(rng);
    double& v = leaves[li].values_mut()[k];
    double saved = v;
    v = saved + h;
    double fp = f().item();
    v = saved - h;
    double fm = f().item();
    v = saved;
    double numeric = (fp - fm) / (2.0 * h);
    r.worst = std::max(r.worst, rel_error(analytic[li][k], numeric));
    if (std::max(std::abs(analytic[li][k]), std::abs(numeric)) > 1e-6) ++r.nontrivial;
    ++r.probes;
  }
  return r;
}

// Random weights turning a tensor into a scalar with a non-trivial gradient.
inline Tensor random_like(const Tensor& t, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(t.size());
  for (auto& x : v) x = n(rng);
  return Tensor::from(t.shape(), std::move(v));
}

inline Tensor random_tensor(opforge::Shape s, std::uint64_t seed, double scale = 1.0, bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> v(opforge::numel(s));
  for (auto& x : v) x = n(rng);
  return Tensor::from(std::move(s), std::move(v), requires_grad);
}

}  // namespace gradcheck

namespace gradcheck {

// Entries uniform in [-1, 1].
inline Tensor uniform_tensor(opforge::Shape s, std::uint64_t seed, bool requires_grad = true) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(opforge::numel(s));
  for (auto& x : v) x = u(rng);
  return Tensor::from(std::move(s), std::move(v), requires_grad);
}

// sum(w * t) for fixed random w.
inline Tensor project(const Tensor& t, std::uint64_t seed) {
  return opforge::ops::sum(opforge::ops::mul(t, random_like(t, seed)));
}

}  // namespace gradcheck
