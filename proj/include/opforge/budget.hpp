#pragma once

// Closed-form parameter counts and their inversion for budget-constrained
// search spaces.

#include <cstdint>
#include <string>

#include "opforge/cno.hpp"
#include "opforge/fno.hpp"

namespace opforge {

// 2^d * L * d_v^2 * k_max^d
std::uint64_t count_params_fno_formula(const FnoConfig& cfg);
std::uint64_t count_params_fno_formula(std::size_t d, std::size_t L, std::size_t width, std::size_t modes);

// 12 times the bracket of the CNO formula, which is always an integer:
// 6*4^L*M + 6N + 8N(4^(L-1) - 1) + 62*4^(L-1) - 11.
std::uint64_t cno_bracket_x12(std::size_t L, std::size_t M, std::size_t N);

// k^d * chan_mul^2 * bracket, rounded half-up.
std::uint64_t count_params_cno_formula(const CnoConfig& cfg);
std::uint64_t count_params_cno_formula(std::size_t d, std::size_t L, std::size_t M, std::size_t N,
                                       std::size_t kernel, std::size_t chan_mul);

struct ParamBudget {
  std::uint64_t target = 0;
  double tolerance = 0.05;
  std::size_t maximum = 0;  // cap on the solved variable, 0 for none
};

// Largest k with 2^d L d_v^2 k^d <= P, capped at `maximum` (0 = no cap).
// InfeasibleBudgetError when even k = 1 exceeds P.
std::size_t compute_modes(std::uint64_t target, std::size_t maximum, std::size_t d, std::size_t L, std::size_t width);

struct ChannelSolution {
  std::size_t chan_mul = 1;
  bool clamped = false;  // P was below the count at chan_mul = 1
  std::string warning;
};

// round(sqrt(P / (k^d * bracket))), at least 1.
ChannelSolution compute_channel_multiplier(std::uint64_t target, std::size_t d, std::size_t L, std::size_t M,
                                           std::size_t N, std::size_t kernel);

// Relative gap bounds that a solved variable can leave against the target.
// Modes: floor leaves at most 1 - (k/(k+1))^d. Channels: rounding leaves at
// most (2c + 1) / c^2.
double modes_rounding_bound(std::size_t modes, std::size_t d);
double channel_rounding_bound(std::size_t chan_mul);

// Fills `solve_key` ("modes" or "channel_multiplier") in a merged config
// from the other keys. For modes the cap is min(maximum, resolution/2 + 1)
// when the config carries a resolution.
json solve_budget(const std::string& family, json config, const std::string& solve_key, std::uint64_t target,
                  std::size_t maximum);

}  // namespace opforge
