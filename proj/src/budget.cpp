#include "opforge/budget.hpp"

#include <cmath>

#include "opforge/error.hpp"

namespace opforge {

namespace {

std::uint64_t ipow(std::uint64_t b, std::size_t e) {
  std::uint64_t r = 1;
  while (e--) r *= b;
  return r;
}

}  // namespace

std::uint64_t count_params_fno_formula(std::size_t d, std::size_t L, std::size_t width, std::size_t modes) {
  return ipow(2, d) * L * width * width * ipow(modes, d);
}

std::uint64_t count_params_fno_formula(const FnoConfig& c) {
  return count_params_fno_formula(c.problem_dim, c.n_layers, c.width, c.modes);
}

std::uint64_t cno_bracket_x12(std::size_t L, std::size_t M, std::size_t N) {
  if (L < 1 || M < 1 || N < 1) throw ConfigError("cno formula needs L, M, N >= 1");
  std::uint64_t q = ipow(4, L - 1);
  return 6 * 4 * q * M + 6 * N + 8 * N * (q - 1) + 62 * q - 11;
}

std::uint64_t count_params_cno_formula(std::size_t d, std::size_t L, std::size_t M, std::size_t N,
                                       std::size_t kernel, std::size_t chan_mul) {
  std::uint64_t num = ipow(kernel, d) * chan_mul * chan_mul * cno_bracket_x12(L, M, N);
  return (num + 6) / 12;
}

std::uint64_t count_params_cno_formula(const CnoConfig& c) {
  return count_params_cno_formula(c.problem_dim, c.n_layers, c.n_res_neck, c.n_res, c.kernel_size,
                                  c.channel_multiplier);
}

std::size_t compute_modes(std::uint64_t target, std::size_t maximum, std::size_t d, std::size_t L, std::size_t width) {
  if (d < 1 || L < 1 || width < 1) throw ConfigError("compute_modes needs d, L and width >= 1");
  std::uint64_t unit = count_params_fno_formula(d, L, width, 1);
  auto k = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(target) / static_cast<double>(unit),
                                                        1.0 / static_cast<double>(d))));
  while (k > 0 && unit * ipow(k, d) > target) --k;
  while (unit * ipow(k + 1, d) <= target) ++k;
  if (maximum > 0) k = std::min(k, maximum);
  if (k == 0)
    throw InfeasibleBudgetError("budget of " + std::to_string(target) + " parameters is below one mode per axis (" +
                                std::to_string(unit) + " parameters)");
  return k;
}

ChannelSolution compute_channel_multiplier(std::uint64_t target, std::size_t d, std::size_t L, std::size_t M,
                                           std::size_t N, std::size_t kernel) {
  if (d < 1 || kernel < 1) throw ConfigError("compute_channel_multiplier needs d and kernel size >= 1");
  double per_unit = static_cast<double>(ipow(kernel, d)) * static_cast<double>(cno_bracket_x12(L, M, N)) / 12.0;
  double c = std::sqrt(static_cast<double>(target) / per_unit);
  ChannelSolution s;
  auto r = static_cast<std::size_t>(std::floor(c + 0.5));
  if (r < 1) {
    s.chan_mul = 1;
    s.clamped = true;
    s.warning = "budget of " + std::to_string(target) + " parameters is below the count at channel multiplier 1 (" +
                std::to_string(count_params_cno_formula(d, L, M, N, kernel, 1)) + "); clamped to 1";
  } else {
    s.chan_mul = r;
  }
  return s;
}

double modes_rounding_bound(std::size_t modes, std::size_t d) {
  double r = static_cast<double>(modes) / static_cast<double>(modes + 1);
  return 1.0 - std::pow(r, static_cast<double>(d));
}

double channel_rounding_bound(std::size_t chan_mul) {
  double c = static_cast<double>(chan_mul);
  return (2.0 * c + 1.0) / (c * c);
}

json solve_budget(const std::string& family, json config, const std::string& solve_key, std::uint64_t target,
                  std::size_t maximum) {
  auto need = [&](const char* key) {
    if (!config.contains(key)) throw ConfigError(std::string("budget mode needs '") + key + "' in the config");
    try {
      return config.at(key).get<std::size_t>();
    } catch (const json::exception&) {
      throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
    }
  };
  if (family == "fno") {
    if (solve_key != "modes") throw ConfigError("fno budget mode can only solve 'modes'");
    std::size_t cap = maximum;
    if (config.contains("resolution") && config.at("resolution").get<std::size_t>() > 0) {
      std::size_t nyq = config.at("resolution").get<std::size_t>() / 2 + 1;
      cap = cap == 0 ? nyq : std::min(cap, nyq);
    }
    config["modes"] = compute_modes(target, cap, need("problem_dim"), need("n_layers"), need("width"));
    return config;
  }
  if (family == "cno") {
    if (solve_key != "channel_multiplier") throw ConfigError("cno budget mode can only solve 'channel_multiplier'");
    auto s = compute_channel_multiplier(target, need("problem_dim"), need("N_layers"), need("N_res_neck"),
                                        need("N_res"), need("kernel_size"));
    std::size_t c = maximum > 0 ? std::min(s.chan_mul, maximum) : s.chan_mul;
    config["channel_multiplier"] = c;
    if (s.clamped) config["budget_warning"] = s.warning;
    return config;
  }
  throw ConfigError("unknown model family '" + family + "'");
}

}  // namespace opforge
