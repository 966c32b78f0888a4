#pragma once

#include <cstddef>
#include <vector>

namespace opforge::hpo {

struct AshaParams {
  std::size_t eta = 4;
  std::size_t grace = 0;  // 0: max(1, max_epochs / 64)
};

// Rung epochs grace * eta^j strictly below max_epochs.
std::vector<std::size_t> asha_rungs(std::size_t max_epochs, const AshaParams& params = {});

enum class AshaDecision { Continue, Stop };

// `loss` was just recorded at a rung where `others` were recorded earlier.
// With k = others + 1 results, the trial continues while k < eta or when it
// ranks within the best max(1, floor(k / eta)). Ties favour the newcomer.
AshaDecision asha_decide(double loss, const std::vector<double>& others, std::size_t eta);

}  // namespace opforge::hpo
