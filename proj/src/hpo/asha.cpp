#include "opforge/hpo/asha.hpp"

#include <algorithm>
#include <cmath>

#include "opforge/error.hpp"

namespace opforge::hpo {

std::vector<std::size_t> asha_rungs(std::size_t max_epochs, const AshaParams& params) {
  if (params.eta < 2) throw ConfigError("ASHA reduction factor must be at least 2");
  std::size_t grace = params.grace ? params.grace : std::max<std::size_t>(1, max_epochs / 64);
  std::vector<std::size_t> rungs;
  for (std::size_t r = grace; r < max_epochs; r *= params.eta) rungs.push_back(r);
  return rungs;
}

AshaDecision asha_decide(double loss, const std::vector<double>& others, std::size_t eta) {
  std::size_t k = others.size() + 1;
  if (k < eta) return AshaDecision::Continue;
  std::size_t keep = std::max<std::size_t>(1, k / eta);
  // non-finite losses rank behind everything
  double l = std::isfinite(loss) ? loss : std::numeric_limits<double>::infinity();
  std::size_t rank = 0;
  for (double o : others) {
    double v = std::isfinite(o) ? o : std::numeric_limits<double>::infinity();
    if (v < l) ++rank;
  }
  return rank < keep ? AshaDecision::Continue : AshaDecision::Stop;
}

}  // namespace opforge::hpo
