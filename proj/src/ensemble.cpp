#include "segfuse/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

namespace segfuse {

ProbabilityMap average_maps(std::span<const ProbabilityMap> maps, std::span<const double> weights) {
  if (maps.empty()) throw ValidationError("ensemble needs at least one probability map");
  if (!weights.empty() && weights.size() != maps.size()) {
    throw ValidationError("ensemble has " + std::to_string(maps.size()) + " maps but " +
                          std::to_string(weights.size()) + " weights");
  }
  double weight_sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ValidationError("ensemble weights must be finite and non-negative");
    }
    weight_sum += w;
  }
  if (!weights.empty() && !(weight_sum > 0.0)) {
    throw ValidationError("ensemble weights sum to zero");
  }
  for (std::size_t k = 1; k < maps.size(); ++k) {
    require_compatible(maps[0].grid(), maps[k].grid(),
                       "ensemble map " + std::to_string(k));
  }

  const std::size_t n = maps.size();
  const std::size_t voxels = maps[0].size();
  std::vector<float> out(voxels);
  std::vector<std::pair<float, double>> terms(n);
  for (std::size_t i = 0; i < voxels; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      terms[k] = {maps[k][i], weights.empty() ? 1.0 : weights[k]};
    }
    std::sort(terms.begin(), terms.end());
    double num = 0.0;
    double den = 0.0;
    for (const auto& [v, w] : terms) {
      num += w * static_cast<double>(v);
      den += w;
    }
    out[i] = std::clamp(static_cast<float>(num / den), 0.0f, 1.0f);
  }
  return ProbabilityMap(maps[0].grid(), std::move(out));
}

}  // namespace segfuse
