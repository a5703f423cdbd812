#pragma once

#include <optional>
#include <span>
#include <vector>

#include "segfuse/volume.hpp"

namespace segfuse {

/// Voxelwise weighted mean of probability maps (uniform when `weights` is
/// empty). Weights must be non-negative with a positive sum, one per map.
///
/// Each voxel's terms are sorted before summation, so the result is
/// bit-identical under any reordering of (map, weight) pairs. The output
/// takes its grid from the first map.
ProbabilityMap average_maps(std::span<const ProbabilityMap> maps,
                            std::span<const double> weights = {});

}  // namespace segfuse
