#pragma once

#include "segfuse/volume.hpp"

namespace fixtures {

using namespace segfuse;

/// 8x8x8 map with one 20-voxel component (a 5x2x2 block) at 0.65.
inline ProbabilityMap small_case_map() {
  Grid g({8, 8, 8});
  std::vector<float> v(g.voxel_count(), 0.0f);
  for (int z = 3; z < 5; ++z)
    for (int y = 2; y < 4; ++y)
      for (int x = 1; x < 6; ++x) v[g.index(x, y, z)] = 0.65f;
  return ProbabilityMap(g, std::move(v));
}

/// 32x10x20 grid: two 14x10x20 lobes at 0.9 (x in 0..13 and 18..31) joined
/// by a 4x10x10 neck at 0.52 (x in 14..17, z in 0..9). 2800+2800+400 = 6000
/// foreground voxels at threshold 0.5.
inline ProbabilityMap dumbbell_map() {
  Grid g({32, 10, 20});
  std::vector<float> v(g.voxel_count(), 0.0f);
  for (int z = 0; z < 20; ++z)
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 32; ++x) {
        if (x <= 13 || x >= 18) {
          v[g.index(x, y, z)] = 0.9f;
        } else if (z < 10) {
          v[g.index(x, y, z)] = 0.52f;
        }
      }
  return ProbabilityMap(g, std::move(v));
}

}  // namespace fixtures
