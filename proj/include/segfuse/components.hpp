#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <vector>

#include "segfuse/volume.hpp"

namespace segfuse {

/// Standard 3D voxel neighbourhoods: faces (6), faces+edges (18), all (26).
enum class Connectivity : int { k6 = 6, k18 = 18, k26 = 26 };

Connectivity connectivity_from_int(int n);

struct BoundingBox {
  std::array<std::int64_t, 3> min;  // inclusive
  std::array<std::int64_t, 3> max;  // inclusive
};

struct ComponentStats {
  std::size_t size = 0;
  BoundingBox bbox{};
  std::optional<float> peak_probability;
};

/// Labeling of a binary mask. Label 0 is background; components are numbered
/// 1..count in the order their first voxel appears in x-fastest scan order,
/// so the numbering is independent of how the labeling was computed.
struct ComponentSet {
  LabelVolume labels;
  std::uint32_t count = 0;
  std::vector<ComponentStats> stats;  // stats[label - 1]

  const ComponentStats& component(std::uint32_t label) const { return stats.at(label - 1); }
};

ComponentSet label_components(const BinaryMask& mask, Connectivity connectivity);

/// Sets each component's peak_probability to the maximum of `p` over its voxels.
ComponentSet annotate_peaks(ComponentSet cs, const ProbabilityMap& p);

/// Zeroes the voxels of the listed components. Throws ValidationError for a
/// label outside 1..cs.count.
BinaryMask remove_components(const BinaryMask& mask, const ComponentSet& cs,
                             const std::set<std::uint32_t>& ids);

/// Neighbour offsets of a connectivity, excluding the centre voxel.
std::vector<std::array<int, 3>> neighbor_offsets(Connectivity connectivity);

}  // namespace segfuse
