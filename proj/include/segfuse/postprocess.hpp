#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "segfuse/components.hpp"
#include "segfuse/volume.hpp"

namespace segfuse {

struct PostprocessParams {
  double base_threshold = 0.5;
  double high_threshold = 0.55;
  double min_peak_probability = 0.7;
  std::size_t small_case_cutoff = 5000;
  Connectivity connectivity = Connectivity::k26;

  /// Throws ValidationError naming the violated constraint.
  void validate() const;
};

enum class Branch { kSmall, kLarge };

const char* to_string(Branch b);

struct RemovedComponent {
  std::uint32_t id = 0;
  std::size_t size = 0;
  float peak = 0.0f;
};

struct PostprocessReport {
  Branch branch = Branch::kSmall;
  std::uint32_t components_before = 0;
  std::uint32_t components_after = 0;
  std::vector<RemovedComponent> removed_components;
  std::size_t foreground_before = 0;
  std::size_t foreground_after = 0;
};

struct PostprocessResult {
  BinaryMask mask;
  PostprocessReport report;
};

/// Thresholds `p` at the base threshold. Cases whose foreground has at most
/// `small_case_cutoff` voxels drop every component whose peak probability is
/// strictly below `min_peak_probability`; larger cases are re-thresholded at
/// `high_threshold` instead, which splits weakly joined lesions.
PostprocessResult postprocess(const ProbabilityMap& p, const PostprocessParams& params = {});

}  // namespace segfuse
