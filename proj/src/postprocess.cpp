#include "segfuse/postprocess.hpp"

#include <cmath>
#include <set>

namespace segfuse {

void PostprocessParams::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(base_threshold)) throw ValidationError("base_threshold must lie in [0, 1]");
  if (!in_unit(high_threshold)) throw ValidationError("high_threshold must lie in [0, 1]");
  if (base_threshold > high_threshold) {
    throw ValidationError("base_threshold must not exceed high_threshold");
  }
  if (!in_unit(min_peak_probability)) {
    throw ValidationError("min_peak_probability must lie in [0, 1]");
  }
}

const char* to_string(Branch b) { return b == Branch::kSmall ? "small" : "large"; }

PostprocessResult postprocess(const ProbabilityMap& p, const PostprocessParams& params) {
  params.validate();
  BinaryMask base = threshold(p, params.base_threshold);
  const std::size_t fg = foreground_count(base);
  ComponentSet cs = label_components(base, params.connectivity);

  PostprocessReport report;
  report.components_before = cs.count;
  report.foreground_before = fg;

  if (fg <= params.small_case_cutoff) {
    report.branch = Branch::kSmall;
    cs = annotate_peaks(std::move(cs), p);
    const auto floor = static_cast<float>(params.min_peak_probability);
    std::set<std::uint32_t> drop;
    for (std::uint32_t id = 1; id <= cs.count; ++id) {
      const auto& st = cs.component(id);
      if (*st.peak_probability < floor) {
        drop.insert(id);
        report.removed_components.push_back({id, st.size, *st.peak_probability});
      }
    }
    BinaryMask pruned = remove_components(base, cs, drop);
    report.components_after = cs.count - static_cast<std::uint32_t>(drop.size());
    report.foreground_after = foreground_count(pruned);
    return {std::move(pruned), std::move(report)};
  }

  report.branch = Branch::kLarge;
  BinaryMask split = threshold(p, params.high_threshold);
  report.components_after = label_components(split, params.connectivity).count;
  report.foreground_after = foreground_count(split);
  return {std::move(split), std::move(report)};
}

}  // namespace segfuse
