#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace segfuse {

struct SubjectRecord {
  std::string subject_id;
  std::uint64_t lesion_volume = 0;
};

struct FoldAssignment {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> fold_of;  // subject_id -> fold in 0..k-1
};

/// SplitMix64 (Steele, Lea & Flood): state += 0x9E3779B97F4A7C15, then the
/// output mix with multipliers 0xBF58476D1CE4E5B9 and 0x94D049BB133111EB.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  /// Uniform in [0, bound) by rejection, bound > 0.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::uint64_t state_;
};

/// Size-balanced K-fold assignment.
///
/// Subjects are sorted by (lesion_volume, subject_id) and cut into
/// consecutive strata of k. Each stratum is shuffled with a Fisher-Yates pass
/// driven by one SplitMix64 stream seeded with `seed`, then dealt one subject
/// per fold; the dealing direction alternates between strata (0..k-1, then
/// k-1..0), so fold sizes differ by at most one.
FoldAssignment size_balanced_split(std::span<const SubjectRecord> records, std::size_t k,
                                   std::uint64_t seed);

struct FoldSummary {
  std::size_t fold = 0;
  std::size_t count = 0;
  double mean_volume = 0.0;
  double median_volume = 0.0;
};

std::vector<FoldSummary> fold_summary(const FoldAssignment& fa,
                                      std::span<const SubjectRecord> records);

}  // namespace segfuse
