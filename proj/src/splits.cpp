#include "segfuse/splits.hpp"

#include <algorithm>
#include <set>

#include "segfuse/error.hpp"

namespace segfuse {

std::uint64_t SplitMix64::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t SplitMix64::below(std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % bound;
}

FoldAssignment size_balanced_split(std::span<const SubjectRecord> records, std::size_t k,
                                   std::uint64_t seed) {
  if (k < 2) throw ValidationError("fold count k must be at least 2");
  if (k > records.size()) {
    throw ValidationError("fold count k = " + std::to_string(k) + " exceeds the " +
                          std::to_string(records.size()) + " subjects");
  }
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.subject_id).second) {
      throw ValidationError("duplicate subject_id '" + r.subject_id + "'");
    }
  }

  std::vector<const SubjectRecord*> order;
  order.reserve(records.size());
  for (const auto& r : records) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const SubjectRecord* a, const SubjectRecord* b) {
    if (a->lesion_volume != b->lesion_volume) return a->lesion_volume < b->lesion_volume;
    return a->subject_id < b->subject_id;
  });

  FoldAssignment fa{k, seed, {}};
  SplitMix64 rng(seed);
  for (std::size_t start = 0, stratum = 0; start < order.size(); start += k, ++stratum) {
    const std::size_t n = std::min(k, order.size() - start);
    std::vector<const SubjectRecord*> members(order.begin() + static_cast<std::ptrdiff_t>(start),
                                              order.begin() + static_cast<std::ptrdiff_t>(start + n));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(members[i - 1], members[rng.below(i)]);
    }
    const bool forward = stratum % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      fa.fold_of[members[i]->subject_id] = forward ? i : k - 1 - i;
    }
  }
  return fa;
}

std::vector<FoldSummary> fold_summary(const FoldAssignment& fa,
                                      std::span<const SubjectRecord> records) {
  std::map<std::string, std::uint64_t> volume;
  for (const auto& r : records) volume[r.subject_id] = r.lesion_volume;
  std::vector<std::vector<double>> per_fold(fa.k);
  for (const auto& [id, fold] : fa.fold_of) {
    auto it = volume.find(id);
    if (it == volume.end()) throw ValidationError("assigned subject '" + id + "' has no record");
    if (fold >= fa.k) throw ValidationError("subject '" + id + "' has fold index out of range");
    per_fold[fold].push_back(static_cast<double>(it->second));
  }
  std::vector<FoldSummary> out;
  for (std::size_t f = 0; f < fa.k; ++f) {
    auto& v = per_fold[f];
    FoldSummary s;
    s.fold = f;
    s.count = v.size();
    if (!v.empty()) {
      std::sort(v.begin(), v.end());
      double sum = 0.0;
      for (double x : v) sum += x;
      s.mean_volume = sum / static_cast<double>(v.size());
      const std::size_t mid = v.size() / 2;
      s.median_volume = v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace segfuse
