#include "segfuse/components.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <string>

namespace segfuse {

Connectivity connectivity_from_int(int n) {
  switch (n) {
    case 6: return Connectivity::k6;
    case 18: return Connectivity::k18;
    case 26: return Connectivity::k26;
    default:
      throw ValidationError("connectivity must be 6, 18 or 26, got " + std::to_string(n));
  }
}

std::vector<std::array<int, 3>> neighbor_offsets(Connectivity connectivity) {
  const int limit = connectivity == Connectivity::k6 ? 1 : connectivity == Connectivity::k18 ? 2 : 3;
  std::vector<std::array<int, 3>> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan != 0 && manhattan <= limit) out.push_back({dx, dy, dz});
      }
  return out;
}

namespace {

class DisjointSet {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) {
    std::uint32_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::uint32_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

// Neighbours already visited by an x-fastest raster scan.
std::vector<std::array<int, 3>> backward_offsets(Connectivity c) {
  auto all = neighbor_offsets(c);
  std::erase_if(all, [](const auto& o) {
    return !(o[2] < 0 || (o[2] == 0 && o[1] < 0) || (o[2] == 0 && o[1] == 0 && o[0] < 0));
  });
  return all;
}

}  // namespace

ComponentSet label_components(const BinaryMask& mask, Connectivity connectivity) {
  const Grid& g = mask.grid();
  const auto nx = g.nx();
  const auto ny = g.ny();
  const auto nz = g.nz();
  const auto backward = backward_offsets(connectivity);
  const auto in = mask.data();

  // Pass 1: provisional labels (1-based, 0 = background) with equivalences.
  constexpr std::uint32_t kNone = 0;
  std::vector<std::uint32_t> provisional(in.size(), kNone);
  DisjointSet sets;
  sets.make();  // slot 0 unused so provisional labels index directly
  for (std::int64_t z = 0; z < nz; ++z) {
    for (std::int64_t y = 0; y < ny; ++y) {
      for (std::int64_t x = 0; x < nx; ++x) {
        const std::size_t idx = g.index(x, y, z);
        if (in[idx] == 0) continue;
        std::uint32_t label = kNone;
        for (const auto& o : backward) {
          const auto xx = x + o[0];
          const auto yy = y + o[1];
          const auto zz = z + o[2];
          if (!g.contains(xx, yy, zz)) continue;
          const std::uint32_t nb = provisional[g.index(xx, yy, zz)];
          if (nb == kNone) continue;
          if (label == kNone) {
            label = nb;
          } else if (nb != label) {
            sets.unite(label, nb);
          }
        }
        provisional[idx] = label == kNone ? sets.make() : label;
      }
    }
  }

  // Pass 2: final numbering by first appearance in scan order.
  std::vector<std::uint32_t> final_label(sets.size(), kNone);
  std::vector<std::uint32_t> labels(in.size(), 0);
  ComponentSet cs{LabelVolume(g, std::uint32_t{0}), 0, {}};
  for (std::size_t idx = 0; idx < in.size(); ++idx) {
    if (provisional[idx] == kNone) continue;
    const std::uint32_t root = sets.find(provisional[idx]);
    std::uint32_t& label = final_label[root];
    const auto c = g.coords(idx);
    if (label == kNone) {
      label = ++cs.count;
      cs.stats.push_back(ComponentStats{0, BoundingBox{c, c}, std::nullopt});
    }
    labels[idx] = label;
    auto& st = cs.stats[label - 1];
    ++st.size;
    for (int a = 0; a < 3; ++a) {
      st.bbox.min[a] = std::min(st.bbox.min[a], c[a]);
      st.bbox.max[a] = std::max(st.bbox.max[a], c[a]);
    }
  }
  cs.labels = LabelVolume(g, std::move(labels));
  return cs;
}

ComponentSet annotate_peaks(ComponentSet cs, const ProbabilityMap& p) {
  require_compatible(cs.labels.grid(), p.grid(), "annotate_peaks");
  std::vector<float> peak(cs.count, -1.0f);
  const auto labels = cs.labels.data();
  const auto values = p.data();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0) peak[labels[i] - 1] = std::max(peak[labels[i] - 1], values[i]);
  }
  for (std::uint32_t k = 0; k < cs.count; ++k) cs.stats[k].peak_probability = peak[k];
  return cs;
}

BinaryMask remove_components(const BinaryMask& mask, const ComponentSet& cs,
                             const std::set<std::uint32_t>& ids) {
  require_compatible(mask.grid(), cs.labels.grid(), "remove_components");
  std::vector<bool> drop(static_cast<std::size_t>(cs.count) + 1, false);
  for (std::uint32_t id : ids) {
    if (id < 1 || id > cs.count) {
      throw ValidationError("component id " + std::to_string(id) + " is outside 1.." +
                            std::to_string(cs.count));
    }
    drop[id] = true;
  }
  std::vector<std::uint8_t> out(mask.data().begin(), mask.data().end());
  const auto labels = cs.labels.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (drop[labels[i]]) out[i] = 0;
  }
  return BinaryMask(mask.grid(), std::move(out));
}

}  // namespace segfuse
