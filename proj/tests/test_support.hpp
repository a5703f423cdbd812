#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oracles/oracles.hpp"
#include "segfuse/volume.hpp"

namespace testing_support {

using namespace segfuse;

inline BinaryMask mask_from_points(Dims dims, const std::vector<std::array<std::int64_t, 3>>& pts,
                                   Spacing spacing = {1, 1, 1}) {
  Grid g(dims, spacing);
  std::vector<std::uint8_t> v(g.voxel_count(), 0);
  for (const auto& p : pts) v[g.index(p[0], p[1], p[2])] = 1;
  return BinaryMask(g, std::move(v));
}

inline BinaryMask box_mask(Dims dims, std::array<std::int64_t, 3> lo, std::array<std::int64_t, 3> hi,
                           Spacing spacing = {1, 1, 1}) {
  Grid g(dims, spacing);
  std::vector<std::uint8_t> v(g.voxel_count(), 0);
  for (auto z = lo[2]; z <= hi[2]; ++z)
    for (auto y = lo[1]; y <= hi[1]; ++y)
      for (auto x = lo[0]; x <= hi[0]; ++x) v[g.index(x, y, z)] = 1;
  return BinaryMask(g, std::move(v));
}

inline oracle::RawMask to_raw(const BinaryMask& m) {
  oracle::RawMask r;
  for (int i = 0; i < 3; ++i) r.dims[i] = static_cast<int>(m.grid().dims()[i]);
  r.voxels.assign(m.data().begin(), m.data().end());
  return r;
}

inline Dims random_dims(std::mt19937_64& rng, int max_side) {
  std::uniform_int_distribution<int> side(1, max_side);
  return {side(rng), side(rng), side(rng)};
}

/// Random mask with a per-instance density, so both sparse and merged
/// component structures show up.
inline BinaryMask random_mask(std::mt19937_64& rng, const Grid& g) {
  std::uniform_real_distribution<double> density_dist(0.02, 0.6);
  std::bernoulli_distribution on(density_dist(rng));
  std::vector<std::uint8_t> v(g.voxel_count());
  for (auto& x : v) x = on(rng) ? 1 : 0;
  return BinaryMask(g, std::move(v));
}

inline BinaryMask random_nonempty_mask(std::mt19937_64& rng, const Grid& g) {
  while (true) {
    BinaryMask m = random_mask(rng, g);
    if (foreground_count(m) > 0) return m;
  }
}

/// Probability values drawn on a coarse grid of levels so exact ties with
/// thresholds (0.5, 0.55, 0.7) occur regularly.
inline ProbabilityMap random_probability_map(std::mt19937_64& rng, const Grid& g) {
  static const float kLevels[] = {0.0f, 0.1f, 0.3f, 0.49f, 0.5f, 0.52f, 0.55f,
                                  0.6f, 0.65f, 0.69f, 0.7f, 0.71f, 0.8f, 0.9f, 1.0f};
  std::uniform_int_distribution<int> pick(0, static_cast<int>(std::size(kLevels)) - 1);
  std::uniform_real_distribution<float> uni(0.0f, 1.0f);
  std::bernoulli_distribution coarse(0.5);
  std::bernoulli_distribution background(0.6);
  std::vector<float> v(g.voxel_count());
  for (auto& x : v) {
    if (background(rng)) {
      x = 0.0f;
    } else {
      x = coarse(rng) ? kLevels[pick(rng)] : uni(rng);
    }
  }
  return ProbabilityMap(g, std::move(v));
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("segfuse_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing_support
