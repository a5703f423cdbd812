#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "segfuse/error.hpp"

namespace segfuse {

using Dims = std::array<std::int64_t, 3>;
using Spacing = std::array<double, 3>;
using Affine = std::array<std::array<double, 4>, 4>;

Affine diagonal_affine(const Spacing& spacing);

/// Voxel grid geometry shared by every volume: extents, voxel size in mm and
/// the voxel-to-world transform. Memory order is always x fastest, then y,
/// then z.
class Grid {
 public:
  Grid(Dims dims, Spacing spacing = {1.0, 1.0, 1.0});
  Grid(Dims dims, Spacing spacing, Affine affine);

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  const Affine& affine() const { return affine_; }

  std::int64_t nx() const { return dims_[0]; }
  std::int64_t ny() const { return dims_[1]; }
  std::int64_t nz() const { return dims_[2]; }
  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]);
  }
  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::size_t>(x + dims_[0] * (y + dims_[1] * z));
  }
  std::array<std::int64_t, 3> coords(std::size_t idx) const;
  bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims_[0] && y < dims_[1] && z < dims_[2];
  }

  bool operator==(const Grid&) const = default;

 private:
  Dims dims_;
  Spacing spacing_;
  Affine affine_;
};

/// Dense scalar grid. Immutable after construction.
template <typename T>
class Volume {
 public:
  using value_type = T;

  Volume(Grid grid, std::vector<T> data) : grid_(std::move(grid)), data_(std::move(data)) {
    if (data_.size() != grid_.voxel_count()) {
      throw ValidationError("volume data length " + std::to_string(data_.size()) +
                            " does not match grid voxel count " +
                            std::to_string(grid_.voxel_count()));
    }
  }
  explicit Volume(Grid grid, T fill = T{})
      : grid_(std::move(grid)), data_(grid_.voxel_count(), fill) {}

  const Grid& grid() const { return grid_; }
  std::span<const T> data() const { return data_; }
  std::size_t size() const { return data_.size(); }
  const T& operator[](std::size_t i) const { return data_[i]; }
  const T& at(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return data_[grid_.index(x, y, z)];
  }

  bool operator==(const Volume&) const = default;

 protected:
  Grid grid_;
  std::vector<T> data_;
};

using ScalarVolume = Volume<float>;
using LabelVolume = Volume<std::uint32_t>;

/// Volume whose every value lies in [0, 1].
class ProbabilityMap : public Volume<float> {
 public:
  ProbabilityMap(Grid grid, std::vector<float> data);
  explicit ProbabilityMap(const ScalarVolume& v) : ProbabilityMap(v.grid(), {v.data().begin(), v.data().end()}) {}

  ScalarVolume as_scalar() const { return ScalarVolume(grid_, data_); }
  float max_value() const;
};

/// Volume whose every value is exactly 0 or 1, stored one byte per voxel.
class BinaryMask : public Volume<std::uint8_t> {
 public:
  BinaryMask(Grid grid, std::vector<std::uint8_t> data);
  explicit BinaryMask(Grid grid) : Volume(std::move(grid), std::uint8_t{0}) {}

  // Rejects any value other than 0 or 1.
  static BinaryMask from_scalar(const ScalarVolume& v);
  ScalarVolume as_scalar() const;
};

/// Foreground is p >= t (inclusive), with t rounded to float32 first.
BinaryMask threshold(const ProbabilityMap& p, double t);

std::size_t foreground_count(const BinaryMask& m);

/// nullopt when grids match; otherwise a description naming the first
/// differing field. Spacing compares with relative tolerance 1e-5.
std::optional<std::string> check_compatible(const Grid& a, const Grid& b);

/// Throws GridMismatchError with the mismatch description.
void require_compatible(const Grid& a, const Grid& b, const std::string& context = {});

}  // namespace segfuse
