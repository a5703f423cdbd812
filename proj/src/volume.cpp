#include "segfuse/volume.hpp"

#include <algorithm>
#include <cmath>

namespace segfuse {

Affine diagonal_affine(const Spacing& spacing) {
  Affine a{};
  for (int i = 0; i < 3; ++i) a[i][i] = spacing[i];
  a[3][3] = 1.0;
  return a;
}

Grid::Grid(Dims dims, Spacing spacing) : Grid(dims, spacing, diagonal_affine(spacing)) {}

Grid::Grid(Dims dims, Spacing spacing, Affine affine)
    : dims_(dims), spacing_(spacing), affine_(affine) {
  static const char* axis = "xyz";
  for (int i = 0; i < 3; ++i) {
    if (dims_[i] <= 0) {
      throw ValidationError(std::string("grid dimension n") + axis[i] + " must be positive, got " +
                            std::to_string(dims_[i]));
    }
    if (!(spacing_[i] > 0.0) || !std::isfinite(spacing_[i])) {
      throw ValidationError(std::string("grid spacing s") + axis[i] +
                            " must be finite and positive");
    }
  }
  if (affine_[3][0] != 0.0 || affine_[3][1] != 0.0 || affine_[3][2] != 0.0 ||
      affine_[3][3] != 1.0) {
    throw ValidationError("affine last row must be (0, 0, 0, 1)");
  }
}

std::array<std::int64_t, 3> Grid::coords(std::size_t idx) const {
  const auto i = static_cast<std::int64_t>(idx);
  return {i % dims_[0], (i / dims_[0]) % dims_[1], i / (dims_[0] * dims_[1])};
}

ProbabilityMap::ProbabilityMap(Grid grid, std::vector<float> data)
    : Volume(std::move(grid), std::move(data)) {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const float v = data_[i];
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ValidationError("probability map value at voxel " + std::to_string(i) +
                            " is outside [0, 1]");
    }
  }
}

float ProbabilityMap::max_value() const {
  return *std::max_element(data_.begin(), data_.end());
}

BinaryMask::BinaryMask(Grid grid, std::vector<std::uint8_t> data)
    : Volume(std::move(grid), std::move(data)) {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (data_[i] > 1) {
      throw ValidationError("binary mask value at voxel " + std::to_string(i) +
                            " is not 0 or 1");
    }
  }
}

BinaryMask BinaryMask::from_scalar(const ScalarVolume& v) {
  std::vector<std::uint8_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const float x = v[i];
    if (x == 0.0f) {
      out[i] = 0;
    } else if (x == 1.0f) {
      out[i] = 1;
    } else {
      throw ValidationError("binary mask value at voxel " + std::to_string(i) +
                            " is not 0 or 1");
    }
  }
  return BinaryMask(v.grid(), std::move(out));
}

ScalarVolume BinaryMask::as_scalar() const {
  return ScalarVolume(grid_, std::vector<float>(data_.begin(), data_.end()));
}

BinaryMask threshold(const ProbabilityMap& p, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ValidationError("threshold must lie in [0, 1]");
  }
  // Compared at the map's storage precision, so t = 0.7 selects a stored 0.7f.
  const auto cut = static_cast<float>(t);
  std::vector<std::uint8_t> out(p.size());
  const auto values = p.data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i] >= cut ? 1 : 0;
  }
  return BinaryMask(p.grid(), std::move(out));
}

std::size_t foreground_count(const BinaryMask& m) {
  const auto d = m.data();
  return static_cast<std::size_t>(std::count(d.begin(), d.end(), std::uint8_t{1}));
}

std::optional<std::string> check_compatible(const Grid& a, const Grid& b) {
  static const char* dim_names[] = {"nx", "ny", "nz"};
  static const char* spacing_names[] = {"sx", "sy", "sz"};
  for (int i = 0; i < 3; ++i) {
    if (a.dims()[i] != b.dims()[i]) {
      return "dimension " + std::string(dim_names[i]) + " differs (" +
             std::to_string(a.dims()[i]) + " vs " + std::to_string(b.dims()[i]) + ")";
    }
  }
  for (int i = 0; i < 3; ++i) {
    const double sa = a.spacing()[i];
    const double sb = b.spacing()[i];
    if (std::abs(sa - sb) > 1e-5 * std::max(std::abs(sa), std::abs(sb))) {
      return "spacing " + std::string(spacing_names[i]) + " differs (" + std::to_string(sa) +
             " vs " + std::to_string(sb) + ")";
    }
  }
  return std::nullopt;
}

void require_compatible(const Grid& a, const Grid& b, const std::string& context) {
  if (auto mismatch = check_compatible(a, b)) {
    throw GridMismatchError(context.empty() ? "grid mismatch: " + *mismatch
                                            : context + ": grid mismatch: " + *mismatch);
  }
}

}  // namespace segfuse
