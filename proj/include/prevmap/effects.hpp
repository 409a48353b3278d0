#pragma once

// Voxel grid geometry and the per-voxel, per-subject effects table that all
// fitting and testing operates on. Linear indices are x-fastest, zero-based:
// index = x + nx*(y + ny*z).

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace prevmap {

struct GridDims {
  std::int64_t nx = 0;
  std::int64_t ny = 0;
  std::int64_t nz = 1;

  std::int64_t size() const { return nx * ny * nz; }
  bool operator==(const GridDims&) const = default;
};

inline std::int64_t flatten(const GridDims& d, std::int64_t x, std::int64_t y,
                            std::int64_t z) {
  return x + d.nx * (y + d.ny * z);
}

inline std::array<std::int64_t, 3> unflatten(const GridDims& d, std::int64_t idx) {
  const std::int64_t x = idx % d.nx;
  const std::int64_t y = (idx / d.nx) % d.ny;
  const std::int64_t z = idx / (d.nx * d.ny);
  return {x, y, z};
}

struct EffectsTable {
  GridDims dims;
  std::vector<std::int64_t> voxel_index;  // in-mask voxels, strictly increasing
  int n_subjects = 0;
  std::vector<double> effects;  // row-major, n_voxels x n_subjects

  std::size_t n_voxels() const { return voxel_index.size(); }

  std::span<const double> row(std::size_t v) const {
    return {effects.data() + v * static_cast<std::size_t>(n_subjects),
            static_cast<std::size_t>(n_subjects)};
  }

  // Throws InvariantViolation unless indices are strictly increasing and in
  // range, the effects matrix has the right shape, and all values are finite.
  void validate() const;
};

// A real-valued map over the in-mask voxels of a grid.
struct MaskedMap {
  GridDims dims;
  std::vector<std::int64_t> voxel_index;
  std::vector<double> values;
};

}  // namespace prevmap
