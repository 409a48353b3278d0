#include "prevmap/effects.hpp"

#include <cmath>
#include <string>

#include "prevmap/errors.hpp"

namespace prevmap {

void EffectsTable::validate() const {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) {
    throw InvariantViolation("EffectsTable: non-positive grid dimension");
  }
  if (n_subjects <= 0) {
    throw InvariantViolation("EffectsTable: non-positive subject count");
  }
  const std::int64_t total = dims.size();
  std::int64_t prev = -1;
  for (std::int64_t idx : voxel_index) {
    if (idx < 0 || idx >= total) {
      throw InvariantViolation("EffectsTable: voxel index " + std::to_string(idx) +
                               " outside grid of size " + std::to_string(total));
    }
    if (idx <= prev) {
      throw InvariantViolation("EffectsTable: voxel indices not strictly increasing at " +
                               std::to_string(idx));
    }
    prev = idx;
  }
  if (effects.size() != voxel_index.size() * static_cast<std::size_t>(n_subjects)) {
    throw InvariantViolation("EffectsTable: effects matrix shape mismatch");
  }
  for (double e : effects) {
    if (!std::isfinite(e)) {
      throw InvariantViolation("EffectsTable: non-finite effect value");
    }
  }
}

}  // namespace prevmap
