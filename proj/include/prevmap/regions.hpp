#pragma once

// Activation-region metrics: top-fraction map thresholding, face-connected
// component labeling, bounding-box complexity ratios, and split-half
// stability of the thresholded maps.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prevmap/effects.hpp"
#include "prevmap/em.hpp"

namespace prevmap {

struct Region {
  std::vector<std::int64_t> voxels;  // ascending linear indices
  std::array<std::int64_t, 3> box_min{0, 0, 0};
  std::array<std::int64_t, 3> box_max{0, 0, 0};

  std::int64_t size() const { return static_cast<std::int64_t>(voxels.size()); }
};

// Marks active the ceil(active_fraction * m) in-mask voxels with the largest
// map values; ties are broken toward the lower linear index. Returns a 0/1
// volume over the whole grid.
std::vector<std::uint8_t> threshold_map(const MaskedMap& map,
                                        double active_fraction);

// Connected components under face connectivity (4-neighbor in 2D,
// 6-neighbor in 3D), sorted by size descending then lowest index.
std::vector<Region> label_components(const std::vector<std::uint8_t>& mask,
                                     const GridDims& dims);

// Region size divided by the volume of its axis-aligned bounding box.
double complexity_ratio(const Region& region);

struct RegionSummary {
  std::size_t n_regions = 0;
  std::size_t n_singletons = 0;
  // Median complexity ratio excluding singletons; empty when every region is
  // a singleton (or the mask is empty).
  std::optional<double> median_complexity;
};

RegionSummary region_summary(const std::vector<std::uint8_t>& mask,
                             const GridDims& dims);

// 2|A & B| / (|A| + |B|); 1 when both masks are empty.
double dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b);

enum class MapStatistic { t, prevalence };

// Per-voxel map of the chosen statistic over a subject subset: the t value,
// or the constrained prevalence estimate p3.
std::vector<double> statistic_map(const EffectsTable& effects,
                                  std::span<const int> subjects,
                                  MapStatistic statistic, const EmOptions& opts,
                                  int workers = 1);

// For each split, subjects are partitioned 50/50 at random; the statistic's
// map is computed on each half, both are thresholded at active_fraction, and
// the Dice coefficient of the two masks is recorded. Requires an even
// subject count of at least 16.
std::vector<double> split_half_agreement(const EffectsTable& effects,
                                         MapStatistic statistic,
                                         double active_fraction, int n_splits,
                                         std::uint64_t seed,
                                         const EmOptions& em_opts,
                                         int workers = 1);

}  // namespace prevmap
