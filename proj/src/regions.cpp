#include "prevmap/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prevmap/errors.hpp"
#include "prevmap/inference.hpp"
#include "prevmap/parallel.hpp"
#include "prevmap/rng.hpp"
#include "prevmap/stats.hpp"

namespace prevmap {

std::vector<std::uint8_t> threshold_map(const MaskedMap& map,
                                        double active_fraction) {
  if (!(active_fraction > 0.0) || !(active_fraction <= 1.0)) {
    throw Error("threshold_map: active_fraction must lie in (0,1]");
  }
  if (map.voxel_index.size() != map.values.size()) {
    throw LengthMismatch("threshold_map: index/value lengths differ");
  }
  const std::size_t m = map.voxel_index.size();
  const auto k = static_cast<std::size_t>(
      std::ceil(active_fraction * static_cast<double>(m)));

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (map.values[a] != map.values[b]) return map.values[a] > map.values[b];
    return map.voxel_index[a] < map.voxel_index[b];
  });

  std::vector<std::uint8_t> mask(static_cast<std::size_t>(map.dims.size()), 0);
  for (std::size_t i = 0; i < k && i < m; ++i) {
    mask[static_cast<std::size_t>(map.voxel_index[order[i]])] = 1;
  }
  return mask;
}

std::vector<Region> label_components(const std::vector<std::uint8_t>& mask,
                                     const GridDims& dims) {
  if (mask.size() != static_cast<std::size_t>(dims.size())) {
    throw DimensionMismatch("label_components: mask size does not match grid");
  }
  std::vector<std::uint8_t> seen(mask.size(), 0);
  std::vector<Region> regions;
  std::vector<std::int64_t> stack;
  for (std::size_t start = 0; start < mask.size(); ++start) {
    if (!mask[start] || seen[start]) continue;
    Region region;
    stack.push_back(static_cast<std::int64_t>(start));
    seen[start] = 1;
    while (!stack.empty()) {
      const std::int64_t idx = stack.back();
      stack.pop_back();
      region.voxels.push_back(idx);
      const auto [x, y, z] = unflatten(dims, idx);
      const std::int64_t coords[3] = {x, y, z};
      const std::int64_t extents[3] = {dims.nx, dims.ny, dims.nz};
      const std::int64_t strides[3] = {1, dims.nx, dims.nx * dims.ny};
      for (int d = 0; d < 3; ++d) {
        for (int step : {-1, 1}) {
          const std::int64_t c = coords[d] + step;
          if (c < 0 || c >= extents[d]) continue;
          const std::int64_t nb = idx + step * strides[d];
          if (mask[static_cast<std::size_t>(nb)] && !seen[static_cast<std::size_t>(nb)]) {
            seen[static_cast<std::size_t>(nb)] = 1;
            stack.push_back(nb);
          }
        }
      }
    }
    std::sort(region.voxels.begin(), region.voxels.end());
    region.box_min = {dims.nx, dims.ny, dims.nz};
    region.box_max = {-1, -1, -1};
    for (std::int64_t v : region.voxels) {
      const auto c = unflatten(dims, v);
      for (int d = 0; d < 3; ++d) {
        region.box_min[d] = std::min(region.box_min[d], c[d]);
        region.box_max[d] = std::max(region.box_max[d], c[d]);
      }
    }
    regions.push_back(std::move(region));
  }
  std::sort(regions.begin(), regions.end(), [](const Region& a, const Region& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.voxels.front() < b.voxels.front();
  });
  return regions;
}

double complexity_ratio(const Region& region) {
  if (region.voxels.empty()) throw Error("complexity_ratio: empty region");
  double box = 1.0;
  for (int d = 0; d < 3; ++d) {
    box *= static_cast<double>(region.box_max[d] - region.box_min[d] + 1);
  }
  return static_cast<double>(region.size()) / box;
}

RegionSummary region_summary(const std::vector<std::uint8_t>& mask,
                             const GridDims& dims) {
  const std::vector<Region> regions = label_components(mask, dims);
  RegionSummary summary;
  summary.n_regions = regions.size();
  std::vector<double> ratios;
  for (const Region& r : regions) {
    if (r.size() == 1) {
      ++summary.n_singletons;
    } else {
      ratios.push_back(complexity_ratio(r));
    }
  }
  if (!ratios.empty()) {
    std::sort(ratios.begin(), ratios.end());
    summary.median_complexity = stats::quantile_type7(ratios, 0.5);
  }
  return summary;
}

double dice(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  if (a.size() != b.size()) throw LengthMismatch("dice: mask sizes differ");
  std::size_t na = 0, nb = 0, nab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]) ++na;
    if (b[i]) ++nb;
    if (a[i] && b[i]) ++nab;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(nab) / static_cast<double>(na + nb);
}

std::vector<double> statistic_map(const EffectsTable& effects,
                                  std::span<const int> subjects,
                                  MapStatistic statistic, const EmOptions& opts,
                                  int workers) {
  const std::size_t m = effects.n_voxels();
  std::vector<double> map(m, 0.0);
  parallel_for(m, workers, [&](std::size_t v) {
    const std::span<const double> row = effects.row(v);
    std::vector<double> values;
    values.reserve(subjects.size());
    for (int s : subjects) values.push_back(row[static_cast<std::size_t>(s)]);
    if (statistic == MapStatistic::t) {
      map[v] = t_test(values).statistic;
    } else {
      map[v] = fit_voxel(values, opts).params.p3();
    }
  });
  return map;
}

std::vector<double> split_half_agreement(const EffectsTable& effects,
                                         MapStatistic statistic,
                                         double active_fraction, int n_splits,
                                         std::uint64_t seed,
                                         const EmOptions& em_opts, int workers) {
  const int n = effects.n_subjects;
  if (n < 16 || n % 2 != 0) {
    throw DataTooShort("split_half_agreement: need an even subject count >= 16");
  }
  if (n_splits < 1) throw Error("split_half_agreement: need at least one split");

  std::vector<double> agreement;
  agreement.reserve(static_cast<std::size_t>(n_splits));
  for (int split = 0; split < n_splits; ++split) {
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    KeyedRng rng(seed, StreamTag::subject_split, static_cast<std::uint64_t>(split));
    keyed_shuffle(perm, rng);
    const std::span<const int> half_a(perm.data(), perm.size() / 2);
    const std::span<const int> half_b(perm.data() + perm.size() / 2,
                                      perm.size() / 2);
    MaskedMap map_a{effects.dims, effects.voxel_index,
                    statistic_map(effects, half_a, statistic, em_opts, workers)};
    MaskedMap map_b{effects.dims, effects.voxel_index,
                    statistic_map(effects, half_b, statistic, em_opts, workers)};
    agreement.push_back(dice(threshold_map(map_a, active_fraction),
                             threshold_map(map_b, active_fraction)));
  }
  return agreement;
}

}  // namespace prevmap
