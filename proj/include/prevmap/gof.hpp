#pragma once

// Held-out goodness-of-fit comparison: candidate effect distributions are
// fitted per voxel on a training half of the subjects and scored with the
// Kolmogorov-Smirnov statistic on the held-out half.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prevmap/effects.hpp"
#include "prevmap/em.hpp"

namespace prevmap {

enum class CandidateFamily {
  gaussian,
  laplace,
  cauchy,
  logistic,
  gaussian_scale_mixture_2,
  gaussian_mixture_3,
};

std::string family_name(CandidateFamily family);
std::optional<CandidateFamily> family_from_name(const std::string& name);
std::vector<CandidateFamily> all_families();

using CdfFn = std::function<double(double)>;

// Fits one family and returns its CDF evaluator. Location-scale families use
// closed-form estimators; the mixtures use the zero-mean pair EM and the
// unconstrained three-component fit. Throws DataTooShort below 8 points and
// ZeroVariance when a scale family sees constant data.
CdfFn fit_candidate(CandidateFamily family, std::span<const double> data,
                    const EmOptions& em_opts = {});

// D = max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n) over the sorted sample.
double ks_statistic(std::span<const double> data, const CdfFn& cdf);

struct FamilySummary {
  CandidateFamily family{};
  std::size_t n_voxels_ok = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;  // smallest value >= q1 - 1.5 IQR
  double whisker_hi = 0.0;  // largest value <= q3 + 1.5 IQR
};

struct GofTable {
  std::vector<CandidateFamily> families;
  // ks[v][f] for voxel v, family f; NaN marks a voxel whose fit failed.
  std::vector<std::vector<double>> ks;
  std::vector<FamilySummary> summaries;
  std::vector<int> train_subjects;
  std::vector<int> test_subjects;
};

// Splits subjects 50/50 at random (seeded), fits every family on the train
// half of each voxel and scores on the test half. Per-voxel fit failures
// become NaN entries rather than aborting the volume. Requires at least 16
// subjects.
GofTable gof_compare(const EffectsTable& effects,
                     const std::vector<CandidateFamily>& families,
                     std::uint64_t split_seed, const EmOptions& em_opts = {},
                     int workers = 1);

}  // namespace prevmap
