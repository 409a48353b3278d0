#pragma once

// Per-voxel hypothesis tests (Wilcoxon signed-rank and one-sample t),
// Benjamini-Hochberg FDR adjustment across voxels, and assembly of the
// masked signed-prevalence map.

#include <cstdint>
#include <span>
#include <vector>

#include "prevmap/em.hpp"

namespace prevmap {

enum class TestMethod { signed_rank_exact, signed_rank_normal, t };

struct TestResult {
  double statistic = 0.0;  // W+ for signed-rank, t for the t-test
  double p_value = 1.0;    // two-sided
  TestMethod method = TestMethod::t;
  int n_effective = 0;     // observations left after zero-dropping
};

// Two-sided signed-rank test of symmetry about zero. Exact zeros are
// dropped; ties in |x| get midranks. Exact p by full sign enumeration for
// n_effective <= 20, else a normal approximation with tie-corrected variance
// and continuity correction 1/2. Throws TooFewNonzero below 5 nonzero values.
TestResult signed_rank_test(std::span<const double> data);

// Two-sided one-sample t against mean zero, df = n - 1.
// Throws DataTooShort for n < 2 and ZeroVariance on constant data.
TestResult t_test(std::span<const double> data);

struct FdrOutcome {
  std::vector<double> q_values;
  std::vector<std::uint8_t> reject;
  double q_level = 0.1;
};

// Benjamini-Hochberg step-up: q-values are the monotone-enforced adjusted
// p-values, and reject[i] holds exactly when q_values[i] <= q_level.
FdrOutcome bh_adjust(std::span<const double> p_values, double q_level);

// p3 * sign(mu) where the voxel is rejected, 0 elsewhere. Thresholded fits
// carry p3 = 0 and therefore always map to 0.
std::vector<double> signed_prevalence_map(const std::vector<VoxelFit>& fits,
                                          const FdrOutcome& fdr);

namespace detail {
// Midranks of |x|; exposed so each p-value path can be tested directly.
struct RankedData {
  std::vector<double> ranks;      // midranks of |x|, aligned with values
  std::vector<double> values;     // the nonzero data
  double w_plus = 0.0;            // sum of ranks of positive values
  double tie_correction = 0.0;    // sum of (t^3 - t) over tie groups
};
RankedData rank_absolute(std::span<const double> data);

double signed_rank_exact_p(const RankedData& r);
double signed_rank_normal_p(const RankedData& r);
}  // namespace detail

}  // namespace prevmap
