#pragma once

// Voxel-wise maximum-likelihood fitting of the three-component mixture:
// multi-start EM seeded from a (p1, p2) moment-equation grid, followed by
// the prevalence estimability constraint that zeroes p3 where the active
// sub-group is indistinguishable from the inactive one.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "prevmap/mixture.hpp"

namespace prevmap {

struct EmOptions {
  int max_iter = 500;
  // Stop when the log-likelihood changes by at most rel_tol per observation.
  double rel_tol = 1e-8;
  // Variance floor as a fraction of the sample variance.
  double var_floor_frac = 1e-8;
  // Spacing of the (p1, p2) initialization grid; must divide 1 evenly.
  double grid_step = 0.05;
  // Number of highest-likelihood moment candidates kept as EM starts.
  int top_k_starts = 5;
  std::uint64_t seed = 0;

  void validate() const;  // throws Error on a malformed configuration
};

struct VoxelFit {
  MixtureParams params;
  double loglik = 0.0;
  bool converged = false;
  int n_iter = 0;
  int n_starts_tried = 0;
  bool thresholded = false;      // true if the prevalence constraint zeroed p3
  double threshold_value = 0.0;  // the estimability bound that was applied
};

// Solves the four moment equations for (mu, var1, var2, var3) given the two
// null weights, from the raw sample moments m[0..3] = (m1, m2, m3, m4).
// Returns nullopt when the grid point is infeasible: p3 <= 0, |mu| < 1e-10,
// var3 <= 0, no real quadratic root, or no root with both variances
// positive. When both quadratic roots are admissible the one with the higher
// likelihood on `data` wins (with empty data, the larger-var2 root).
std::optional<MixtureParams> solve_moments_given_weights(
    double p1, double p2, const std::array<double, 4>& m,
    std::span<const double> data = {});

// Evaluates the moment solver over the (p1, p2) grid and returns the
// top_k_starts feasible candidates by likelihood, or the documented fallback
// start when the whole grid is infeasible. The returned list is never empty.
// Throws DataTooShort for fewer than 8 observations.
std::vector<MixtureParams> moment_init_grid(std::span<const double> data,
                                            const EmOptions& opts);

// Plain EM from one start; the prevalence constraint is not applied. The
// null components keep mean zero; labels are swapped after each iteration to
// maintain var1 <= var2, and variances are clamped to the floor. If `trace`
// is non-null the per-iteration log-likelihood sequence is appended to it.
VoxelFit em_fit(std::span<const double> data, const MixtureParams& init,
                const EmOptions& opts, std::vector<double>* trace = nullptr);

// Two-component zero-mean scale-mixture EM (the p3 == 0 restriction of the
// model). The returned params have p3 = 0, mu = 0 and var3 = var2.
VoxelFit em_fit_null_pair(std::span<const double> data, double p1, double var1,
                          double var2, const EmOptions& opts);

// exp(-mu^2 / (2 (p1 var1 + p2 var2))): prevalence estimates below this
// bound are inestimable and get zeroed. A zero denominator yields 0 for
// mu != 0 and 1 for mu == 0.
double donoho_threshold(const MixtureParams& params);

// Applies the estimability bound and, when it fires, replaces the fit with
// the two-component null refit (p3 = 0, mu = 0). The bound uses the
// unconstrained shift estimate but takes its null variance from the refit,
// whose scale is not deflated by a spurious active component.
VoxelFit apply_prevalence_constraint(VoxelFit fit, std::span<const double> data,
                                     const EmOptions& opts);

namespace detail {
double donoho_threshold_at(double mu, double weighted_null_var);
}  // namespace detail

// Grid initialization, multi-start EM, best-likelihood selection. No
// prevalence constraint; used directly by goodness-of-fit comparisons.
// Solutions with a variance pinned to the floor are one-point singularities,
// not population estimates; the best interior solution wins instead as long
// as it still dominates every initialization candidate.
VoxelFit fit_voxel_unconstrained(std::span<const double> data,
                                 const EmOptions& opts);

// The full per-voxel estimate: fit_voxel_unconstrained followed by the
// prevalence constraint. Deterministic for fixed (data, opts); permuting
// data leaves the result bit-identical.
VoxelFit fit_voxel(std::span<const double> data, const EmOptions& opts);

}  // namespace prevmap
