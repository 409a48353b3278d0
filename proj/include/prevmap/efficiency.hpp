#pragma once

// Pitman efficacies of the one-sample t and Wilcoxon signed-rank tests under
// the local prevalence path (1-p) * null + p * active as p -> 0, their
// asymptotic relative efficiency, and Monte Carlo power curves.

#include <cstdint>
#include <span>
#include <vector>

namespace prevmap {

struct NuisanceSpec {
  double null_w1 = 1.0;  // weights of the two null scale components
  double null_w2 = 0.0;
  double null_var1 = 1.0;
  double null_var2 = 1.0;
  double active_mu = 1.0;
  double active_var = 1.0;

  void validate() const;
};

// Slope of the standardized mean under the prevalence path:
// mu / sqrt(w1 var1 + w2 var2).
double efficacy_t(const NuisanceSpec& spec);

// 2 (int f_active F_null - 1/2) / sqrt(1/3), with the integral evaluated by
// adaptive quadrature to absolute tolerance 1e-8. Throws QuadratureFailure
// if the tolerance is unreachable.
double efficacy_signed_rank(const NuisanceSpec& spec);

// Squared efficacy ratio of the signed-rank test relative to the t test
// under the prevalence path. Approaches the classical 3/pi at a pure
// Gaussian null as mu -> 0; returns 0 for mu == 0 (no discriminating
// direction), and throws DegenerateAlternative if the signed-rank efficacy
// vanishes for a non-degenerate shift.
double pitman_are(const NuisanceSpec& spec);

struct PowerRow {
  double p = 0.0;
  double power_t = 0.0;
  double se_t = 0.0;
  double power_wilcoxon = 0.0;
  double se_wilcoxon = 0.0;
};

// Simulates n effects per replication under each prevalence in p_grid,
// applies both two-sided tests at level alpha, and reports rejection rates
// with binomial standard errors. Deterministic per seed; replications run on
// independent keyed streams.
std::vector<PowerRow> power_curve_mc(const NuisanceSpec& spec, int n,
                                     std::span<const double> p_grid,
                                     double alpha, int reps, std::uint64_t seed,
                                     int workers = 1);

}  // namespace prevmap
