#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "prevmap/efficiency.hpp"
#include "prevmap/errors.hpp"
#include "prevmap/inference.hpp"
#include "prevmap/rng.hpp"
#include "prevmap/stats.hpp"

using namespace prevmap;

namespace {

double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

std::vector<double> draw_path(const NuisanceSpec& s, double p, int n, KeyedRng& rng) {
  std::vector<double> x(static_cast<std::size_t>(n));
  for (double& v : x) {
    if (rng.next_unit() < p) {
      v = rng.next_normal(s.active_mu, std::sqrt(s.active_var));
    } else {
      v = rng.next_normal(
          0.0, std::sqrt(rng.next_unit() < s.null_w1 ? s.null_var1 : s.null_var2));
    }
  }
  return x;
}

struct McMean {
  double mean;
  double var;  // of a single replication
};

// Mean of the signed-rank statistic over reps replications at prevalence p.
McMean signed_rank_mean(const NuisanceSpec& s, double p, int n, int reps,
                        KeyedRng& rng) {
  double sum = 0.0, sumsq = 0.0;
  for (int r = 0; r < reps; ++r) {
    const std::vector<double> x = draw_path(s, p, n, rng);
    const double w = signed_rank_test(x).statistic;
    sum += w;
    sumsq += w * w;
  }
  const double mean = sum / reps;
  return {mean, sumsq / reps - mean * mean};
}

// E[W+] is an exact quadratic in p, so the 3-point formula
// -3 E(0) + 4 E(1/2) - E(1) recovers the slope at p = 0 without bias.
void check_signed_rank_efficacy_mc(const NuisanceSpec& s, int n, int reps,
                                   KeyedRng& rng) {
  const McMean e0 = signed_rank_mean(s, 0.0, n, reps, rng);
  const McMean eh = signed_rank_mean(s, 0.5, n, reps, rng);
  const McMean e1 = signed_rank_mean(s, 1.0, n, reps, rng);
  const double slope = -3.0 * e0.mean + 4.0 * eh.mean - e1.mean;
  const double nn = static_cast<double>(n);
  const double sd0 = std::sqrt(nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0);
  const double c_hat = slope / (std::sqrt(nn) * sd0);
  const double se = std::sqrt(9.0 * e0.var + 16.0 * eh.var + e1.var) /
                    std::sqrt(static_cast<double>(reps)) / (std::sqrt(nn) * sd0);
  // Small extra slack for the finite-n constant in the U-statistic scaling.
  CHECK(std::fabs(c_hat - efficacy_signed_rank(s)) <= 3.0 * se + 0.015);
}

}  // namespace

TEST_CASE("t efficacy: closed forms") {
  NuisanceSpec s{1.0, 0.0, 1.0, 1.0, 0.0, 1.0};
  CHECK(efficacy_t(s) == 0.0);
  s.active_mu = 2.0;
  CHECK(efficacy_t(s) == 2.0);
  const NuisanceSpec fig1{0.88, 0.12, 0.15, 1.0, 1.0, 0.25};
  CHECK(efficacy_t(fig1) == doctest::Approx(1.0 / std::sqrt(0.252)).epsilon(1e-12));
}

TEST_CASE("t efficacy matches the Monte Carlo slope of the standardized mean") {
  // E[mean] is exactly linear in p, so a two-point slope is unbiased.
  const NuisanceSpec s{0.88, 0.12, 0.15, 1.0, 1.0, 0.25};
  KeyedRng rng(61);
  const int n = 400, reps = 3000;
  double sum0 = 0.0, sum1 = 0.0, sq0 = 0.0, sq1 = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double m0 = stats::mean(draw_path(s, 0.0, n, rng));
    const double m1 = stats::mean(draw_path(s, 1.0, n, rng));
    sum0 += m0; sq0 += m0 * m0;
    sum1 += m1; sq1 += m1 * m1;
  }
  const double sigma0 = std::sqrt(s.null_w1 * s.null_var1 + s.null_w2 * s.null_var2);
  const double c_hat = (sum1 / reps - sum0 / reps) / sigma0;
  const double v0 = sq0 / reps - (sum0 / reps) * (sum0 / reps);
  const double v1 = sq1 / reps - (sum1 / reps) * (sum1 / reps);
  const double se = std::sqrt((v0 + v1) / reps) / sigma0;
  CHECK(std::fabs(c_hat - efficacy_t(s)) <= 3.0 * se);
}

TEST_CASE("signed-rank efficacy: Gaussian closed form as quadrature oracle") {
  for (double mu : {0.3, 1.0, 2.0}) {
    const NuisanceSpec s{1.0, 0.0, 1.0, 1.0, mu, 1.0};
    const double closed = 2.0 * std::sqrt(3.0) * (phi(mu / std::numbers::sqrt2) - 0.5);
    CHECK(efficacy_signed_rank(s) == doctest::Approx(closed).epsilon(1e-7));
  }
  // General scale-mixture null: the convolution identity gives
  // int f2 F1 = w1 Phi(mu/sqrt(v1+v3)) + w2 Phi(mu/sqrt(v2+v3)).
  const NuisanceSpec fig1{0.88, 0.12, 0.15, 1.0, 1.0, 0.25};
  const double overlap = 0.88 * phi(1.0 / std::sqrt(0.4)) + 0.12 * phi(1.0 / std::sqrt(1.25));
  CHECK(efficacy_signed_rank(fig1) ==
        doctest::Approx(2.0 * std::sqrt(3.0) * (overlap - 0.5)).epsilon(1e-7));
}

TEST_CASE("signed-rank efficacy vanishes when the active group is the null") {
  const NuisanceSpec s{1.0, 0.0, 1.0, 1.0, 0.0, 1.0};
  CHECK(std::fabs(efficacy_signed_rank(s)) <= 1e-7);
}

TEST_CASE("signed-rank efficacy matches its Monte Carlo slope") {
  const NuisanceSpec fig1{0.88, 0.12, 0.15, 1.0, 1.0, 0.25};
  KeyedRng rng(67);
  check_signed_rank_efficacy_mc(fig1, 500, 500, rng);
}

TEST_CASE("quadrature vs Monte Carlo cross-validation on randomized specs") {
  KeyedRng rng(71);
  for (int rep = 0; rep < 10; ++rep) {
    const double w1 = 0.5 + 0.5 * rng.next_unit();
    NuisanceSpec s;
    s.null_w1 = w1;
    s.null_w2 = 1.0 - w1;
    s.null_var1 = 0.05 + 0.5 * rng.next_unit();
    s.null_var2 = s.null_var1 + 2.0 * rng.next_unit();
    s.active_mu = 0.3 + 1.5 * rng.next_unit();
    s.active_var = 0.1 + rng.next_unit();
    check_signed_rank_efficacy_mc(s, 300, 300, rng);
  }
}

TEST_CASE("relative efficiency: classical limit and degenerate cases") {
  // Pure Gaussian null, vanishing shift: the classical 3/pi limit.
  for (const auto& [mu, tol] : std::vector<std::pair<double, double>>{
           {0.1, 0.01}, {0.01, 1e-3}}) {
    const NuisanceSpec s{1.0, 0.0, 1.0, 1.0, mu, 1.0};
    CHECK(std::fabs(pitman_are(s) - 3.0 / std::numbers::pi) <= tol);
  }

  const NuisanceSpec fig1{0.88, 0.12, 0.15, 1.0, 1.0, 0.25};
  CHECK(pitman_are(fig1) < 1.0);

  const NuisanceSpec zero{0.88, 0.12, 0.15, 1.0, 0.0, 0.25};
  CHECK(pitman_are(zero) == 0.0);

  NuisanceSpec bad = fig1;
  bad.null_w1 = 0.7;  // weights no longer sum to one
  CHECK_THROWS_AS(pitman_are(bad), Error);
}

TEST_CASE("efficacies and ARE are invariant to common rescaling") {
  const NuisanceSpec base{0.88, 0.12, 0.15, 1.0, 1.0, 0.25};
  const double c = 2.9;
  const NuisanceSpec scaled{0.88, 0.12, 0.15 * c * c, 1.0 * c * c, 1.0 * c,
                            0.25 * c * c};
  CHECK(efficacy_t(scaled) == doctest::Approx(efficacy_t(base)).epsilon(1e-12));
  CHECK(efficacy_signed_rank(scaled) ==
        doctest::Approx(efficacy_signed_rank(base)).epsilon(1e-7));
  CHECK(pitman_are(scaled) == doctest::Approx(pitman_are(base)).epsilon(1e-7));
}

TEST_CASE("power curve: size at p = 0, monotone growth, determinism") {
  const NuisanceSpec fig1{0.88, 0.12, 0.15, 1.0, 1.0, 0.25};
  const std::vector<double> grid{0.0, 0.15, 0.3, 0.6};
  const std::vector<PowerRow> rows = power_curve_mc(fig1, 64, grid, 0.05, 2000, 5, 2);
  REQUIRE(rows.size() == 4);

  // Size: both tests within 3 binomial SEs of the nominal level.
  const double se0 = std::sqrt(0.05 * 0.95 / 2000.0);
  CHECK(std::fabs(rows[0].power_t - 0.05) <= 3.0 * se0);
  CHECK(std::fabs(rows[0].power_wilcoxon - 0.05) <= 3.0 * se0);

  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].power_t >=
          rows[i - 1].power_t - 3.0 * (rows[i].se_t + rows[i - 1].se_t));
    CHECK(rows[i].power_wilcoxon >=
          rows[i - 1].power_wilcoxon -
              3.0 * (rows[i].se_wilcoxon + rows[i - 1].se_wilcoxon));
  }
  CHECK(rows[3].power_t > 0.9);

  // Same seed, different worker count: identical output.
  const std::vector<PowerRow> again = power_curve_mc(fig1, 64, grid, 0.05, 2000, 5, 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].power_t == again[i].power_t);
    CHECK(rows[i].power_wilcoxon == again[i].power_wilcoxon);
  }
}
