#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "prevmap/errors.hpp"
#include "prevmap/gof.hpp"
#include "prevmap/rng.hpp"
#include "prevmap/simulate.hpp"
#include "prevmap/stats.hpp"

using namespace prevmap;

namespace {

double phi_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Independent O(n^2) evaluation of the KS statistic: for every sample point,
// count the empirical mass by brute force on both sides of the jump.
double ks_brute_force(const std::vector<double>& data, const CdfFn& cdf) {
  const double n = static_cast<double>(data.size());
  double d = 0.0;
  for (double x : data) {
    double le = 0.0, lt = 0.0;
    for (double y : data) {
      if (y <= x) le += 1.0;
      if (y < x) lt += 1.0;
    }
    const double f = cdf(x);
    d = std::max(d, std::max(le / n - f, f - lt / n));
  }
  return d;
}

}  // namespace

TEST_CASE("family names round-trip") {
  for (CandidateFamily f : all_families()) {
    CHECK(family_from_name(family_name(f)) == f);
  }
  CHECK(!family_from_name("weibull").has_value());
}

TEST_CASE("gaussian fit: sample mean and unbiased variance") {
  const std::vector<double> data{-1, 1, -1, 1, -1, 1, -1, 1};
  // mean 0, unbiased variance 8/7
  const CdfFn cdf = fit_candidate(CandidateFamily::gaussian, data);
  CHECK(cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cdf(2.0) == doctest::Approx(phi_cdf(2.0 / std::sqrt(8.0 / 7.0))).epsilon(1e-12));
}

TEST_CASE("laplace fit: median location and mean absolute deviation scale") {
  const std::vector<double> data{-2, 0, 2, -2, 0, 2, -2, 2};
  // median 0 between -2...: sorted {-2,-2,-2,0,0,2,2,2}: type-7 median = 0
  // scale = mean |x| = (2+0+2+2+0+2+2+2)/8 = 1.5
  const CdfFn cdf = fit_candidate(CandidateFamily::laplace, data);
  CHECK(cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cdf(2.0) == doctest::Approx(1.0 - 0.5 * std::exp(-2.0 / 1.5)).epsilon(1e-12));
  CHECK(cdf(-2.0) == doctest::Approx(0.5 * std::exp(-2.0 / 1.5)).epsilon(1e-12));
}

TEST_CASE("logistic fit: moment inversion gives unit scale at var = pi^2/3") {
  // Symmetric 8-point set scaled so the unbiased sample variance is pi^2/3.
  const double t = std::sqrt(std::numbers::pi * std::numbers::pi / 3.0 * 7.0 / 60.0);
  std::vector<double> data;
  for (double v : {-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0}) data.push_back(t * v);
  const CdfFn cdf = fit_candidate(CandidateFamily::logistic, data);
  // scale == 1 means F(2) = 1/(1+e^-2)
  CHECK(cdf(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-9));
}

TEST_CASE("cauchy fit: median location, half-IQR scale") {
  const std::vector<double> data{-3, -1, -0.5, -0.25, 0.25, 0.5, 1, 3};
  const CdfFn cdf = fit_candidate(CandidateFamily::cauchy, data);
  CHECK(cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cdf(0.625) == doctest::Approx(0.75).epsilon(1e-12));  // loc + scale
}

TEST_CASE("scale families reject constant data; all reject short data") {
  const std::vector<double> flat(10, 2.5);
  for (CandidateFamily f : {CandidateFamily::gaussian, CandidateFamily::laplace,
                            CandidateFamily::cauchy, CandidateFamily::logistic,
                            CandidateFamily::gaussian_scale_mixture_2}) {
    CHECK_THROWS_AS(fit_candidate(f, flat), ZeroVariance);
  }
  const std::vector<double> short_data{1, 2, 3, 4, 5, 6, 7};
  for (CandidateFamily f : all_families()) {
    CHECK_THROWS_AS(fit_candidate(f, short_data), DataTooShort);
  }
}

TEST_CASE("zero-mean scale mixture fit is symmetric about zero") {
  KeyedRng rng(5);
  std::vector<double> data(400);
  for (double& v : data) {
    v = rng.next_normal(0.0, rng.next_unit() < 0.8 ? 0.4 : 2.0);
  }
  const CdfFn cdf = fit_candidate(CandidateFamily::gaussian_scale_mixture_2, data);
  CHECK(cdf(0.0) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(cdf(1.0) + cdf(-1.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("KS statistic on singletons and exact quantile grids") {
  const std::vector<double> zero{0.0};
  CHECK(ks_statistic(zero, [](double x) { return phi_cdf(x); }) ==
        doctest::Approx(0.5).epsilon(1e-12));

  // Points at the (i - 1/2)/n quantiles of a logistic leave D = 1/(2n).
  const CdfFn logistic = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  const std::size_t n = 10;
  std::vector<double> grid;
  for (std::size_t i = 1; i <= n; ++i) {
    const double q = (static_cast<double>(i) - 0.5) / static_cast<double>(n);
    grid.push_back(std::log(q / (1.0 - q)));
  }
  CHECK(ks_statistic(grid, logistic) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("KS statistic matches a brute-force oracle") {
  KeyedRng rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> data(8 + rng.next_below(40));
    for (double& v : data) v = rng.next_normal(0.2, 1.3);
    const CdfFn cdf = fit_candidate(CandidateFamily::gaussian, data);
    CHECK(ks_statistic(data, cdf) ==
          doctest::Approx(ks_brute_force(data, cdf)).epsilon(1e-12));
  }
}

TEST_CASE("held-out KS shrinks as the test sample grows") {
  const CdfFn cdf = [](double x) { return phi_cdf(x); };
  KeyedRng rng(13);
  std::vector<double> medians;
  for (std::size_t n : {100, 400, 1600}) {
    std::vector<double> ds;
    for (int rep = 0; rep < 21; ++rep) {
      std::vector<double> data(n);
      for (double& v : data) v = rng.next_normal();
      ds.push_back(ks_statistic(data, cdf));
    }
    medians.push_back(stats::median(ds));
  }
  CHECK(medians[0] > medians[1]);
  CHECK(medians[1] > medians[2]);
  const double ratio = medians[0] / medians[2];  // expect ~ sqrt(16) = 4
  CHECK(ratio > 2.0);
  CHECK(ratio < 8.0);
}

TEST_CASE("gof_compare: split is a partition, runs deterministically") {
  ToySpec spec = fig1_toy_spec(41);
  spec.dims = {6, 5, 1};
  spec.ellipse_axes = {0.0, 0.0, 0.0};
  spec.n_subjects = 24;
  const EffectsTable table = sample_effects(make_toy_population(spec), spec);

  const std::vector<CandidateFamily> families{CandidateFamily::gaussian,
                                              CandidateFamily::laplace};
  const GofTable a = gof_compare(table, families, 77);
  std::vector<int> all = a.train_subjects;
  all.insert(all.end(), a.test_subjects.begin(), a.test_subjects.end());
  std::sort(all.begin(), all.end());
  for (int s = 0; s < 24; ++s) CHECK(all[static_cast<std::size_t>(s)] == s);
  CHECK(a.train_subjects.size() == 12);

  const GofTable b = gof_compare(table, families, 77);
  CHECK(a.ks == b.ks);

  EffectsTable small = table;
  small.n_subjects = 15;
  small.effects.resize(small.n_voxels() * 15);
  CHECK_THROWS_AS(gof_compare(small, families, 1), DataTooShort);
}

TEST_CASE("on plain Gaussian data the mixture earns no held-out advantage") {
  ToySpec spec = fig1_toy_spec(43);
  spec.dims = {10, 10, 1};
  spec.ellipse_axes = {0.0, 0.0, 0.0};
  spec.n_subjects = 100;
  // Make the null a single Gaussian by collapsing the two variances.
  spec.null_model = MixtureParams(0.5, 0.5, 0.0, 0.0, 0.5, 0.5, 1.0);
  const EffectsTable table = sample_effects(make_toy_population(spec), spec);
  const GofTable result = gof_compare(
      table, {CandidateFamily::gaussian, CandidateFamily::gaussian_mixture_3}, 7, {}, 2);
  const double gauss_median = result.summaries[0].median;
  const double gmm3_median = result.summaries[1].median;
  CHECK(result.summaries[0].n_voxels_ok == 100);
  CHECK(result.summaries[1].n_voxels_ok == 100);
  CHECK(std::fabs(gauss_median - gmm3_median) <= 0.02);
}
