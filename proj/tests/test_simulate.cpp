#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "prevmap/errors.hpp"
#include "prevmap/simulate.hpp"
#include "prevmap/stats.hpp"

using namespace prevmap;

namespace {

double recompute_prevalence(const ToyPopulation& pop, std::int64_t voxel) {
  std::int64_t count = 0;
  for (int s = 0; s < pop.n_subjects; ++s) count += pop.active(s, voxel);
  return static_cast<double>(count) / static_cast<double>(pop.n_subjects);
}

}  // namespace

TEST_CASE("zero jitter clones one subject; prevalence is exactly 0 or 1") {
  ToySpec spec = fig1_toy_spec(7);
  spec.center_jitter_sd = 0.0;
  spec.axes_jitter_sd = 0.0;
  const ToyPopulation pop = make_toy_population(spec);
  bool saw_active = false;
  for (std::int64_t v = 0; v < spec.dims.size(); ++v) {
    const double p = pop.true_prevalence[static_cast<std::size_t>(v)];
    CHECK((p == 0.0 || p == 1.0));
    if (p == 1.0) saw_active = true;
    CHECK(recompute_prevalence(pop, v) == p);
  }
  CHECK(saw_active);
}

TEST_CASE("default toy prevalence peaks at the center and dies at the edge") {
  const ToySpec spec = fig1_toy_spec(3);
  const ToyPopulation pop = make_toy_population(spec);
  const std::int64_t center =
      flatten(spec.dims, static_cast<std::int64_t>(spec.ellipse_center[0]),
              static_cast<std::int64_t>(spec.ellipse_center[1]), 0);
  CHECK(pop.true_prevalence[static_cast<std::size_t>(center)] == 1.0);
  CHECK(pop.true_prevalence[0] == 0.0);  // far corner
  // The jittered boundary produces genuinely fractional prevalence.
  bool saw_partial = false;
  for (double p : pop.true_prevalence) {
    if (p > 0.0 && p < 1.0) saw_partial = true;
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
  CHECK(saw_partial);
  for (std::int64_t v = 0; v < spec.dims.size(); ++v) {
    CHECK(recompute_prevalence(pop, v) == pop.true_prevalence[static_cast<std::size_t>(v)]);
  }
}

TEST_CASE("identical spec reproduces population and effects bit-exactly") {
  const ToySpec spec = fig1_toy_spec(11);
  const ToyPopulation pop_a = make_toy_population(spec);
  const ToyPopulation pop_b = make_toy_population(spec);
  CHECK(pop_a.activity == pop_b.activity);
  CHECK(pop_a.true_prevalence == pop_b.true_prevalence);
  const EffectsTable ea = sample_effects(pop_a, spec);
  const EffectsTable eb = sample_effects(pop_b, spec);
  CHECK(ea.effects == eb.effects);
}

TEST_CASE("per-(voxel,subject) streams: adding subjects never reshuffles old draws") {
  ToySpec small = fig1_toy_spec(13);
  small.dims = {16, 16, 1};
  small.ellipse_center = {7.5, 7.5, 0.0};
  small.ellipse_axes = {3.0, 2.0, 0.0};
  small.center_jitter_sd = 0.5;
  small.axes_jitter_sd = 0.05;
  small.n_subjects = 10;
  ToySpec big = small;
  big.n_subjects = 20;
  const EffectsTable ea = sample_effects(make_toy_population(small), small);
  const EffectsTable eb = sample_effects(make_toy_population(big), big);
  for (std::size_t v = 0; v < ea.n_voxels(); ++v) {
    for (int s = 0; s < small.n_subjects; ++s) {
      CHECK(ea.row(v)[static_cast<std::size_t>(s)] ==
            eb.row(v)[static_cast<std::size_t>(s)]);
    }
  }
}

TEST_CASE("null draws match the scale mixture's total variance") {
  ToySpec spec = fig1_toy_spec(17);
  spec.dims = {1, 1, 1};
  spec.ellipse_axes = {0.0, 0.0, 0.0};  // pure null
  spec.n_subjects = 100000;
  const EffectsTable t = sample_effects(make_toy_population(spec), spec);
  const double var = stats::sample_variance(t.row(0));
  CHECK(var == doctest::Approx(0.88 * 0.15 + 0.12 * 1.0).epsilon(0.02));
}

TEST_CASE("active draws center on mu = 1, well-specified and misspecified") {
  for (bool misspecified : {false, true}) {
    ToySpec spec = fig1_toy_spec(19, misspecified);
    spec.dims = {1, 1, 1};
    spec.ellipse_axes = {0.5, 0.0, 0.0};  // singleton grid: the voxel is active
    spec.n_subjects = 100000;
    const ToyPopulation pop = make_toy_population(spec);
    REQUIRE(pop.true_prevalence[0] == 1.0);
    const EffectsTable t = sample_effects(pop, spec);
    CHECK(stats::mean(t.row(0)) == doctest::Approx(1.0).epsilon(0.01));
  }
}

TEST_CASE("spec validation: the ellipse must fit after 3-sigma jitter") {
  ToySpec spec = fig1_toy_spec(23);
  spec.ellipse_axes = {40.0, 9.0, 0.0};  // 64-voxel axis cannot hold this
  CHECK_THROWS_AS(make_toy_population(spec), EllipseOutOfBounds);

  ToySpec off_center = fig1_toy_spec(23);
  off_center.ellipse_center = {2.0, 31.5, 0.0};
  CHECK_THROWS_AS(make_toy_population(off_center), EllipseOutOfBounds);

  ToySpec mismatched = fig1_toy_spec(23);
  const ToyPopulation pop = make_toy_population(mismatched);
  mismatched.dims = {32, 32, 1};
  CHECK_THROWS_AS(sample_effects(pop, mismatched), DimensionMismatch);
}

TEST_CASE("zero-jitter disk pipeline recovers prevalence ~1 inside the disk") {
  ToySpec spec = fig1_toy_spec(29);
  spec.dims = {24, 24, 1};
  spec.n_subjects = 100;
  spec.ellipse_center = {11.5, 11.5, 0.0};
  spec.ellipse_axes = {8.0, 5.0, 0.0};
  spec.center_jitter_sd = 0.0;
  spec.axes_jitter_sd = 0.0;
  EmOptions opts;
  const ToyReport report = run_toy_pipeline(spec, opts, 0.05, 2);

  std::vector<double> inside;
  for (std::size_t v = 0; v < report.population.true_prevalence.size(); ++v) {
    if (report.population.true_prevalence[v] == 1.0) {
      inside.push_back(report.estimated_prevalence[v]);
    }
  }
  REQUIRE(!inside.empty());
  CHECK(stats::median(inside) >= 0.9);
}

TEST_CASE("pure-null pipeline leaves the masked map almost entirely zero") {
  ToySpec spec = fig1_toy_spec(31);
  spec.dims = {30, 20, 1};
  spec.ellipse_axes = {0.0, 0.0, 0.0};
  spec.n_subjects = 100;
  EmOptions opts;
  const ToyReport report = run_toy_pipeline(spec, opts, 0.05, 2);
  std::size_t zeros = 0;
  for (double v : report.signed_prevalence) zeros += v == 0.0 ? 1 : 0;
  CHECK(static_cast<double>(zeros) >=
        0.99 * static_cast<double>(report.signed_prevalence.size()));
  CHECK(report.mean_abs_error <= 0.05);
}
