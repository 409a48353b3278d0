#pragma once

// Toy populations of elliptical activation regions with per-subject
// perturbation, effect sampling under the two-component null / shifted
// active noise models, and the end-to-end pipeline that validates
// prevalence recovery against the known truth.

#include <array>
#include <cstdint>
#include <vector>

#include "prevmap/effects.hpp"
#include "prevmap/em.hpp"
#include "prevmap/inference.hpp"
#include "prevmap/mixture.hpp"

namespace prevmap {

// Common active-effect distribution: equal-mean Gaussian components. A
// single component is the plain Gaussian model; two components form the
// scale-mixture variant used to probe misspecification.
struct ActiveModel {
  double mu = 1.0;
  std::vector<std::pair<double, double>> components;  // (weight, var)

  void validate() const;  // weights positive summing to 1, variances positive
};

struct ToySpec {
  GridDims dims{64, 64, 1};
  int n_subjects = 100;
  std::array<double, 3> ellipse_center{31.5, 31.5, 0.0};
  // All-zero axes mean "no active region" (a pure-null population).
  std::array<double, 3> ellipse_axes{14.0, 9.0, 0.0};
  double center_jitter_sd = 1.5;  // voxels
  double axes_jitter_sd = 0.10;   // multiplicative fraction
  MixtureParams null_model{0.88, 0.12, 0.0, 0.0, 0.15, 1.0, 1.0};
  ActiveModel active_model{1.0, {{1.0, 0.25}}};
  std::uint64_t seed = 0;

  // Throws EllipseOutOfBounds unless the ellipse fits inside the grid with
  // three-sigma jitter headroom on every non-singleton axis.
  void validate() const;
};

struct ToyPopulation {
  GridDims dims;
  int n_subjects = 0;
  std::vector<std::uint8_t> activity;   // subject-major, n_subjects x grid
  std::vector<double> true_prevalence;  // per grid voxel, exactly count/n

  std::uint8_t active(int subject, std::int64_t voxel) const {
    return activity[static_cast<std::size_t>(subject) *
                        static_cast<std::size_t>(dims.size()) +
                    static_cast<std::size_t>(voxel)];
  }
};

// Per-subject jittered ellipses; voxels with all-zero axes stay inactive.
ToyPopulation make_toy_population(const ToySpec& spec);

// One effect per (voxel, subject), drawn from the active or null model on a
// stream keyed by (seed, voxel, subject) so any sub-volume reproduces in
// isolation. The table covers every grid voxel.
EffectsTable sample_effects(const ToyPopulation& pop, const ToySpec& spec);

struct ToyReport {
  ToyPopulation population;
  EffectsTable effects;
  std::vector<VoxelFit> fits;
  std::vector<TestResult> tests;
  FdrOutcome fdr;
  std::vector<double> estimated_prevalence;  // constrained p3 per voxel
  std::vector<double> signed_prevalence;     // FDR-masked map
  double pearson_true_vs_estimated = 0.0;
  double mean_abs_error = 0.0;
  // False discovery proportion of the masked map: the fraction of nonzero
  // map entries sitting on voxels whose true prevalence is zero.
  double realized_fdp = 0.0;
  // Same proportion over the raw FDR rejection set, ignoring the map mask.
  double rejected_fdp = 0.0;
};

// make_toy_population -> sample_effects -> fit_voxel -> signed_rank_test ->
// bh_adjust -> signed_prevalence_map, with recovery and error summaries.
ToyReport run_toy_pipeline(const ToySpec& spec, const EmOptions& em_opts,
                           double q_level, int workers = 1);

// The standard toy generating models. With misspecified == true the active
// population is the two-component scale mixture around mu = 1; with
// sd_notation == true Gaussian parameters are read as standard deviations
// instead of variances.
ToySpec fig1_toy_spec(std::uint64_t seed, bool misspecified = false,
                      bool sd_notation = false);

}  // namespace prevmap
