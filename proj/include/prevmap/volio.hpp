#pragma once

// Bit-exact text formats: the PREVMAP-EFFECTS v1 effects table, the
// parameter-map CSV, and plain (P2) PGM slice renderings. Floats are written
// in shortest round-trip decimal form, so read(write(x)) == x and output
// bytes depend only on the data.

#include <cstdint>
#include <string>
#include <vector>

#include "prevmap/effects.hpp"
#include "prevmap/em.hpp"
#include "prevmap/inference.hpp"

namespace prevmap {

// One row of the parameter-map CSV; test-stage columns hold NaN (and
// reject = 0) until the testing pass fills them.
struct ParameterMapRecord {
  std::int64_t voxel_index = 0;
  std::int64_t x = 0, y = 0, z = 0;
  double p1 = 0, p2 = 0, p3 = 0, mu = 0;
  double var1 = 0, var2 = 0, var3 = 0;
  double loglik = 0;
  int thresholded = 0;
  double wilcoxon_stat = 0;
  double p_value = 0;
  double q_value = 0;
  int reject = 0;
  double signed_prevalence = 0;
};

EffectsTable read_effects_table(const std::string& path);
void write_effects_table(const std::string& path, const EffectsTable& table);

// Rows are written in voxel_index order regardless of input order. Throws
// InvariantViolation when coordinates disagree with the linear index or
// signed_prevalence disagrees with p3 * sign(mu) * reject.
void write_parameter_map(const std::string& path,
                         std::vector<ParameterMapRecord> records);
std::vector<ParameterMapRecord> read_parameter_map(const std::string& path);

// Builds records from fits plus (optionally) test results; dims supply the
// coordinates. Pass nullptr for the test arguments after a fit-only stage.
std::vector<ParameterMapRecord> make_parameter_records(
    const GridDims& dims, const std::vector<std::int64_t>& voxel_index,
    const std::vector<VoxelFit>& fits, const std::vector<TestResult>* tests,
    const FdrOutcome* fdr, const std::vector<double>* signed_prevalence);

// Plain PGM (P2, maxval 255) of one slice: axis 0/1/2 selects x/y/z, and the
// map value is clamped to [lo, hi] and scaled linearly to 0..255 (rounding
// half up). Out-of-mask voxels render as 0.
void render_pgm_slice(const std::string& path, const MaskedMap& map, int axis,
                      std::int64_t slice_index, double lo, double hi);

namespace detail {
// Shortest round-trip decimal representation ("." separator, no locale).
std::string format_double(double v);
}  // namespace detail

}  // namespace prevmap
