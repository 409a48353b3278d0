#include "prevmap/simulate.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "prevmap/errors.hpp"
#include "prevmap/parallel.hpp"
#include "prevmap/rng.hpp"
#include "prevmap/stats.hpp"

namespace prevmap {

namespace {

bool no_ellipse(const ToySpec& spec) {
  return spec.ellipse_axes[0] == 0.0 && spec.ellipse_axes[1] == 0.0 &&
         spec.ellipse_axes[2] == 0.0;
}

bool axis_used(const GridDims& dims, int d) {
  const std::int64_t extent = d == 0 ? dims.nx : d == 1 ? dims.ny : dims.nz;
  return extent > 1;
}

}  // namespace

void ActiveModel::validate() const {
  if (components.empty()) throw Error("ActiveModel: no components");
  double sum = 0.0;
  for (const auto& [w, var] : components) {
    if (!(w > 0.0)) throw Error("ActiveModel: non-positive weight");
    if (!(var > 0.0)) throw Error("ActiveModel: non-positive variance");
    sum += w;
  }
  if (std::fabs(sum - 1.0) > 1e-9) {
    throw Error("ActiveModel: weights do not sum to 1");
  }
}

void ToySpec::validate() const {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) {
    throw Error("ToySpec: non-positive grid dimension");
  }
  if (n_subjects < 1) throw Error("ToySpec: need at least one subject");
  if (center_jitter_sd < 0.0 || axes_jitter_sd < 0.0) {
    throw Error("ToySpec: negative jitter SD");
  }
  if (null_model.p3() != 0.0) throw Error("ToySpec: null model must have p3 = 0");
  active_model.validate();
  if (no_ellipse(*this)) return;
  for (int d = 0; d < 3; ++d) {
    if (!axis_used(dims, d)) continue;
    const std::int64_t extent = d == 0 ? dims.nx : d == 1 ? dims.ny : dims.nz;
    const double axis = ellipse_axes[d];
    if (axis < 0.0) throw Error("ToySpec: negative ellipse axis");
    const double reach =
        axis * (1.0 + 3.0 * axes_jitter_sd) + 3.0 * center_jitter_sd;
    if (ellipse_center[d] - reach < 0.0 ||
        ellipse_center[d] + reach > static_cast<double>(extent - 1)) {
      throw EllipseOutOfBounds(
          "ToySpec: ellipse exceeds grid on axis " + std::to_string(d) +
          " after 3-sigma jitter");
    }
  }
}

ToyPopulation make_toy_population(const ToySpec& spec) {
  spec.validate();
  const std::int64_t grid = spec.dims.size();
  ToyPopulation pop;
  pop.dims = spec.dims;
  pop.n_subjects = spec.n_subjects;
  pop.activity.assign(static_cast<std::size_t>(spec.n_subjects) *
                          static_cast<std::size_t>(grid),
                      0);
  pop.true_prevalence.assign(static_cast<std::size_t>(grid), 0.0);
  const bool pure_null = no_ellipse(spec);

  std::vector<std::int64_t> counts(static_cast<std::size_t>(grid), 0);
  for (int s = 0; s < spec.n_subjects && !pure_null; ++s) {
    KeyedRng center_rng(spec.seed, StreamTag::ellipse_center,
                        static_cast<std::uint64_t>(s));
    KeyedRng axes_rng(spec.seed, StreamTag::ellipse_axes,
                      static_cast<std::uint64_t>(s));
    std::array<double, 3> center = spec.ellipse_center;
    std::array<double, 3> axes = spec.ellipse_axes;
    for (int d = 0; d < 3; ++d) {
      if (!axis_used(spec.dims, d)) continue;
      center[d] += spec.center_jitter_sd * center_rng.next_normal();
      axes[d] = std::max(axes[d] * (1.0 + spec.axes_jitter_sd * axes_rng.next_normal()),
                         1e-6);
    }
    std::uint8_t* row = pop.activity.data() +
                        static_cast<std::size_t>(s) * static_cast<std::size_t>(grid);
    for (std::int64_t idx = 0; idx < grid; ++idx) {
      const auto [x, y, z] = unflatten(spec.dims, idx);
      const double coord[3] = {static_cast<double>(x), static_cast<double>(y),
                               static_cast<double>(z)};
      double q = 0.0;
      for (int d = 0; d < 3; ++d) {
        if (!axis_used(spec.dims, d)) continue;
        const double t = (coord[d] - center[d]) / axes[d];
        q += t * t;
      }
      if (q <= 1.0) {
        row[idx] = 1;
        ++counts[static_cast<std::size_t>(idx)];
      }
    }
  }
  for (std::int64_t idx = 0; idx < grid; ++idx) {
    pop.true_prevalence[static_cast<std::size_t>(idx)] =
        static_cast<double>(counts[static_cast<std::size_t>(idx)]) /
        static_cast<double>(spec.n_subjects);
  }
  return pop;
}

EffectsTable sample_effects(const ToyPopulation& pop, const ToySpec& spec) {
  if (pop.dims != spec.dims || pop.n_subjects != spec.n_subjects) {
    throw DimensionMismatch("sample_effects: population and spec disagree");
  }
  const std::int64_t grid = spec.dims.size();
  EffectsTable table;
  table.dims = spec.dims;
  table.n_subjects = spec.n_subjects;
  table.voxel_index.resize(static_cast<std::size_t>(grid));
  std::iota(table.voxel_index.begin(), table.voxel_index.end(), std::int64_t{0});
  table.effects.assign(static_cast<std::size_t>(grid) *
                           static_cast<std::size_t>(spec.n_subjects),
                       0.0);

  const double p1 = spec.null_model.p1();
  const double sd1 = std::sqrt(spec.null_model.var1());
  const double sd2 = std::sqrt(spec.null_model.var2());
  for (std::int64_t v = 0; v < grid; ++v) {
    double* row = table.effects.data() +
                  static_cast<std::size_t>(v) *
                      static_cast<std::size_t>(spec.n_subjects);
    for (int s = 0; s < spec.n_subjects; ++s) {
      KeyedRng rng(spec.seed, StreamTag::effect, static_cast<std::uint64_t>(v),
                   static_cast<std::uint64_t>(s));
      const double u = rng.next_unit();
      double value;
      if (pop.active(s, v)) {
        double cum = 0.0;
        double var = spec.active_model.components.back().second;
        for (const auto& [w, cvar] : spec.active_model.components) {
          cum += w;
          if (u < cum) {
            var = cvar;
            break;
          }
        }
        value = rng.next_normal(spec.active_model.mu, std::sqrt(var));
      } else {
        value = rng.next_normal(0.0, u < p1 ? sd1 : sd2);
      }
      row[s] = value;
    }
  }
  return table;
}

ToyReport run_toy_pipeline(const ToySpec& spec, const EmOptions& em_opts,
                           double q_level, int workers) {
  ToyReport report;
  report.population = make_toy_population(spec);
  report.effects = sample_effects(report.population, spec);
  const std::size_t m = report.effects.n_voxels();

  std::vector<VoxelFit> fits(
      m, VoxelFit{MixtureParams(1, 0, 0, 0, 1, 1, 1), 0, false, 0, 0, false, 0});
  std::vector<TestResult> tests(m);
  parallel_for(m, workers, [&](std::size_t v) {
    fits[v] = fit_voxel(report.effects.row(v), em_opts);
    tests[v] = signed_rank_test(report.effects.row(v));
  });
  report.fits = std::move(fits);
  report.tests = std::move(tests);

  std::vector<double> p_values(m);
  for (std::size_t v = 0; v < m; ++v) p_values[v] = report.tests[v].p_value;
  report.fdr = bh_adjust(p_values, q_level);
  report.signed_prevalence = signed_prevalence_map(report.fits, report.fdr);

  report.estimated_prevalence.resize(m);
  for (std::size_t v = 0; v < m; ++v) {
    report.estimated_prevalence[v] = report.fits[v].params.p3();
  }

  const std::vector<double>& truth = report.population.true_prevalence;
  report.pearson_true_vs_estimated =
      stats::pearson(truth, report.estimated_prevalence);
  double abs_err = 0.0;
  for (std::size_t v = 0; v < m; ++v) {
    abs_err += std::fabs(truth[v] - report.estimated_prevalence[v]);
  }
  report.mean_abs_error = abs_err / static_cast<double>(m);

  std::size_t map_discoveries = 0, map_false = 0, rejections = 0, rej_false = 0;
  for (std::size_t v = 0; v < m; ++v) {
    if (report.signed_prevalence[v] != 0.0) {
      ++map_discoveries;
      if (truth[v] == 0.0) ++map_false;
    }
    if (report.fdr.reject[v]) {
      ++rejections;
      if (truth[v] == 0.0) ++rej_false;
    }
  }
  report.realized_fdp =
      static_cast<double>(map_false) /
      static_cast<double>(std::max<std::size_t>(1, map_discoveries));
  report.rejected_fdp = static_cast<double>(rej_false) /
                        static_cast<double>(std::max<std::size_t>(1, rejections));
  return report;
}

ToySpec fig1_toy_spec(std::uint64_t seed, bool misspecified, bool sd_notation) {
  ToySpec spec;
  spec.seed = seed;
  const double null_v1 = sd_notation ? 0.15 * 0.15 : 0.15;
  const double null_v2 = 1.0;
  spec.null_model = MixtureParams(0.88, 0.12, 0.0, 0.0, null_v1, null_v2, 1.0);
  if (misspecified) {
    spec.active_model =
        ActiveModel{1.0, {{0.88, null_v1}, {0.12, null_v2}}};
  } else {
    spec.active_model = ActiveModel{1.0, {{1.0, sd_notation ? 0.25 * 0.25 : 0.25}}};
  }
  return spec;
}

}  // namespace prevmap
