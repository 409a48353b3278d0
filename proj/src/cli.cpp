#include "prevmap/cli.hpp"

#include <CLI11.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "prevmap/efficiency.hpp"
#include "prevmap/errors.hpp"
#include "prevmap/gof.hpp"
#include "prevmap/parallel.hpp"
#include "prevmap/regions.hpp"
#include "prevmap/simulate.hpp"
#include "prevmap/volio.hpp"

namespace prevmap {

namespace {

namespace fs = std::filesystem;

struct CommonOpts {
  std::string input;
  std::string output_dir = ".";
  double q_level = 0.1;
  std::uint64_t seed = 0;
  int workers = default_workers();
  EmOptions em;
  std::string render_slice;  // "<axis>:<index>", axis in {x,y,z}
};

void add_em_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--grid-step", o.em.grid_step,
                  "Moment-initialization grid spacing")
      ->capture_default_str();
  cmd->add_option("--top-k", o.em.top_k_starts, "EM starts kept from the grid")
      ->capture_default_str();
  cmd->add_option("--max-iter", o.em.max_iter, "EM iteration cap")
      ->capture_default_str();
  cmd->add_option("--rel-tol", o.em.rel_tol,
                  "EM relative log-likelihood tolerance")
      ->capture_default_str();
}

void add_common_flags(CLI::App* cmd, CommonOpts& o, bool with_input = true) {
  if (with_input) {
    cmd->add_option("--input", o.input, "Effects table path")->required();
  }
  cmd->add_option("--output-dir", o.output_dir, "Directory for output files")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--workers", o.workers, "Worker thread count")
      ->capture_default_str();
}

std::string out_path(const CommonOpts& o, const std::string& name) {
  fs::create_directories(o.output_dir);
  return (fs::path(o.output_dir) / name).string();
}

struct SliceRequest {
  int axis;
  std::int64_t index;
};

std::optional<SliceRequest> parse_slice(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error("--render-slice expects <axis>:<index>, e.g. z:0");
  }
  const std::string axis_name = text.substr(0, colon);
  int axis;
  if (axis_name == "x" || axis_name == "0") axis = 0;
  else if (axis_name == "y" || axis_name == "1") axis = 1;
  else if (axis_name == "z" || axis_name == "2") axis = 2;
  else throw Error("--render-slice axis must be x, y or z");
  return SliceRequest{axis, std::stoll(text.substr(colon + 1))};
}

struct FitOutputs {
  std::vector<VoxelFit> fits;
  std::vector<TestResult> tests;
  FdrOutcome fdr;
  std::vector<double> signed_prevalence;
};

std::vector<VoxelFit> fit_all(const EffectsTable& table, const CommonOpts& o) {
  std::vector<VoxelFit> fits(
      table.n_voxels(),
      VoxelFit{MixtureParams(1, 0, 0, 0, 1, 1, 1), 0, false, 0, 0, false, 0});
  parallel_for(table.n_voxels(), o.workers, [&](std::size_t v) {
    fits[v] = fit_voxel(table.row(v), o.em);
  });
  return fits;
}

// Voxels whose signed-rank test is undefined (too few nonzero values) are
// never rejected: they enter BH with p = 1.
std::vector<TestResult> test_all(const EffectsTable& table, const CommonOpts& o) {
  std::vector<TestResult> tests(table.n_voxels());
  parallel_for(table.n_voxels(), o.workers, [&](std::size_t v) {
    try {
      tests[v] = signed_rank_test(table.row(v));
    } catch (const TooFewNonzero&) {
      tests[v] = TestResult{0.0, 1.0, TestMethod::signed_rank_exact, 0};
    }
  });
  return tests;
}

FitOutputs run_fit_and_test(const EffectsTable& table, const CommonOpts& o) {
  FitOutputs out;
  out.fits = fit_all(table, o);
  out.tests = test_all(table, o);
  std::vector<double> p(table.n_voxels());
  for (std::size_t v = 0; v < p.size(); ++v) p[v] = out.tests[v].p_value;
  out.fdr = bh_adjust(p, o.q_level);
  out.signed_prevalence = signed_prevalence_map(out.fits, out.fdr);
  return out;
}

void write_map_and_render(const EffectsTable& table, const FitOutputs& r,
                          const CommonOpts& o) {
  write_parameter_map(out_path(o, "parameter_map.csv"),
                      make_parameter_records(table.dims, table.voxel_index,
                                             r.fits, &r.tests, &r.fdr,
                                             &r.signed_prevalence));
  if (const auto slice = parse_slice(o.render_slice)) {
    const MaskedMap map{table.dims, table.voxel_index, r.signed_prevalence};
    std::ostringstream name;
    name << "signed_prevalence_" << "xyz"[slice->axis] << slice->index << ".pgm";
    render_pgm_slice(out_path(o, name.str()), map, slice->axis, slice->index,
                     -1.0, 1.0);
  }
}

int cmd_simulate(const CommonOpts& o, const ToySpec& spec) {
  const ToyPopulation pop = make_toy_population(spec);
  const EffectsTable table = sample_effects(pop, spec);
  write_effects_table(out_path(o, "effects.txt"), table);

  std::ofstream truth(out_path(o, "truth.csv"), std::ios::binary);
  if (!truth) throw IoError("cannot open truth.csv for writing");
  truth << "voxel_index,x,y,z,true_prevalence\n";
  for (std::int64_t idx = 0; idx < spec.dims.size(); ++idx) {
    const auto [x, y, z] = unflatten(spec.dims, idx);
    truth << idx << "," << x << "," << y << "," << z << ","
          << detail::format_double(pop.true_prevalence[static_cast<std::size_t>(idx)])
          << "\n";
  }
  if (const auto slice = parse_slice(o.render_slice)) {
    const MaskedMap map{spec.dims, table.voxel_index, pop.true_prevalence};
    std::ostringstream name;
    name << "true_prevalence_" << "xyz"[slice->axis] << slice->index << ".pgm";
    render_pgm_slice(out_path(o, name.str()), map, slice->axis, slice->index,
                     0.0, 1.0);
  }
  std::cerr << "simulate: wrote " << table.n_voxels() << " voxels x "
            << table.n_subjects << " subjects\n";
  return 0;
}

int cmd_fit(const CommonOpts& o) {
  EffectsTable table = read_effects_table(o.input);
  const std::vector<VoxelFit> fits = fit_all(table, o);
  write_parameter_map(out_path(o, "parameter_map.csv"),
                      make_parameter_records(table.dims, table.voxel_index,
                                             fits, nullptr, nullptr, nullptr));
  std::size_t thresholded = 0;
  for (const auto& f : fits) thresholded += f.thresholded ? 1 : 0;
  std::cerr << "fit: " << fits.size() << " voxels, " << thresholded
            << " thresholded to p3=0\n";
  return 0;
}

int cmd_test(const CommonOpts& o, const std::string& map_path) {
  EffectsTable table = read_effects_table(o.input);
  std::vector<ParameterMapRecord> records = read_parameter_map(map_path);
  if (records.size() != table.n_voxels()) {
    throw LengthMismatch("test: parameter map and effects table differ in voxel count");
  }
  for (std::size_t v = 0; v < records.size(); ++v) {
    if (records[v].voxel_index != table.voxel_index[v]) {
      throw InvariantViolation("test: parameter map voxel list does not match effects");
    }
  }
  const std::vector<TestResult> tests = test_all(table, o);
  std::vector<double> p(records.size());
  for (std::size_t v = 0; v < p.size(); ++v) p[v] = tests[v].p_value;
  const FdrOutcome fdr = bh_adjust(p, o.q_level);
  std::size_t n_rejected = 0;
  for (std::size_t v = 0; v < records.size(); ++v) {
    records[v].wilcoxon_stat = tests[v].statistic;
    records[v].p_value = tests[v].p_value;
    records[v].q_value = fdr.q_values[v];
    records[v].reject = fdr.reject[v];
    const double mu = records[v].mu;
    const double sign = mu > 0 ? 1.0 : (mu < 0 ? -1.0 : 0.0);
    records[v].signed_prevalence = fdr.reject[v] ? records[v].p3 * sign : 0.0;
    n_rejected += fdr.reject[v];
  }
  write_parameter_map(out_path(o, "parameter_map.csv"), records);
  if (const auto slice = parse_slice(o.render_slice)) {
    std::vector<double> sp(records.size());
    for (std::size_t v = 0; v < records.size(); ++v) {
      sp[v] = records[v].signed_prevalence;
    }
    const MaskedMap map{table.dims, table.voxel_index, sp};
    std::ostringstream name;
    name << "signed_prevalence_" << "xyz"[slice->axis] << slice->index << ".pgm";
    render_pgm_slice(out_path(o, name.str()), map, slice->axis, slice->index,
                     -1.0, 1.0);
  }
  std::cerr << "test: " << n_rejected << "/" << records.size()
            << " voxels significant at q=" << o.q_level << "\n";
  return 0;
}

int cmd_pipeline(const CommonOpts& o) {
  EffectsTable table = read_effects_table(o.input);
  const FitOutputs r = run_fit_and_test(table, o);
  write_map_and_render(table, r, o);
  std::size_t n_rejected = 0;
  for (auto b : r.fdr.reject) n_rejected += b;
  std::cerr << "pipeline: " << n_rejected << "/" << table.n_voxels()
            << " voxels significant at q=" << o.q_level << "\n";
  return 0;
}

int cmd_regions(const CommonOpts& o, const std::string& statistic_name,
                double active_fraction, int n_splits) {
  EffectsTable table = read_effects_table(o.input);
  const MapStatistic statistic = statistic_name == "t" ? MapStatistic::t
                                                       : MapStatistic::prevalence;
  std::vector<int> all_subjects(static_cast<std::size_t>(table.n_subjects));
  for (int s = 0; s < table.n_subjects; ++s) all_subjects[static_cast<std::size_t>(s)] = s;
  const MaskedMap map{table.dims, table.voxel_index,
                      statistic_map(table, all_subjects, statistic, o.em, o.workers)};
  const std::vector<std::uint8_t> mask = threshold_map(map, active_fraction);
  const std::vector<Region> regions = label_components(mask, table.dims);

  std::ofstream out(out_path(o, "regions.csv"), std::ios::binary);
  if (!out) throw IoError("cannot open regions.csv for writing");
  out << "region,size,ext_x,ext_y,ext_z,complexity\n";
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Region& r = regions[i];
    out << i << "," << r.size();
    for (int d = 0; d < 3; ++d) out << "," << (r.box_max[d] - r.box_min[d] + 1);
    out << "," << detail::format_double(complexity_ratio(r)) << "\n";
  }
  const RegionSummary summary = region_summary(mask, table.dims);
  std::cerr << "regions: " << summary.n_regions << " regions, "
            << summary.n_singletons << " singletons, median complexity ";
  if (summary.median_complexity) std::cerr << *summary.median_complexity << "\n";
  else std::cerr << "n/a\n";

  if (n_splits > 0) {
    const std::vector<double> agree = split_half_agreement(
        table, statistic, active_fraction, n_splits, o.seed, o.em, o.workers);
    std::ofstream sp(out_path(o, "agreement.csv"), std::ios::binary);
    if (!sp) throw IoError("cannot open agreement.csv for writing");
    sp << "split,dice\n";
    for (std::size_t i = 0; i < agree.size(); ++i) {
      sp << i << "," << detail::format_double(agree[i]) << "\n";
    }
  }
  return 0;
}

int cmd_gof(const CommonOpts& o, const std::string& families_csv) {
  EffectsTable table = read_effects_table(o.input);
  std::vector<CandidateFamily> families;
  if (families_csv.empty() || families_csv == "all") {
    families = all_families();
  } else {
    std::istringstream ss(families_csv);
    std::string name;
    while (std::getline(ss, name, ',')) {
      const auto f = family_from_name(name);
      if (!f) throw Error("unknown family '" + name + "'");
      families.push_back(*f);
    }
  }
  const GofTable result = gof_compare(table, families, o.seed, o.em, o.workers);

  std::ofstream out(out_path(o, "gof_table.csv"), std::ios::binary);
  if (!out) throw IoError("cannot open gof_table.csv for writing");
  out << "voxel_index,family,ks\n";
  for (std::size_t v = 0; v < result.ks.size(); ++v) {
    for (std::size_t f = 0; f < families.size(); ++f) {
      out << table.voxel_index[v] << "," << family_name(families[f]) << ","
          << detail::format_double(result.ks[v][f]) << "\n";
    }
  }
  std::ofstream sum(out_path(o, "gof_summary.csv"), std::ios::binary);
  if (!sum) throw IoError("cannot open gof_summary.csv for writing");
  sum << "family,n_voxels,median,q1,q3,whisker_lo,whisker_hi\n";
  for (const FamilySummary& s : result.summaries) {
    sum << family_name(s.family) << "," << s.n_voxels_ok << ","
        << detail::format_double(s.median) << "," << detail::format_double(s.q1)
        << "," << detail::format_double(s.q3) << ","
        << detail::format_double(s.whisker_lo) << ","
        << detail::format_double(s.whisker_hi) << "\n";
    std::cerr << "gof: " << family_name(s.family) << " median KS " << s.median
              << " over " << s.n_voxels_ok << " voxels\n";
  }
  return 0;
}

int cmd_are(const CommonOpts& o, const NuisanceSpec& spec) {
  const double c_t = efficacy_t(spec);
  const double c_w = efficacy_signed_rank(spec);
  const double are = pitman_are(spec);
  std::ofstream out(out_path(o, "are.csv"), std::ios::binary);
  if (!out) throw IoError("cannot open are.csv for writing");
  out << "efficacy_t,efficacy_signed_rank,are\n";
  out << detail::format_double(c_t) << "," << detail::format_double(c_w) << ","
      << detail::format_double(are) << "\n";
  std::cerr << "are: c_t=" << c_t << " c_w=" << c_w << " are=" << are << "\n";
  return 0;
}

int cmd_power(const CommonOpts& o, const NuisanceSpec& spec, int n,
              const std::string& p_grid_csv, double alpha, int reps) {
  std::vector<double> p_grid;
  std::istringstream ss(p_grid_csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) p_grid.push_back(std::stod(tok));
  if (p_grid.empty()) throw Error("power: empty --p-grid");

  const std::vector<PowerRow> rows =
      power_curve_mc(spec, n, p_grid, alpha, reps, o.seed, o.workers);
  std::ofstream out(out_path(o, "power.csv"), std::ios::binary);
  if (!out) throw IoError("cannot open power.csv for writing");
  out << "p,power_t,se_t,power_wilcoxon,se_wilcoxon\n";
  for (const PowerRow& r : rows) {
    out << detail::format_double(r.p) << "," << detail::format_double(r.power_t)
        << "," << detail::format_double(r.se_t) << ","
        << detail::format_double(r.power_wilcoxon) << ","
        << detail::format_double(r.se_wilcoxon) << "\n";
    std::cerr << "power: p=" << r.p << " t=" << r.power_t
              << " wilcoxon=" << r.power_wilcoxon << "\n";
  }
  return 0;
}

GridDims parse_dims(const std::string& text) {
  GridDims d{0, 0, 1};
  std::istringstream ss(text);
  std::string tok;
  std::vector<std::int64_t> vals;
  while (std::getline(ss, tok, 'x')) vals.push_back(std::stoll(tok));
  if (vals.size() < 2 || vals.size() > 3) {
    throw Error("--dims expects <nx>x<ny>[x<nz>]");
  }
  d.nx = vals[0];
  d.ny = vals[1];
  if (vals.size() == 3) d.nz = vals[2];
  return d;
}

std::array<double, 3> parse_coords(const std::string& text) {
  std::array<double, 3> out{0, 0, 0};
  std::istringstream ss(text);
  std::string tok;
  std::size_t i = 0;
  while (std::getline(ss, tok, ',')) {
    if (i >= 3) throw Error("too many coordinates in '" + text + "'");
    out[i++] = std::stod(tok);
  }
  if (i < 2) throw Error("expected at least two coordinates in '" + text + "'");
  return out;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Voxel-wise activation prevalence estimation"};
  app.require_subcommand(1);

  const CLI::Validator open_unit_interval(
      [](std::string& s) -> std::string {
        try {
          if (const double v = std::stod(s); v > 0.0 && v < 1.0) return {};
        } catch (...) {
        }
        return "value must lie strictly between 0 and 1";
      },
      "FLOAT in (0,1)");

  CommonOpts o;

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a toy effects dataset");
  std::string sim_dims = "64x64", sim_center, sim_axes;
  double sim_center_jitter = 1.5, sim_axes_jitter = 0.10;
  int sim_subjects = 100;
  bool sim_misspecified = false, sim_sd_notation = false, sim_pure_null = false;
  add_common_flags(sim, o, false);
  sim->add_option("--dims", sim_dims, "Grid extents <nx>x<ny>[x<nz>]")
      ->capture_default_str();
  sim->add_option("--subjects", sim_subjects, "Subjects to simulate")
      ->capture_default_str();
  sim->add_option("--center", sim_center, "Ellipse center coordinates");
  sim->add_option("--axes", sim_axes, "Ellipse semi-axes");
  sim->add_option("--center-jitter", sim_center_jitter,
                  "Per-subject center jitter SD (voxels)")
      ->capture_default_str();
  sim->add_option("--axes-jitter", sim_axes_jitter,
                  "Per-subject multiplicative axes jitter SD")
      ->capture_default_str();
  sim->add_flag("--misspecified", sim_misspecified,
                "Use the scale-mixture active model");
  sim->add_flag("--sd-notation", sim_sd_notation,
                "Read Gaussian parameters as standard deviations");
  sim->add_flag("--pure-null", sim_pure_null, "No active region at all");
  sim->add_option("--render-slice", o.render_slice, "Render one slice: <axis>:<index>");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the mixture per voxel");
  add_common_flags(fit, o);
  add_em_flags(fit, o);

  // test
  auto* test = app.add_subcommand("test", "Signed-rank tests + FDR masking");
  std::string test_map;
  add_common_flags(test, o);
  test->add_option("--map", test_map, "Parameter map from the fit stage")->required();
  test->add_option("--q", o.q_level, "FDR level")->check(open_unit_interval)->capture_default_str();
  test->add_option("--render-slice", o.render_slice, "Render one slice: <axis>:<index>");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "fit + test + render in one pass");
  add_common_flags(pipe, o);
  add_em_flags(pipe, o);
  pipe->add_option("--q", o.q_level, "FDR level")->check(open_unit_interval)->capture_default_str();
  pipe->add_option("--render-slice", o.render_slice, "Render one slice: <axis>:<index>");

  // regions
  auto* reg = app.add_subcommand("regions", "Region complexity and stability");
  std::string reg_statistic = "prevalence";
  double reg_fraction = 0.5;
  int reg_splits = 0;
  add_common_flags(reg, o);
  add_em_flags(reg, o);
  reg->add_option("--statistic", reg_statistic, "Map statistic: t or prevalence")
      ->check(CLI::IsMember({"t", "prevalence"}))
      ->capture_default_str();
  reg->add_option("--active-fraction", reg_fraction, "Fraction of voxels marked active")
      ->capture_default_str();
  reg->add_option("--splits", reg_splits, "Split-half agreement replications")
      ->capture_default_str();

  // gof
  auto* gof = app.add_subcommand("gof", "Held-out goodness-of-fit comparison");
  std::string gof_families = "all";
  add_common_flags(gof, o);
  add_em_flags(gof, o);
  gof->add_option("--families", gof_families,
                  "Comma-separated candidate families, or 'all'")
      ->capture_default_str();

  // are
  auto* are = app.add_subcommand("are", "Pitman efficacies and relative efficiency");
  NuisanceSpec nuisance{0.88, 0.12, 0.15, 1.0, 1.0, 0.25};
  add_common_flags(are, o, false);
  are->add_option("--null-w1", nuisance.null_w1)->capture_default_str();
  are->add_option("--null-w2", nuisance.null_w2)->capture_default_str();
  are->add_option("--null-v1", nuisance.null_var1)->capture_default_str();
  are->add_option("--null-v2", nuisance.null_var2)->capture_default_str();
  are->add_option("--mu", nuisance.active_mu)->capture_default_str();
  are->add_option("--active-var", nuisance.active_var)->capture_default_str();

  // power
  auto* power = app.add_subcommand("power", "Monte Carlo power comparison");
  int power_n = 64, power_reps = 1000;
  double power_alpha = 0.05;
  std::string power_grid = "0,0.1,0.2,0.3";
  add_common_flags(power, o, false);
  power->add_option("--null-w1", nuisance.null_w1)->capture_default_str();
  power->add_option("--null-w2", nuisance.null_w2)->capture_default_str();
  power->add_option("--null-v1", nuisance.null_var1)->capture_default_str();
  power->add_option("--null-v2", nuisance.null_var2)->capture_default_str();
  power->add_option("--mu", nuisance.active_mu)->capture_default_str();
  power->add_option("--active-var", nuisance.active_var)->capture_default_str();
  power->add_option("--n", power_n, "Subjects per replication")->capture_default_str();
  power->add_option("--p-grid", power_grid, "Comma-separated prevalence values")
      ->capture_default_str();
  power->add_option("--alpha", power_alpha, "Test level")->capture_default_str();
  power->add_option("--reps", power_reps, "Monte Carlo replications")
      ->capture_default_str();

  try {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("prevmap");
    for (const std::string& a : args) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  }
  if (o.workers < 1) o.workers = 1;

  try {
    if (sim->parsed()) {
      ToySpec spec = fig1_toy_spec(o.seed, sim_misspecified, sim_sd_notation);
      spec.dims = parse_dims(sim_dims);
      spec.n_subjects = sim_subjects;
      spec.center_jitter_sd = sim_center_jitter;
      spec.axes_jitter_sd = sim_axes_jitter;
      if (!sim_center.empty()) {
        spec.ellipse_center = parse_coords(sim_center);
      } else {
        spec.ellipse_center = {static_cast<double>(spec.dims.nx - 1) / 2.0,
                               static_cast<double>(spec.dims.ny - 1) / 2.0,
                               static_cast<double>(spec.dims.nz - 1) / 2.0};
      }
      if (!sim_axes.empty()) {
        spec.ellipse_axes = parse_coords(sim_axes);
      } else {
        spec.ellipse_axes = {0.22 * static_cast<double>(spec.dims.nx - 1),
                             0.14 * static_cast<double>(spec.dims.ny - 1),
                             spec.dims.nz > 1
                                 ? 0.14 * static_cast<double>(spec.dims.nz - 1)
                                 : 0.0};
      }
      if (sim_pure_null) spec.ellipse_axes = {0.0, 0.0, 0.0};
      return cmd_simulate(o, spec);
    }
    if (fit->parsed()) return cmd_fit(o);
    if (test->parsed()) return cmd_test(o, test_map);
    if (pipe->parsed()) return cmd_pipeline(o);
    if (reg->parsed()) {
      return cmd_regions(o, reg_statistic, reg_fraction, reg_splits);
    }
    if (gof->parsed()) return cmd_gof(o, gof_families);
    if (are->parsed()) return cmd_are(o, nuisance);
    if (power->parsed()) {
      return cmd_power(o, nuisance, power_n, power_grid, power_alpha, power_reps);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace prevmap
