#include "prevmap/volio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "prevmap/errors.hpp"

namespace prevmap {

namespace detail {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

namespace {

constexpr char kEffectsMagic[] = "PREVMAP-EFFECTS v1";

constexpr char kParameterMapHeader[] =
    "voxel_index,x,y,z,p1,p2,p3,mu,var1,var2,var3,loglik,thresholded,"
    "wilcoxon_stat,p_value,q_value,reject,signed_prevalence";

[[noreturn]] void parse_fail(const std::string& path, std::size_t line,
                             const std::string& what) {
  throw ParseError(path + ": line " + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view token, const std::string& path,
                    std::size_t line) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    parse_fail(path, line, "bad number '" + std::string(token) + "'");
  }
  return value;
}

std::int64_t parse_int(std::string_view token, const std::string& path,
                       std::size_t line) {
  std::int64_t value = 0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
    parse_fail(path, line, "bad integer '" + std::string(token) + "'");
  }
  return value;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

}  // namespace

EffectsTable read_effects_table(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string raw;
  std::size_t lineno = 0;
  auto next_line = [&](const char* what) -> std::string_view {
    if (!std::getline(in, raw)) parse_fail(path, lineno + 1, std::string("missing ") + what);
    ++lineno;
    return strip_cr(raw);
  };

  if (next_line("magic line") != kEffectsMagic) {
    parse_fail(path, lineno, "expected magic '" + std::string(kEffectsMagic) + "'");
  }

  EffectsTable table;
  {
    std::istringstream hdr{std::string(next_line("dims line"))};
    std::string key;
    if (!(hdr >> key >> table.dims.nx >> table.dims.ny >> table.dims.nz) ||
        key != "dims") {
      parse_fail(path, lineno, "expected 'dims <nx> <ny> <nz>'");
    }
  }
  {
    std::istringstream hdr{std::string(next_line("subjects line"))};
    std::string key;
    if (!(hdr >> key >> table.n_subjects) || key != "subjects") {
      parse_fail(path, lineno, "expected 'subjects <n>'");
    }
  }
  std::int64_t n_voxels = 0;
  {
    std::istringstream hdr{std::string(next_line("voxels line"))};
    std::string key;
    if (!(hdr >> key >> n_voxels) || key != "voxels") {
      parse_fail(path, lineno, "expected 'voxels <m>'");
    }
  }
  if (n_voxels < 0) parse_fail(path, lineno, "negative voxel count");

  table.voxel_index.reserve(static_cast<std::size_t>(n_voxels));
  table.effects.reserve(static_cast<std::size_t>(n_voxels) *
                        static_cast<std::size_t>(std::max(table.n_subjects, 0)));
  for (std::int64_t v = 0; v < n_voxels; ++v) {
    const std::string_view line = next_line("voxel row");
    const std::vector<std::string_view> fields = split_csv(line);
    if (fields.size() != static_cast<std::size_t>(table.n_subjects) + 1) {
      parse_fail(path, lineno,
                 "expected " + std::to_string(table.n_subjects + 1) +
                     " fields, got " + std::to_string(fields.size()));
    }
    table.voxel_index.push_back(parse_int(fields[0], path, lineno));
    for (std::size_t s = 1; s < fields.size(); ++s) {
      table.effects.push_back(parse_double(fields[s], path, lineno));
    }
  }
  table.validate();
  return table;
}

void write_effects_table(const std::string& path, const EffectsTable& table) {
  table.validate();
  std::ofstream out = open_out(path);
  out << kEffectsMagic << "\n";
  out << "dims " << table.dims.nx << " " << table.dims.ny << " " << table.dims.nz
      << "\n";
  out << "subjects " << table.n_subjects << "\n";
  out << "voxels " << table.n_voxels() << "\n";
  for (std::size_t v = 0; v < table.n_voxels(); ++v) {
    out << table.voxel_index[v];
    for (double e : table.row(v)) out << "," << detail::format_double(e);
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

namespace {

void check_record(const ParameterMapRecord& r, const GridDims& dims) {
  const auto [x, y, z] = unflatten(dims, r.voxel_index);
  if (x != r.x || y != r.y || z != r.z) {
    throw InvariantViolation("parameter map: coordinates disagree with voxel_index " +
                             std::to_string(r.voxel_index));
  }
  if (r.thresholded != 0 && r.thresholded != 1) {
    throw InvariantViolation("parameter map: thresholded flag must be 0/1");
  }
  if (r.reject != 0 && r.reject != 1) {
    throw InvariantViolation("parameter map: reject flag must be 0/1");
  }
  const double sign = r.mu > 0 ? 1.0 : (r.mu < 0 ? -1.0 : 0.0);
  const double expected = r.p3 * sign * r.reject;
  if (std::isfinite(r.signed_prevalence) &&
      std::fabs(r.signed_prevalence - expected) > 1e-12) {
    throw InvariantViolation(
        "parameter map: signed_prevalence inconsistent at voxel " +
        std::to_string(r.voxel_index));
  }
}

}  // namespace

void write_parameter_map(const std::string& path,
                         std::vector<ParameterMapRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const ParameterMapRecord& a, const ParameterMapRecord& b) {
              return a.voxel_index < b.voxel_index;
            });
  std::ofstream out = open_out(path);
  out << kParameterMapHeader << "\n";
  for (const auto& r : records) {
    out << r.voxel_index << "," << r.x << "," << r.y << "," << r.z << ","
        << detail::format_double(r.p1) << "," << detail::format_double(r.p2)
        << "," << detail::format_double(r.p3) << ","
        << detail::format_double(r.mu) << "," << detail::format_double(r.var1)
        << "," << detail::format_double(r.var2) << ","
        << detail::format_double(r.var3) << ","
        << detail::format_double(r.loglik) << "," << r.thresholded << ","
        << detail::format_double(r.wilcoxon_stat) << ","
        << detail::format_double(r.p_value) << ","
        << detail::format_double(r.q_value) << "," << r.reject << ","
        << detail::format_double(r.signed_prevalence) << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<ParameterMapRecord> read_parameter_map(const std::string& path) {
  std::ifstream in = open_in(path);
  std::string raw;
  std::size_t lineno = 0;
  if (!std::getline(in, raw)) parse_fail(path, 1, "missing header");
  ++lineno;
  if (strip_cr(raw) != kParameterMapHeader) {
    parse_fail(path, lineno, "unexpected parameter map header");
  }
  std::vector<ParameterMapRecord> records;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string_view line = strip_cr(raw);
    if (line.empty()) continue;
    const std::vector<std::string_view> f = split_csv(line);
    if (f.size() != 18) {
      parse_fail(path, lineno, "expected 18 fields, got " + std::to_string(f.size()));
    }
    ParameterMapRecord r;
    r.voxel_index = parse_int(f[0], path, lineno);
    r.x = parse_int(f[1], path, lineno);
    r.y = parse_int(f[2], path, lineno);
    r.z = parse_int(f[3], path, lineno);
    r.p1 = parse_double(f[4], path, lineno);
    r.p2 = parse_double(f[5], path, lineno);
    r.p3 = parse_double(f[6], path, lineno);
    r.mu = parse_double(f[7], path, lineno);
    r.var1 = parse_double(f[8], path, lineno);
    r.var2 = parse_double(f[9], path, lineno);
    r.var3 = parse_double(f[10], path, lineno);
    r.loglik = parse_double(f[11], path, lineno);
    r.thresholded = static_cast<int>(parse_int(f[12], path, lineno));
    r.wilcoxon_stat = parse_double(f[13], path, lineno);
    r.p_value = parse_double(f[14], path, lineno);
    r.q_value = parse_double(f[15], path, lineno);
    r.reject = static_cast<int>(parse_int(f[16], path, lineno));
    r.signed_prevalence = parse_double(f[17], path, lineno);
    records.push_back(r);
  }
  return records;
}

std::vector<ParameterMapRecord> make_parameter_records(
    const GridDims& dims, const std::vector<std::int64_t>& voxel_index,
    const std::vector<VoxelFit>& fits, const std::vector<TestResult>* tests,
    const FdrOutcome* fdr, const std::vector<double>* signed_prevalence) {
  if (voxel_index.size() != fits.size()) {
    throw LengthMismatch("make_parameter_records: fits and voxel list differ");
  }
  if ((tests && tests->size() != fits.size()) ||
      (fdr && fdr->reject.size() != fits.size()) ||
      (signed_prevalence && signed_prevalence->size() != fits.size())) {
    throw LengthMismatch("make_parameter_records: test outputs and voxel list differ");
  }
  const double nan = std::nan("");
  std::vector<ParameterMapRecord> records;
  records.reserve(fits.size());
  for (std::size_t v = 0; v < fits.size(); ++v) {
    ParameterMapRecord r;
    r.voxel_index = voxel_index[v];
    const auto [x, y, z] = unflatten(dims, r.voxel_index);
    r.x = x;
    r.y = y;
    r.z = z;
    const MixtureParams& p = fits[v].params;
    r.p1 = p.p1();
    r.p2 = p.p2();
    r.p3 = p.p3();
    r.mu = p.mu();
    r.var1 = p.var1();
    r.var2 = p.var2();
    r.var3 = p.var3();
    r.loglik = fits[v].loglik;
    r.thresholded = fits[v].thresholded ? 1 : 0;
    r.wilcoxon_stat = tests ? (*tests)[v].statistic : nan;
    r.p_value = tests ? (*tests)[v].p_value : nan;
    r.q_value = fdr ? fdr->q_values[v] : nan;
    r.reject = fdr ? (*fdr).reject[v] : 0;
    r.signed_prevalence = signed_prevalence ? (*signed_prevalence)[v] : 0.0;
    check_record(r, dims);
    records.push_back(r);
  }
  return records;
}

void render_pgm_slice(const std::string& path, const MaskedMap& map, int axis,
                      std::int64_t slice_index, double lo, double hi) {
  if (axis < 0 || axis > 2) throw IndexOutOfRange("render_pgm_slice: axis must be 0..2");
  const std::int64_t extents[3] = {map.dims.nx, map.dims.ny, map.dims.nz};
  if (slice_index < 0 || slice_index >= extents[axis]) {
    throw IndexOutOfRange("render_pgm_slice: slice " + std::to_string(slice_index) +
                          " outside axis extent " + std::to_string(extents[axis]));
  }
  if (!(lo < hi)) throw Error("render_pgm_slice: need lo < hi");
  if (map.voxel_index.size() != map.values.size()) {
    throw LengthMismatch("render_pgm_slice: index/value lengths differ");
  }

  // The remaining axes in ascending order give (width, height).
  const int ax_w = axis == 0 ? 1 : 0;
  const int ax_h = axis == 2 ? 1 : 2;
  const std::int64_t width = extents[ax_w];
  const std::int64_t height = extents[ax_h];

  std::vector<double> grid(static_cast<std::size_t>(map.dims.size()),
                           std::nan(""));
  for (std::size_t i = 0; i < map.voxel_index.size(); ++i) {
    grid[static_cast<std::size_t>(map.voxel_index[i])] = map.values[i];
  }

  std::ofstream out = open_out(path);
  out << "P2\n" << width << " " << height << "\n255\n";
  for (std::int64_t row = 0; row < height; ++row) {
    for (std::int64_t col = 0; col < width; ++col) {
      std::int64_t coord[3];
      coord[axis] = slice_index;
      coord[ax_w] = col;
      coord[ax_h] = row;
      const std::int64_t idx = flatten(map.dims, coord[0], coord[1], coord[2]);
      const double v = grid[static_cast<std::size_t>(idx)];
      int pixel = 0;
      if (!std::isnan(v)) {
        const double clamped = std::min(std::max(v, lo), hi);
        pixel = static_cast<int>(std::floor((clamped - lo) / (hi - lo) * 255.0 + 0.5));
      }
      out << pixel << (col + 1 == width ? "" : " ");
    }
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace prevmap
