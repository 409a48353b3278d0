#include "prevmap/gof.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "prevmap/errors.hpp"
#include "prevmap/parallel.hpp"
#include "prevmap/rng.hpp"
#include "prevmap/stats.hpp"

namespace prevmap {

std::string family_name(CandidateFamily family) {
  switch (family) {
    case CandidateFamily::gaussian: return "gaussian";
    case CandidateFamily::laplace: return "laplace";
    case CandidateFamily::cauchy: return "cauchy";
    case CandidateFamily::logistic: return "logistic";
    case CandidateFamily::gaussian_scale_mixture_2: return "gaussian_scale_mixture_2";
    case CandidateFamily::gaussian_mixture_3: return "gaussian_mixture_3";
  }
  return "unknown";
}

std::optional<CandidateFamily> family_from_name(const std::string& name) {
  for (CandidateFamily f : all_families()) {
    if (family_name(f) == name) return f;
  }
  return std::nullopt;
}

std::vector<CandidateFamily> all_families() {
  return {CandidateFamily::gaussian,
          CandidateFamily::laplace,
          CandidateFamily::cauchy,
          CandidateFamily::logistic,
          CandidateFamily::gaussian_scale_mixture_2,
          CandidateFamily::gaussian_mixture_3};
}

namespace {

std::vector<double> sorted_copy(std::span<const double> data) {
  std::vector<double> x(data.begin(), data.end());
  std::sort(x.begin(), x.end());
  return x;
}

CdfFn gaussian_cdf_fit(std::span<const double> data) {
  const double m = stats::mean(data);
  const double v = stats::sample_variance(data);
  if (!(v > 0.0)) throw ZeroVariance("fit_candidate: constant data for gaussian");
  return [m, v](double x) { return stats::normal_cdf(x, m, v); };
}

CdfFn laplace_cdf_fit(std::span<const double> data) {
  const std::vector<double> x = sorted_copy(data);
  const double loc = stats::quantile_type7(x, 0.5);
  double b = 0.0;
  for (double v : x) b += std::fabs(v - loc);
  b /= static_cast<double>(x.size());
  if (!(b > 0.0)) throw ZeroVariance("fit_candidate: constant data for laplace");
  return [loc, b](double t) {
    return t < loc ? 0.5 * std::exp((t - loc) / b)
                   : 1.0 - 0.5 * std::exp(-(t - loc) / b);
  };
}

CdfFn cauchy_cdf_fit(std::span<const double> data) {
  const std::vector<double> x = sorted_copy(data);
  const double loc = stats::quantile_type7(x, 0.5);
  const double scale =
      0.5 * (stats::quantile_type7(x, 0.75) - stats::quantile_type7(x, 0.25));
  if (!(scale > 0.0)) throw ZeroVariance("fit_candidate: constant data for cauchy");
  return [loc, scale](double t) {
    return 0.5 + std::atan((t - loc) / scale) / std::numbers::pi;
  };
}

CdfFn logistic_cdf_fit(std::span<const double> data) {
  const double m = stats::mean(data);
  const double v = stats::sample_variance(data);
  if (!(v > 0.0)) throw ZeroVariance("fit_candidate: constant data for logistic");
  const double s = std::sqrt(3.0 * v) / std::numbers::pi;
  return [m, s](double t) { return 1.0 / (1.0 + std::exp(-(t - m) / s)); };
}

CdfFn scale_pair_cdf_fit(std::span<const double> data, const EmOptions& opts) {
  const double s2 = stats::sample_variance(data);
  if (!(s2 > 0.0)) {
    throw ZeroVariance("fit_candidate: constant data for scale mixture");
  }
  // A few spread-out starts; the likelihood picks the winner.
  const double starts[][3] = {
      {0.5, 0.5 * s2, 2.0 * s2},
      {0.9, 0.5 * s2, 2.0 * s2},
      {0.75, 0.25 * s2, 4.0 * s2},
  };
  VoxelFit best = em_fit_null_pair(data, starts[0][0], starts[0][1], starts[0][2], opts);
  for (int i = 1; i < 3; ++i) {
    VoxelFit fit = em_fit_null_pair(data, starts[i][0], starts[i][1], starts[i][2], opts);
    if (fit.loglik > best.loglik) best = fit;
  }
  const MixtureParams params = best.params;
  return [params](double t) { return mixture_cdf(params, t); };
}

}  // namespace

CdfFn fit_candidate(CandidateFamily family, std::span<const double> data,
                    const EmOptions& em_opts) {
  if (data.size() < 8) {
    throw DataTooShort("fit_candidate: need at least 8 observations");
  }
  switch (family) {
    case CandidateFamily::gaussian: return gaussian_cdf_fit(data);
    case CandidateFamily::laplace: return laplace_cdf_fit(data);
    case CandidateFamily::cauchy: return cauchy_cdf_fit(data);
    case CandidateFamily::logistic: return logistic_cdf_fit(data);
    case CandidateFamily::gaussian_scale_mixture_2:
      return scale_pair_cdf_fit(data, em_opts);
    case CandidateFamily::gaussian_mixture_3: {
      const MixtureParams params = fit_voxel_unconstrained(data, em_opts).params;
      return [params](double t) { return mixture_cdf(params, t); };
    }
  }
  throw Error("fit_candidate: unknown family");
}

double ks_statistic(std::span<const double> data, const CdfFn& cdf) {
  if (data.empty()) throw DataTooShort("ks_statistic: empty sample");
  const std::vector<double> x = sorted_copy(data);
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    const double hi = (static_cast<double>(i) + 1.0) / n - f;
    const double lo = f - static_cast<double>(i) / n;
    d = std::max(d, std::max(hi, lo));
  }
  return d;
}

GofTable gof_compare(const EffectsTable& effects,
                     const std::vector<CandidateFamily>& families,
                     std::uint64_t split_seed, const EmOptions& em_opts,
                     int workers) {
  if (effects.n_subjects < 16) {
    throw DataTooShort("gof_compare: need at least 16 subjects for a split");
  }
  GofTable table;
  table.families = families;

  std::vector<int> perm(static_cast<std::size_t>(effects.n_subjects));
  std::iota(perm.begin(), perm.end(), 0);
  KeyedRng rng(split_seed, StreamTag::subject_split);
  keyed_shuffle(perm, rng);
  const std::size_t n_train = perm.size() / 2;
  table.train_subjects.assign(perm.begin(), perm.begin() + n_train);
  table.test_subjects.assign(perm.begin() + n_train, perm.end());

  const std::size_t m = effects.n_voxels();
  const std::size_t nf = families.size();
  table.ks.assign(m, std::vector<double>(nf, std::numeric_limits<double>::quiet_NaN()));
  parallel_for(m, workers, [&](std::size_t v) {
    const std::span<const double> row = effects.row(v);
    std::vector<double> train, test;
    train.reserve(table.train_subjects.size());
    test.reserve(table.test_subjects.size());
    for (int s : table.train_subjects) train.push_back(row[static_cast<std::size_t>(s)]);
    for (int s : table.test_subjects) test.push_back(row[static_cast<std::size_t>(s)]);
    for (std::size_t f = 0; f < nf; ++f) {
      try {
        const CdfFn cdf = fit_candidate(families[f], train, em_opts);
        table.ks[v][f] = ks_statistic(test, cdf);
      } catch (const Error&) {
        // Left as NaN: one pathological voxel must not abort the volume.
      }
    }
  });

  for (std::size_t f = 0; f < nf; ++f) {
    std::vector<double> vals;
    vals.reserve(m);
    for (std::size_t v = 0; v < m; ++v) {
      if (!std::isnan(table.ks[v][f])) vals.push_back(table.ks[v][f]);
    }
    FamilySummary s;
    s.family = families[f];
    s.n_voxels_ok = vals.size();
    if (!vals.empty()) {
      std::sort(vals.begin(), vals.end());
      s.median = stats::quantile_type7(vals, 0.5);
      s.q1 = stats::quantile_type7(vals, 0.25);
      s.q3 = stats::quantile_type7(vals, 0.75);
      const double iqr = s.q3 - s.q1;
      s.whisker_lo = s.q3;
      s.whisker_hi = s.q1;
      for (double v : vals) {
        if (v >= s.q1 - 1.5 * iqr) { s.whisker_lo = v; break; }
      }
      for (auto it = vals.rbegin(); it != vals.rend(); ++it) {
        if (*it <= s.q3 + 1.5 * iqr) { s.whisker_hi = *it; break; }
      }
    }
    table.summaries.push_back(s);
  }
  return table;
}

}  // namespace prevmap
