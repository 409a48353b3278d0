#include "prevmap/em.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "prevmap/errors.hpp"
#include "prevmap/stats.hpp"

namespace prevmap {

namespace {

constexpr int kMinSubjects = 8;
// Absolute variance floor used when the sample variance itself is zero
// (all-identical data); keeps degenerate voxels representable.
constexpr double kDegenerateVar = 1e-12;

void require_length(std::size_t n) {
  if (n < kMinSubjects) {
    throw DataTooShort("fit requires at least 8 observations, got " +
                       std::to_string(n));
  }
}

std::vector<double> sorted_copy(std::span<const double> data) {
  std::vector<double> x(data.begin(), data.end());
  std::sort(x.begin(), x.end());
  return x;
}

std::array<double, 4> raw_moments(std::span<const double> x) {
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double v2 = v * v;
    m1 += v;
    m2 += v2;
    m3 += v2 * v;
    m4 += v2 * v2;
  }
  const double n = static_cast<double>(x.size());
  return {m1 / n, m2 / n, m3 / n, m4 / n};
}

MixtureParams fallback_start(std::span<const double> x) {
  const double s2 = std::max(stats::sample_variance(x), kDegenerateVar);
  const double s = std::sqrt(s2);
  const double mu = std::clamp(stats::mean(x) / 0.1, -3.0 * s, 3.0 * s);
  return {0.45, 0.45, 0.1, mu, 0.5 * s2, 2.0 * s2, s2};
}

}  // namespace

void EmOptions::validate() const {
  if (max_iter < 1) throw Error("EmOptions: max_iter must be positive");
  if (!(rel_tol > 0)) throw Error("EmOptions: rel_tol must be positive");
  if (!(var_floor_frac > 0)) throw Error("EmOptions: var_floor_frac must be positive");
  if (!(grid_step > 0) || !(grid_step < 1)) {
    throw Error("EmOptions: grid_step must lie in (0,1)");
  }
  const double cells = 1.0 / grid_step;
  if (std::fabs(cells - std::round(cells)) > 1e-9 * cells) {
    throw Error("EmOptions: grid_step must divide 1 into an integer number of cells");
  }
  if (top_k_starts < 1) throw Error("EmOptions: top_k_starts must be >= 1");
}

std::optional<MixtureParams> solve_moments_given_weights(
    double p1, double p2, const std::array<double, 4>& m,
    std::span<const double> data) {
  if (!(p1 > 0.0) || !(p2 > 0.0)) return std::nullopt;
  const double p3 = 1.0 - p1 - p2;
  if (!(p3 > 0.0)) return std::nullopt;

  const double mu = m[0] / p3;
  if (std::fabs(mu) < 1e-10) return std::nullopt;
  const double var3 = (m[2] / p3 - mu * mu * mu) / (3.0 * mu);
  if (!(var3 > 0.0) || !std::isfinite(var3)) return std::nullopt;

  // Remaining system: p1 v1 + p2 v2 = A, 3 p1 v1^2 + 3 p2 v2^2 = B.
  const double A = m[1] - p3 * (mu * mu + var3);
  const double B =
      m[3] - p3 * (mu * mu * mu * mu + 6.0 * mu * mu * var3 + 3.0 * var3 * var3);

  // Substituting v1 = (A - p2 v2)/p1 yields
  // p2 (p1 + p2) v2^2 - 2 A p2 v2 + (A^2 - B p1 / 3) = 0.
  const double qa = p2 * (p1 + p2);
  const double qb = -2.0 * A * p2;
  const double qc = A * A - B * p1 / 3.0;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (!(disc >= 0.0)) return std::nullopt;

  const double sq = std::sqrt(disc);
  std::optional<MixtureParams> best;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (const double v2 : {(-qb + sq) / (2.0 * qa), (-qb - sq) / (2.0 * qa)}) {
    const double v1 = (A - p2 * v2) / p1;
    if (!(v1 > 0.0) || !(v2 > 0.0) || !std::isfinite(v1) || !std::isfinite(v2)) {
      continue;
    }
    MixtureParams cand(p1, p2, p3, mu, v1, v2, var3);
    if (!best) {
      best = cand;
      if (!data.empty()) best_ll = mixture_loglik(cand, data);
    } else if (!data.empty()) {
      const double ll = mixture_loglik(cand, data);
      if (ll > best_ll) {
        best = cand;
        best_ll = ll;
      }
    }
    // With empty data the first (larger-v2) root stands.
  }
  return best;
}

std::vector<MixtureParams> moment_init_grid(std::span<const double> data,
                                            const EmOptions& opts) {
  require_length(data.size());
  opts.validate();
  const std::vector<double> x = sorted_copy(data);
  const std::array<double, 4> m = raw_moments(x);

  const int cells = static_cast<int>(std::round(1.0 / opts.grid_step));
  struct Scored {
    double ll;
    MixtureParams params;
  };
  std::vector<Scored> feasible;
  for (int i = 1; i <= cells - 2; ++i) {
    for (int j = 1; i + j <= cells - 1; ++j) {
      const double p1 = i * opts.grid_step;
      const double p2 = j * opts.grid_step;
      if (auto cand = solve_moments_given_weights(p1, p2, m, x)) {
        feasible.push_back({mixture_loglik(*cand, x), *cand});
      }
    }
  }
  if (feasible.empty()) return {fallback_start(x)};

  std::stable_sort(feasible.begin(), feasible.end(),
                   [](const Scored& a, const Scored& b) { return a.ll > b.ll; });
  const std::size_t k =
      std::min<std::size_t>(feasible.size(), static_cast<std::size_t>(opts.top_k_starts));
  std::vector<MixtureParams> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(feasible[i].params);
  return out;
}

namespace {

// Shared EM core. With three_components == false the active component is
// frozen out (p3 = 0) and only the two null variances update.
VoxelFit em_core(std::span<const double> x, double p1, double p2, double p3,
                 double mu, double v1, double v2, double v3,
                 const EmOptions& opts, bool three_components,
                 std::vector<double>* trace) {
  const double n = static_cast<double>(x.size());
  const double s2 = stats::sample_variance(x);
  const double floor = s2 > 0.0 ? opts.var_floor_frac * s2 : kDegenerateVar;

  std::vector<double> g3(x.size(), 0.0);
  double ll_prev = -std::numeric_limits<double>::infinity();
  double ll = ll_prev;
  bool converged = false;
  [[maybe_unused]] bool clamped = false;
  int iter = 0;

  while (iter < opts.max_iter) {
    ++iter;
    // E step; also evaluates the log-likelihood of the entering parameters.
    double s1 = 0, s2w = 0, s3 = 0, sxx1 = 0, sxx2 = 0, sx3 = 0;
    ll = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double xi = x[i];
      const double w1 = p1 * stats::normal_pdf(xi, 0.0, v1);
      const double w2 = p2 * stats::normal_pdf(xi, 0.0, v2);
      const double w3 =
          three_components ? p3 * stats::normal_pdf(xi, mu, v3) : 0.0;
      const double denom = w1 + w2 + w3;
      ll += std::log(std::max(denom, std::numeric_limits<double>::min()));
      double r1, r2, r3;
      if (denom > 0.0 && std::isfinite(denom)) {
        r1 = w1 / denom;
        r2 = w2 / denom;
        r3 = w3 / denom;
      } else {
        // All densities underflowed: hard-assign by closest component in
        // floored log-density terms.
        const double l1 = p1 > 0 ? std::log(p1) - 0.5 * xi * xi / v1 - 0.5 * std::log(v1)
                                 : -std::numeric_limits<double>::infinity();
        const double l2 = p2 > 0 ? std::log(p2) - 0.5 * xi * xi / v2 - 0.5 * std::log(v2)
                                 : -std::numeric_limits<double>::infinity();
        const double l3 = (three_components && p3 > 0)
                              ? std::log(p3) - 0.5 * (xi - mu) * (xi - mu) / v3 -
                                    0.5 * std::log(v3)
                              : -std::numeric_limits<double>::infinity();
        r1 = r2 = r3 = 0.0;
        if (l1 >= l2 && l1 >= l3) r1 = 1.0;
        else if (l2 >= l3) r2 = 1.0;
        else r3 = 1.0;
      }
      s1 += r1;
      s2w += r2;
      s3 += r3;
      sxx1 += r1 * xi * xi;
      sxx2 += r2 * xi * xi;
      sx3 += r3 * xi;
      g3[i] = r3;
    }
    if (trace) trace->push_back(ll);
#ifndef NDEBUG
    // EM ascent, modulo the variance clamp which can step off the ML path.
    assert(clamped || ll >= ll_prev - 1e-9 * std::max(1.0, std::fabs(ll_prev)));
#endif
    // Per-observation change keeps the rule invariant under data rescaling
    // (the log-likelihood itself shifts by n log c, its differences do not).
    if (iter > 1 && std::fabs(ll - ll_prev) <= opts.rel_tol * n) {
      converged = true;
      break;
    }
    ll_prev = ll;

    // M step.
    p1 = s1 / n;
    p2 = s2w / n;
    if (three_components) p3 = s3 / n;
    if (s1 > 0.0) v1 = sxx1 / s1;
    if (s2w > 0.0) v2 = sxx2 / s2w;
    if (three_components && s3 > 0.0) {
      mu = sx3 / s3;
      double sv3 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        sv3 += g3[i] * (x[i] - mu) * (x[i] - mu);
      }
      v3 = sv3 / s3;
    }
    clamped = false;
    if (v1 < floor) { v1 = floor; clamped = true; }
    if (v2 < floor) { v2 = floor; clamped = true; }
    if (v3 < floor) { v3 = floor; clamped = true; }
    if (v1 > v2) {
      std::swap(v1, v2);
      std::swap(p1, p2);
    }
  }

  MixtureParams params = three_components
                             ? MixtureParams(p1, p2, p3, mu, v1, v2, v3)
                             : MixtureParams(p1, p2, 0.0, 0.0, v1, v2, v2);
  VoxelFit fit{params, mixture_loglik(params, x), converged, iter, 1, false, 0.0};
  return fit;
}

}  // namespace

VoxelFit em_fit(std::span<const double> data, const MixtureParams& init,
                const EmOptions& opts, std::vector<double>* trace) {
  require_length(data.size());
  opts.validate();
  const std::vector<double> x = sorted_copy(data);
  return em_core(x, init.p1(), init.p2(), init.p3(), init.mu(), init.var1(),
                 init.var2(), init.var3(), opts, true, trace);
}

VoxelFit em_fit_null_pair(std::span<const double> data, double p1, double var1,
                          double var2, const EmOptions& opts) {
  require_length(data.size());
  opts.validate();
  const std::vector<double> x = sorted_copy(data);
  if (var1 > var2) std::swap(var1, var2);
  return em_core(x, p1, 1.0 - p1, 0.0, 0.0, var1, var2, var2, opts, false,
                 nullptr);
}

namespace detail {

double donoho_threshold_at(double mu, double weighted_null_var) {
  if (weighted_null_var == 0.0) return mu != 0.0 ? 0.0 : 1.0;
  return std::exp(-mu * mu / (2.0 * weighted_null_var));
}

}  // namespace detail

double donoho_threshold(const MixtureParams& params) {
  return detail::donoho_threshold_at(
      params.mu(), params.p1() * params.var1() + params.p2() * params.var2());
}

VoxelFit apply_prevalence_constraint(VoxelFit fit, std::span<const double> data,
                                     const EmOptions& opts) {
  // Null scale for the estimability bound comes from the constrained
  // two-component refit. The unconstrained fit understates it badly when a
  // small spurious active component has absorbed the tails, which would let
  // exactly those fits through; the refit folds the tails back into the
  // null before the bound is evaluated.
  const double pair_mass = fit.params.p1() + fit.params.p2();
  double p1 = 0.5, v1, v2;
  if (pair_mass > 0.0) {
    p1 = fit.params.p1() / pair_mass;
    v1 = fit.params.var1();
    v2 = fit.params.var2();
  } else {
    const double s2 = std::max(stats::sample_variance(data), kDegenerateVar);
    v1 = 0.5 * s2;
    v2 = 2.0 * s2;
  }
  VoxelFit refit = em_fit_null_pair(data, p1, v1, v2, opts);
  const double null_var = refit.params.p1() * refit.params.var1() +
                          refit.params.p2() * refit.params.var2();
  const double threshold = detail::donoho_threshold_at(fit.params.mu(), null_var);
  fit.threshold_value = threshold;
  if (fit.params.p3() >= threshold) return fit;

  refit.n_starts_tried = fit.n_starts_tried;
  refit.thresholded = true;
  refit.threshold_value = threshold;
  return refit;
}

VoxelFit fit_voxel_unconstrained(std::span<const double> data,
                                 const EmOptions& opts) {
  require_length(data.size());
  opts.validate();
  const std::vector<double> x = sorted_copy(data);
  const std::vector<MixtureParams> starts = moment_init_grid(x, opts);

  const double s2 = stats::sample_variance(x);
  const double floor = s2 > 0.0 ? opts.var_floor_frac * s2 : kDegenerateVar;
  const double floor_edge = floor * (1.0 + 1e-9);

  std::optional<VoxelFit> best, best_interior;
  double top_init_ll = -std::numeric_limits<double>::infinity();
  for (const MixtureParams& start : starts) {
    top_init_ll = std::max(top_init_ll, mixture_loglik(start, x));
    VoxelFit fit = em_fit(x, start, opts);
    if (!best || fit.loglik > best->loglik) best = fit;
    const bool pinned = fit.params.var1() <= floor_edge ||
                        fit.params.var2() <= floor_edge ||
                        fit.params.var3() <= floor_edge;
    if (!pinned && (!best_interior || fit.loglik > best_interior->loglik)) {
      best_interior = fit;
    }
  }
  // A solution pinned to the variance floor is the one-point singularity the
  // floor exists to suppress, not a population estimate. Prefer the best
  // interior solution whenever it still dominates every initialization
  // candidate; fall back to the pinned one otherwise.
  VoxelFit out = *best;
  if (best_interior && best_interior->loglik >= top_init_ll - 1e-9) {
    out = *best_interior;
  }
  out.n_starts_tried = static_cast<int>(starts.size());
  return out;
}

VoxelFit fit_voxel(std::span<const double> data, const EmOptions& opts) {
  const std::vector<double> x = sorted_copy(data);
  return apply_prevalence_constraint(fit_voxel_unconstrained(x, opts), x, opts);
}

}  // namespace prevmap
