#include "prevmap/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "prevmap/errors.hpp"
#include "prevmap/stats.hpp"

namespace prevmap {

namespace detail {

RankedData rank_absolute(std::span<const double> data) {
  RankedData r;
  for (double v : data) {
    if (v != 0.0) r.values.push_back(v);
  }
  const std::size_t n = r.values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(r.values[a]) < std::fabs(r.values[b]);
  });

  r.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n &&
           std::fabs(r.values[order[j + 1]]) == std::fabs(r.values[order[i]])) {
      ++j;
    }
    // Positions i..j share |x|: assign the midrank (i+1 + ... + j+1)/(j-i+1).
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = midrank;
    const double t = static_cast<double>(j - i + 1);
    r.tie_correction += t * t * t - t;
    i = j + 1;
  }
  for (std::size_t k = 0; k < n; ++k) {
    if (r.values[k] > 0.0) r.w_plus += r.ranks[k];
  }
  return r;
}

double signed_rank_exact_p(const RankedData& r) {
  // Doubling every midrank makes all achievable W+ values integers, so the
  // full 2^n sign-assignment distribution folds into one exact count table.
  const std::size_t n = r.values.size();
  std::vector<long long> dr(n);
  long long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    dr[i] = std::llround(2.0 * r.ranks[i]);
    total += dr[i];
  }
  std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
  count[0] = 1.0;
  long long reach = 0;
  for (std::size_t i = 0; i < n; ++i) {
    reach += dr[i];
    for (long long s = reach; s >= dr[i]; --s) {
      count[static_cast<std::size_t>(s)] +=
          count[static_cast<std::size_t>(s - dr[i])];
    }
  }
  const double denom = std::ldexp(1.0, static_cast<int>(n));  // 2^n
  const long long w2 = std::llround(2.0 * r.w_plus);
  double below = 0.0, above = 0.0;
  for (long long s = 0; s <= total; ++s) {
    if (s <= w2) below += count[static_cast<std::size_t>(s)];
    if (s >= w2) above += count[static_cast<std::size_t>(s)];
  }
  return std::min(1.0, 2.0 * std::min(below, above) / denom);
}

double signed_rank_normal_p(const RankedData& r) {
  const double n = static_cast<double>(r.values.size());
  const double mean = n * (n + 1.0) / 4.0;
  const double var =
      n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - r.tie_correction / 48.0;
  const double d = r.w_plus - mean;
  if (d == 0.0) return 1.0;
  const double z = (std::fabs(d) - 0.5) / std::sqrt(var);
  return std::min(1.0, 2.0 * (1.0 - stats::std_normal_cdf(z)));
}

}  // namespace detail

TestResult signed_rank_test(std::span<const double> data) {
  detail::RankedData r = detail::rank_absolute(data);
  const std::size_t n = r.values.size();
  if (n < 5) {
    throw TooFewNonzero("signed_rank_test: " + std::to_string(n) +
                        " nonzero values, need at least 5");
  }
  TestResult out;
  out.statistic = r.w_plus;
  out.n_effective = static_cast<int>(n);
  if (n <= 20) {
    out.method = TestMethod::signed_rank_exact;
    out.p_value = detail::signed_rank_exact_p(r);
  } else {
    out.method = TestMethod::signed_rank_normal;
    out.p_value = detail::signed_rank_normal_p(r);
  }
  return out;
}

TestResult t_test(std::span<const double> data) {
  const std::size_t n = data.size();
  if (n < 2) throw DataTooShort("t_test: need at least 2 observations");
  const double m = stats::mean(data);
  const double s2 = stats::sample_variance(data);
  if (!(s2 > 0.0)) throw ZeroVariance("t_test: sample variance is zero");
  const double t = m / std::sqrt(s2 / static_cast<double>(n));
  return {t, stats::t_two_sided_p(t, static_cast<double>(n - 1)), TestMethod::t,
          static_cast<int>(n)};
}

FdrOutcome bh_adjust(std::span<const double> p_values, double q_level) {
  const std::size_t m = p_values.size();
  for (double p : p_values) {
    if (!(p >= 0.0) || !(p <= 1.0)) {
      throw InvariantViolation("bh_adjust: p-value outside [0,1]");
    }
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return p_values[a] < p_values[b];
  });

  FdrOutcome out;
  out.q_level = q_level;
  out.q_values.assign(m, 1.0);
  out.reject.assign(m, 0);
  double running = 1.0;
  for (std::size_t k = m; k-- > 0;) {
    const double adj =
        p_values[order[k]] * static_cast<double>(m) / static_cast<double>(k + 1);
    running = std::min(running, adj);
    out.q_values[order[k]] = running;
  }
  for (std::size_t i = 0; i < m; ++i) {
    out.reject[i] = out.q_values[i] <= q_level ? 1 : 0;
  }
  return out;
}

std::vector<double> signed_prevalence_map(const std::vector<VoxelFit>& fits,
                                          const FdrOutcome& fdr) {
  if (fits.size() != fdr.reject.size()) {
    throw LengthMismatch("signed_prevalence_map: fits and FDR outcome differ in length");
  }
  std::vector<double> map(fits.size(), 0.0);
  for (std::size_t i = 0; i < fits.size(); ++i) {
    if (!fdr.reject[i]) continue;
    const double mu = fits[i].params.mu();
    const double sign = mu > 0.0 ? 1.0 : (mu < 0.0 ? -1.0 : 0.0);
    map[i] = fits[i].params.p3() * sign;
  }
  return map;
}

}  // namespace prevmap
