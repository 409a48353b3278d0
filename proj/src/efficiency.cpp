#include "prevmap/efficiency.hpp"

#include <cmath>
#include <vector>

#include "prevmap/errors.hpp"
#include "prevmap/inference.hpp"
#include "prevmap/parallel.hpp"
#include "prevmap/rng.hpp"
#include "prevmap/stats.hpp"

namespace prevmap {

void NuisanceSpec::validate() const {
  if (!(null_w1 >= 0.0) || !(null_w2 >= 0.0) ||
      std::fabs(null_w1 + null_w2 - 1.0) > 1e-9) {
    throw Error("NuisanceSpec: null weights must be non-negative and sum to 1");
  }
  if (!(null_var1 > 0.0) || !(null_var2 > 0.0) || !(active_var > 0.0)) {
    throw Error("NuisanceSpec: variances must be positive");
  }
}

double efficacy_t(const NuisanceSpec& spec) {
  spec.validate();
  const double null_var = spec.null_w1 * spec.null_var1 + spec.null_w2 * spec.null_var2;
  return spec.active_mu / std::sqrt(null_var);
}

double efficacy_signed_rank(const NuisanceSpec& spec) {
  spec.validate();
  const double mu = spec.active_mu;
  const double sd = std::sqrt(spec.active_var);
  // int f_active(x) F_null(x) dx, taken over the effective support of the
  // active density (the integrand vanishes with its tails since F <= 1).
  const auto integrand = [&spec](double x) {
    const double f = stats::normal_pdf(x, spec.active_mu, spec.active_var);
    const double F = spec.null_w1 * stats::normal_cdf(x, 0.0, spec.null_var1) +
                     spec.null_w2 * stats::normal_cdf(x, 0.0, spec.null_var2);
    return f * F;
  };
  const double overlap =
      stats::integrate(integrand, mu - 40.0 * sd, mu + 40.0 * sd, 1e-10);
  return 2.0 * (overlap - 0.5) * std::sqrt(3.0);
}

double pitman_are(const NuisanceSpec& spec) {
  spec.validate();
  if (spec.active_mu == 0.0) return 0.0;
  const double c_t = efficacy_t(spec);
  const double c_w = efficacy_signed_rank(spec);
  if (c_w == 0.0) {
    throw DegenerateAlternative("pitman_are: signed-rank efficacy vanished");
  }
  const double ratio = c_w / c_t;
  return ratio * ratio;
}

std::vector<PowerRow> power_curve_mc(const NuisanceSpec& spec, int n,
                                     std::span<const double> p_grid,
                                     double alpha, int reps, std::uint64_t seed,
                                     int workers) {
  spec.validate();
  if (n < 8) throw DataTooShort("power_curve_mc: need at least 8 subjects");
  if (reps < 1) throw Error("power_curve_mc: need at least one replication");

  const double sd1 = std::sqrt(spec.null_var1);
  const double sd2 = std::sqrt(spec.null_var2);
  const double sda = std::sqrt(spec.active_var);

  std::vector<PowerRow> rows;
  rows.reserve(p_grid.size());
  for (std::size_t ip = 0; ip < p_grid.size(); ++ip) {
    const double p = p_grid[ip];
    std::vector<std::uint8_t> rej_t(static_cast<std::size_t>(reps), 0);
    std::vector<std::uint8_t> rej_w(static_cast<std::size_t>(reps), 0);
    parallel_for(static_cast<std::size_t>(reps), workers, [&](std::size_t rep) {
      KeyedRng rng(seed, StreamTag::power_mc, ip, rep);
      std::vector<double> x(static_cast<std::size_t>(n));
      for (double& v : x) {
        if (rng.next_unit() < p) {
          v = rng.next_normal(spec.active_mu, sda);
        } else {
          v = rng.next_normal(0.0, rng.next_unit() < spec.null_w1 ? sd1 : sd2);
        }
      }
      rej_t[rep] = t_test(x).p_value <= alpha ? 1 : 0;
      rej_w[rep] = signed_rank_test(x).p_value <= alpha ? 1 : 0;
    });
    PowerRow row;
    row.p = p;
    double st = 0, sw = 0;
    for (int r = 0; r < reps; ++r) {
      st += rej_t[static_cast<std::size_t>(r)];
      sw += rej_w[static_cast<std::size_t>(r)];
    }
    row.power_t = st / reps;
    row.power_wilcoxon = sw / reps;
    row.se_t = std::sqrt(row.power_t * (1.0 - row.power_t) / reps);
    row.se_wilcoxon =
        std::sqrt(row.power_wilcoxon * (1.0 - row.power_wilcoxon) / reps);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace prevmap
