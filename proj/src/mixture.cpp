#include "prevmap/mixture.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "prevmap/errors.hpp"
#include "prevmap/stats.hpp"

namespace prevmap {

MixtureParams::MixtureParams(double p1, double p2, double p3, double mu,
                             double var1, double var2, double var3)
    : p1_(p1), p2_(p2), p3_(p3), mu_(mu), var1_(var1), var2_(var2), var3_(var3) {
  if (!(p1_ >= 0.0) || !(p2_ >= 0.0) || !(p3_ >= 0.0)) {
    throw InvariantViolation("MixtureParams: negative weight");
  }
  const double sum = p1_ + p2_ + p3_;
  if (!(std::fabs(sum - 1.0) <= 1e-9)) {
    throw InvariantViolation("MixtureParams: weights do not sum to 1");
  }
  p1_ /= sum;
  p2_ /= sum;
  p3_ /= sum;
  if (!(var1_ > 0.0) || !(var2_ > 0.0) || !(var3_ > 0.0)) {
    throw InvariantViolation("MixtureParams: non-positive variance");
  }
  if (var1_ > var2_) {
    std::swap(var1_, var2_);
    std::swap(p1_, p2_);
  }
  if (p3_ == 0.0) mu_ = 0.0;
  if (!std::isfinite(mu_)) {
    throw InvariantViolation("MixtureParams: non-finite mu");
  }
}

namespace detail {

double mixture_pdf_raw(double p1, double p2, double p3, double mu, double var1,
                       double var2, double var3, double x) {
  return p1 * stats::normal_pdf(x, 0.0, var1) +
         p2 * stats::normal_pdf(x, 0.0, var2) +
         p3 * stats::normal_pdf(x, mu, var3);
}

double mixture_loglik_raw(double p1, double p2, double p3, double mu,
                          double var1, double var2, double var3,
                          std::span<const double> data) {
  constexpr double kFloor = std::numeric_limits<double>::min();
  double ll = 0.0;
  for (double x : data) {
    const double d = mixture_pdf_raw(p1, p2, p3, mu, var1, var2, var3, x);
    ll += std::log(d > kFloor ? d : kFloor);
  }
  return ll;
}

}  // namespace detail

double mixture_pdf(const MixtureParams& p, double x) {
  return detail::mixture_pdf_raw(p.p1(), p.p2(), p.p3(), p.mu(), p.var1(),
                                 p.var2(), p.var3(), x);
}

double mixture_cdf(const MixtureParams& p, double x) {
  return p.p1() * stats::normal_cdf(x, 0.0, p.var1()) +
         p.p2() * stats::normal_cdf(x, 0.0, p.var2()) +
         p.p3() * stats::normal_cdf(x, p.mu(), p.var3());
}

double mixture_loglik(const MixtureParams& p, std::span<const double> data) {
  return detail::mixture_loglik_raw(p.p1(), p.p2(), p.p3(), p.mu(), p.var1(),
                                    p.var2(), p.var3(), data);
}

}  // namespace prevmap
