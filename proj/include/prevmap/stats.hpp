#pragma once

// Shared scalar statistics: normal pdf/cdf, Student-t tail probabilities via
// the regularized incomplete beta function, sample quantiles, Pearson
// correlation, and adaptive Gauss-Kronrod quadrature.

#include <functional>
#include <span>
#include <vector>

namespace prevmap::stats {

double normal_pdf(double x, double mean, double var);
double normal_cdf(double x, double mean, double var);
inline double std_normal_cdf(double z) { return normal_cdf(z, 0.0, 1.0); }

// Regularized incomplete beta I_x(a, b), a,b > 0, x in [0,1].
double ibeta_reg(double a, double b, double x);

// Two-sided p-value of a Student-t statistic with df degrees of freedom.
double t_two_sided_p(double t, double df);

double mean(std::span<const double> x);
double sample_variance(std::span<const double> x);  // unbiased, n-1 divisor

double median(std::vector<double> x);  // by value: sorts its copy
// Linear-interpolation quantile (R type 7) of an ascending-sorted sample.
double quantile_type7(std::span<const double> sorted, double q);

double pearson(std::span<const double> x, std::span<const double> y);

// Adaptive 15-point Gauss-Kronrod quadrature of f over [a, b] to an absolute
// tolerance. Throws QuadratureFailure if the subdivision budget runs out
// before the tolerance is met.
double integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol, int max_depth = 48);

}  // namespace prevmap::stats
