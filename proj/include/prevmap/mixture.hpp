#pragma once

// Three-component Gaussian mixture for voxel-wise effect distributions: two
// zero-mean "inactive" components plus one shifted "active" component whose
// weight p3 is the prevalence of activation.

#include <span>

namespace prevmap {

class MixtureParams {
 public:
  // Validates and canonicalizes.
  //
  // Weights must be non-negative and sum to 1 within 1e-9; they are
  // renormalized to exact unity, and larger violations throw
  // InvariantViolation. Variances must be strictly positive. The null
  // components are stored so that var1 <= var2 (swapped if needed; ties
  // keep the given order). A mixture with p3 == 0 reports mu == 0.
  MixtureParams(double p1, double p2, double p3, double mu, double var1,
                double var2, double var3);

  double p1() const { return p1_; }
  double p2() const { return p2_; }
  double p3() const { return p3_; }
  double mu() const { return mu_; }
  double var1() const { return var1_; }
  double var2() const { return var2_; }
  double var3() const { return var3_; }

 private:
  double p1_, p2_, p3_, mu_, var1_, var2_, var3_;
};

// p1*phi(x; 0, var1) + p2*phi(x; 0, var2) + p3*phi(x; mu, var3)
double mixture_pdf(const MixtureParams& params, double x);

// Weighted sum of the three Gaussian CDFs.
double mixture_cdf(const MixtureParams& params, double x);

// Sum of log densities, each floored at the smallest positive normal double
// so an extreme outlier cannot produce -inf and break fit comparisons.
double mixture_loglik(const MixtureParams& params, std::span<const double> data);

namespace detail {
// Same evaluation on raw parameter values; used by the EM inner loop.
double mixture_pdf_raw(double p1, double p2, double p3, double mu, double var1,
                       double var2, double var3, double x);
double mixture_loglik_raw(double p1, double p2, double p3, double mu,
                          double var1, double var2, double var3,
                          std::span<const double> data);
}  // namespace detail

}  // namespace prevmap
