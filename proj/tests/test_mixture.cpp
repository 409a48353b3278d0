#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "prevmap/errors.hpp"
#include "prevmap/mixture.hpp"
#include "prevmap/rng.hpp"

using namespace prevmap;

namespace {

// Test-local adaptive Simpson integration, independent of the library's
// quadrature, used as the oracle for pdf normalization and the cdf.
double simpson(const std::function<double(double)>& f, double a, double b,
               double tol, int depth = 40) {
  const double c = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fc = f(c);
  std::function<double(double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fhi, double fmid, double eps,
          int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lmid = 0.5 * (lo + mid), rmid = 0.5 * (mid + hi);
    const double fl = f(lmid), fr = f(rmid);
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    const double left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid);
    const double right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi);
    if (d <= 0 || std::fabs(left + right - whole) < 15.0 * eps) {
      return left + right + (left + right - whole) / 15.0;
    }
    return rec(lo, mid, flo, fmid, fl, 0.5 * eps, d - 1) +
           rec(mid, hi, fmid, fhi, fr, 0.5 * eps, d - 1);
  };
  return rec(a, b, fa, fb, fc, tol, depth);
}

MixtureParams random_params(KeyedRng& rng) {
  double w1 = rng.next_unit(), w2 = rng.next_unit(), w3 = rng.next_unit();
  const double sum = w1 + w2 + w3;
  w1 /= sum;
  w2 /= sum;
  w3 /= sum;
  const double v1 = 0.05 + 2.0 * rng.next_unit();
  const double v2 = 0.05 + 2.0 * rng.next_unit();
  const double v3 = 0.05 + 2.0 * rng.next_unit();
  const double mu = 6.0 * (rng.next_unit() - 0.5);
  return {w1, w2, w3, mu, v1, v2, v3};
}

double sigma_span(const MixtureParams& p) {
  const double top = std::max({std::sqrt(p.var1()), std::sqrt(p.var2()),
                               std::sqrt(p.var3())});
  return std::fabs(p.mu()) + top;
}

}  // namespace

TEST_CASE("pdf matches hand values") {
  const MixtureParams std_normal(1, 0, 0, 0, 1, 1, 1);
  CHECK(mixture_pdf(std_normal, 0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-12));

  const MixtureParams half(0.5, 0.5, 0, 0, 1, 4, 1);
  CHECK(mixture_pdf(half, 0.0) == doctest::Approx(0.2992067103010745).epsilon(1e-12));
}

TEST_CASE("fig-1 style generating density integrates to one") {
  const double p = 0.5;
  const MixtureParams params(0.88 * (1 - p), 0.12 * (1 - p), p, 1.0, 0.15, 1.0, 0.25);
  const double total = simpson([&](double x) { return mixture_pdf(params, x); },
                               -50.0, 50.0, 1e-12);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cdf basics") {
  const MixtureParams sym(0.6, 0.4, 0, 0, 0.5, 2.0, 1.0);
  CHECK(mixture_cdf(sym, 0.0) == doctest::Approx(0.5).epsilon(1e-12));

  const MixtureParams std_normal(1, 0, 0, 0, 1, 1, 1);
  CHECK(mixture_cdf(std_normal, 1.959964) == doctest::Approx(0.975).epsilon(1e-6));
}

TEST_CASE("cdf agrees with quadrature of the pdf") {
  KeyedRng rng(42);
  for (int rep = 0; rep < 5; ++rep) {
    const MixtureParams params = random_params(rng);
    const double span = 60.0 * sigma_span(params);
    for (double x : {-1.3, 0.0, 0.4, 2.2}) {
      const double by_quad = simpson(
          [&](double t) { return mixture_pdf(params, t); }, -span, x, 1e-11);
      CHECK(mixture_cdf(params, x) == doctest::Approx(by_quad).epsilon(1e-8));
    }
  }
}

TEST_CASE("loglik hand values and high-precision oracle") {
  const MixtureParams std_normal(1, 0, 0, 0, 1, 1, 1);
  const std::vector<double> zero{0.0};
  CHECK(mixture_loglik(std_normal, zero) ==
        doctest::Approx(-0.9189385332046727).epsilon(1e-9));
  const std::vector<double> two{0.0, 0.0};
  CHECK(mixture_loglik(std_normal, two) ==
        doctest::Approx(-1.8378770664093453).epsilon(1e-9));

  // Frozen from a 200-digit evaluation of the same mixture on these points.
  const MixtureParams params(0.3, 0.45, 0.25, 1.7, 0.2, 2.5, 0.6);
  const std::vector<double> data{-2.31, -0.715, -0.12, 0.0,  0.41,
                                 0.77,  1.25,   1.9,   2.44, 3.607};
  CHECK(mixture_loglik(params, data) ==
        doctest::Approx(-19.23092152051000424).epsilon(1e-12));
}

TEST_CASE("pdf is a density: non-negative and unit mass, 100 random params") {
  KeyedRng rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    const MixtureParams params = random_params(rng);
    const double span = sigma_span(params);
    for (int i = 0; i <= 50; ++i) {
      const double x = -8.0 * span + 16.0 * span * i / 50.0;
      CHECK(mixture_pdf(params, x) >= 0.0);
    }
    const double total =
        simpson([&](double x) { return mixture_pdf(params, x); }, -40.0 * span,
                40.0 * span, 1e-10);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("cdf is monotone with correct tail limits") {
  KeyedRng rng(11);
  for (int rep = 0; rep < 10; ++rep) {
    const MixtureParams params = random_params(rng);
    const double span = 38.0 * sigma_span(params);
    double prev = -1.0;
    for (int i = 0; i < 10000; ++i) {
      const double x = -span + 2.0 * span * i / 9999.0;
      const double c = mixture_cdf(params, x);
      CHECK(c >= prev);
      prev = c;
    }
    CHECK(mixture_cdf(params, -span) < 1e-9);
    CHECK(mixture_cdf(params, span) > 1.0 - 1e-9);
  }
}

TEST_CASE("loglik is permutation invariant") {
  KeyedRng rng(13);
  const MixtureParams params = random_params(rng);
  std::vector<double> data(64);
  for (double& v : data) v = rng.next_normal();
  const double base = mixture_loglik(params, data);
  std::vector<double> shuffled = data;
  keyed_shuffle(shuffled, rng);
  CHECK(mixture_loglik(params, shuffled) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("label-swap symmetry") {
  KeyedRng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const MixtureParams a = random_params(rng);
    const MixtureParams b(a.p2(), a.p1(), a.p3(), a.mu(), a.var2(), a.var1(),
                          a.var3());
    std::vector<double> data(32);
    for (double& v : data) v = rng.next_normal(0.3, 1.4);
    for (double x : {-2.0, -0.1, 0.9, 3.3}) {
      CHECK(mixture_pdf(a, x) == mixture_pdf(b, x));
      CHECK(mixture_cdf(a, x) == mixture_cdf(b, x));
    }
    CHECK(mixture_loglik(a, data) == mixture_loglik(b, data));
  }
}

TEST_CASE("construction validates and canonicalizes") {
  CHECK_THROWS_AS(MixtureParams(0.5, 0.5, 0.1, 0, 1, 1, 1), InvariantViolation);
  CHECK_THROWS_AS(MixtureParams(-0.1, 0.6, 0.5, 0, 1, 1, 1), InvariantViolation);
  CHECK_THROWS_AS(MixtureParams(0.5, 0.5, 0, 0, -1, 1, 1), InvariantViolation);
  CHECK_THROWS_AS(MixtureParams(0.5, 0.5, 0, 0, 1, 0, 1), InvariantViolation);

  // A 1e-10 weight-sum violation renormalizes to exact unity.
  const MixtureParams renorm(0.5 + 1e-10, 0.3, 0.2, 1.0, 1.0, 2.0, 1.0);
  CHECK(renorm.p1() + renorm.p2() + renorm.p3() == doctest::Approx(1.0).epsilon(1e-12));

  // Null components swap into var1 <= var2 order.
  const MixtureParams swapped(0.7, 0.3, 0, 0, 4.0, 1.0, 1.0);
  CHECK(swapped.var1() == 1.0);
  CHECK(swapped.var2() == 4.0);
  CHECK(swapped.p1() == 0.3);
  CHECK(swapped.p2() == 0.7);

  // p3 == 0 reports mu == 0.
  const MixtureParams nulled(0.6, 0.4, 0, 5.0, 1.0, 2.0, 1.0);
  CHECK(nulled.mu() == 0.0);
}
