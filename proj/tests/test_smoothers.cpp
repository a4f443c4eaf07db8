#include "endo/errors.hpp"
#include "endo/smoothers.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace endo;
using smooth::Kernel;

TEST_SUITE("smoothers") {

TEST_CASE("kernels integrate to one and match their integrated forms") {
  for (Kernel k : {Kernel::gaussian, Kernel::epanechnikov}) {
    const double lo = -8.0, step = 1e-4;
    double mass = 0.0;
    for (double u = lo; u < 8.0; u += step) {
      mass += step * 0.5 * (smooth::kernel_weight(u, k) + smooth::kernel_weight(u + step, k));
      if (std::fmod(u - lo, 0.5) < step) {
        CHECK(smooth::integrated_kernel(u + step, k) == doctest::Approx(mass).epsilon(1e-6));
      }
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
  }
  CHECK(smooth::kernel_weight(0.5, Kernel::epanechnikov) == doctest::Approx(0.75 * 0.75));
  CHECK(smooth::kernel_weight(1.5, Kernel::epanechnikov) == 0.0);
  CHECK(smooth::kernel_weight(1.0, Kernel::gaussian) == doctest::Approx(testutil::normal_pdf(1.0)));
  CHECK(smooth::integrated_kernel(-2.0, Kernel::gaussian) == doctest::Approx(testutil::normal_cdf(-2.0)));
}

TEST_CASE("config validation") {
  smooth::SmootherConfig c;
  c.bandwidths = {0.5};
  CHECK_NOTHROW(c.validate(1, true));
  CHECK_THROWS_AS(c.validate(2, false), ConfigError);
  c.bandwidths = {-1.0};
  CHECK_THROWS_AS(c.validate(1, false), ConfigError);
  c.bandwidths = {0.5};
  c.degree = 0;
  CHECK_THROWS_AS(c.validate(1, true), ConfigError);
  c.degree = 3;
  CHECK_THROWS_AS(c.validate(1, false), ConfigError);
}

TEST_CASE("local linear reproduces affine data exactly") {
  std::mt19937_64 rng(3);
  const std::size_t n = 400;
  auto a = testutil::normals(n, rng), b = testutil::normals(n, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.25 - 0.7 * a[i] + 2.5 * b[i];
  for (Kernel k : {Kernel::gaussian, Kernel::epanechnikov}) {
    smooth::SmootherConfig c;
    c.kernel = k;
    c.bandwidths = {0.6, 0.8};
    for (double p0 : {-1.0, 0.0, 0.4}) {
      const double pt[2] = {p0, 0.3};
      const auto fit = smooth::local_poly_fit({a, b}, y, pt, c);
      CHECK(std::abs(fit.mean - (1.25 - 0.7 * p0 + 2.5 * 0.3)) < 1e-10);
      REQUIRE(fit.derivative_wrt_first);
      CHECK(std::abs(*fit.derivative_wrt_first + 0.7) < 1e-10);
    }
  }
}

TEST_CASE("local quadratic reproduces quadratic data") {
  std::mt19937_64 rng(4);
  const std::size_t n = 300;
  auto a = testutil::normals(n, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 + 2.0 * a[i] - 3.0 * a[i] * a[i];
  smooth::SmootherConfig c;
  c.bandwidths = {0.7};
  c.degree = 2;
  const double pt[1] = {0.5};
  const auto fit = smooth::local_poly_fit({a}, y, pt, c);
  CHECK(fit.mean == doctest::Approx(1.0 + 1.0 - 0.75).epsilon(1e-10));
  CHECK(*fit.derivative_wrt_first == doctest::Approx(2.0 - 3.0).epsilon(1e-10));
}

TEST_CASE("derivative matches a central difference of the fitted mean when the fit is exact") {
  std::mt19937_64 rng(14);
  const std::size_t n = 400;
  auto a = testutil::normals(n, rng), b = testutil::normals(n, rng);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 + 2.0 * a[i] - 3.0 * a[i] * a[i] + 0.5 * b[i] * b[i];
  smooth::SmootherConfig c;
  c.bandwidths = {0.6, 0.6};
  c.degree = 2;
  const double step = 1e-4 * c.bandwidths[0];
  for (double p : {-1.0, 0.0, 0.8}) {
    const double pt[2] = {p, 0.3}, up[2] = {p + step, 0.3}, dn[2] = {p - step, 0.3};
    const double fd = (smooth::local_poly_fit({a, b}, y, up, c).mean - smooth::local_poly_fit({a, b}, y, dn, c).mean) /
                      (2.0 * step);
    const double deriv = *smooth::local_poly_fit({a, b}, y, pt, c).derivative_wrt_first;
    CHECK(std::abs(deriv - fd) <= 1e-3 * std::abs(fd));
  }
}

TEST_CASE("local constant returns the kernel-weighted mean") {
  const std::vector<double> a = {0.0, 1.0, 2.0}, y = {1.0, 2.0, 4.0};
  smooth::SmootherConfig c;
  c.bandwidths = {1.0};
  c.degree = 0;
  const double pt[1] = {1.0};
  const double w0 = testutil::normal_pdf(1.0), w1 = testutil::normal_pdf(0.0);
  const auto fit = smooth::local_poly_fit({a}, y, pt, c);
  CHECK(fit.mean == doctest::Approx((w0 * 1.0 + w1 * 2.0 + w0 * 4.0) / (2 * w0 + w1)));
  CHECK(fit.effective_sample_size == doctest::Approx(2 * w0 + w1));
  CHECK(fit.density == doctest::Approx((2 * w0 + w1) / 3.0));
}

TEST_CASE("excluded row does not affect the fit") {
  std::vector<double> a = {0.0, 0.5, 1.0, 1.5, 2.0}, y = {0.0, 1.0, 2.0, 3.0, 4.0};
  smooth::SmootherConfig c;
  c.bandwidths = {1.0};
  const double pt[1] = {1.0};
  const auto base = smooth::local_poly_fit({a}, y, pt, c, 2);
  y[2] = 1e6;
  const auto changed = smooth::local_poly_fit({a}, y, pt, c, 2);
  CHECK(base.mean == changed.mean);
  CHECK(base.mean == doctest::Approx(2.0));
}

TEST_CASE("singular designs are reported") {
  const std::vector<double> a(20, 1.0), y(20, 2.0);
  smooth::SmootherConfig c;
  c.bandwidths = {1.0};
  const double pt[1] = {1.0};
  CHECK_THROWS_AS(smooth::local_poly_fit({a}, y, pt, c), SingularFitError);
  c.kernel = Kernel::epanechnikov;
  const double far[1] = {10.0};
  CHECK_THROWS_AS(smooth::local_poly_fit({a}, y, far, c), SingularFitError);
}

TEST_CASE("trimming flags low-density points") {
  std::mt19937_64 rng(5);
  auto a = testutil::normals(500, rng);
  std::vector<double> y(a.size(), 1.0);
  smooth::SmootherConfig c;
  c.bandwidths = {0.3};
  c.trim_density_floor = 0.01;
  const double mid[1] = {0.0}, tail[1] = {4.5};
  CHECK_FALSE(smooth::local_poly_fit({a}, y, mid, c).trimmed);
  CHECK(smooth::conditional_density({a}, tail, c).trimmed);
}

TEST_CASE("density estimate approaches the normal density") {
  std::mt19937_64 rng(6);
  auto a = testutil::normals(20000, rng);
  smooth::SmootherConfig c;
  c.bandwidths = smooth::rule_of_thumb({a});
  for (double p : {-1.0, 0.0, 1.0}) {
    const double pt[1] = {p};
    CHECK(smooth::conditional_density({a}, pt, c).density == doctest::Approx(testutil::normal_pdf(p)).epsilon(0.05));
  }
}

TEST_CASE("conditional cdf is monotone and within [0, 1]") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> size(5, 120);
  std::uniform_real_distribution<double> unif(-3.0, 3.0), bw(0.05, 2.0);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = static_cast<std::size_t>(size(rng));
    auto d = testutil::normals(n, rng), x = testutil::normals(n, rng);
    for (std::size_t i = 0; i < n; ++i) d[i] += 0.7 * x[i];
    smooth::SmootherConfig c;
    c.kernel = trial % 2 ? Kernel::gaussian : Kernel::epanechnikov;
    c.bandwidths = {bw(rng), bw(rng)};
    c.degree = 0;
    const double pt[1] = {x[0]};
    std::vector<double> grid(12);
    for (auto& g : grid) g = unif(rng);
    std::sort(grid.begin(), grid.end());
    double prev = 0.0;
    for (double g : grid) {
      const double f = smooth::conditional_cdf(d, {x}, g, pt, c);
      CHECK(f >= 0.0);
      CHECK(f <= 1.0);
      CHECK(f >= prev);
      prev = f;
    }
    CHECK(smooth::conditional_cdf(d, {x}, *std::max_element(d.begin(), d.end()), pt, c) == 1.0);
    CHECK(smooth::conditional_cdf(d, {x}, *std::min_element(d.begin(), d.end()) - 1e-9, pt, c) == 0.0);
  }
}

TEST_CASE("conditional cdf matches the indicator mean for a wide conditioning kernel") {
  const std::vector<double> d = {0.0, 1.0, 2.0, 3.0}, x = {0.0, 0.0, 0.0, 0.0};
  smooth::SmootherConfig c;
  c.bandwidths = {1e-6, 1.0};
  c.degree = 0;
  const double pt[1] = {0.0};
  CHECK(smooth::conditional_cdf(d, {x}, 1.5, pt, c) == doctest::Approx(0.5));
  CHECK(smooth::conditional_cdf(d, {x}, 2.5, pt, c) == doctest::Approx(0.75));
}

TEST_CASE("conditional cdf without kernel mass throws") {
  const std::vector<double> d = {0.0, 1.0, 2.0}, x = {0.0, 0.1, 0.2};
  smooth::SmootherConfig c;
  c.kernel = Kernel::epanechnikov;
  c.bandwidths = {0.5, 0.5};
  c.degree = 0;
  const double pt[1] = {50.0};
  CHECK_THROWS_AS(smooth::conditional_cdf(d, {x}, 1.0, pt, c), NoSupportError);
}

TEST_CASE("rule of thumb") {
  std::vector<double> a(100);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i % 10);
  double mean = 4.5, ss = 0.0;
  for (double v : a) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / 99.0);
  const auto h = smooth::rule_of_thumb({a});
  CHECK(h[0] == doctest::Approx(1.06 * sd * std::pow(100.0, -0.2)));
  CHECK_THROWS_AS(smooth::rule_of_thumb({std::vector<double>(20, 1.0)}), DegenerateColumnError);
  CHECK_THROWS_AS(smooth::rule_of_thumb({std::vector<double>(5, 1.0)}), PreconditionError);
}

TEST_CASE("lscv picks a smaller bandwidth for a wiggly signal") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const std::size_t n = 400;
  std::vector<double> a(n), smooth_y(n), wiggly_y(n);
  auto e = testutil::normals(n, rng, 0.1);
  for (std::size_t i = 0; i < n; ++i) {
    a[i] = u(rng);
    smooth_y[i] = a[i] + e[i];
    wiggly_y[i] = std::sin(6.0 * a[i]) + e[i];
  }
  const auto ps = smooth::lscv_profile({a}, smooth_y);
  const auto pw = smooth::lscv_profile({a}, wiggly_y);
  CHECK(pw.bandwidths[0] < ps.bandwidths[0]);
  CHECK(ps.loo_errors.size() == ps.scales.size());
  CHECK(pw.loo_errors[pw.best] == *std::min_element(pw.loo_errors.begin(), pw.loo_errors.end()));
  CHECK_THROWS_AS(smooth::lscv_profile({std::vector<double>(a.begin(), a.begin() + 20)},
                                       std::vector<double>(20, 0.0)),
                  PreconditionError);
}

}
