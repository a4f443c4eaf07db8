#include "endo/errors.hpp"
#include "endo/kernels.hpp"
#include "endo/reference.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cstring>
#include <random>
#include <stdexcept>

using namespace endo;

namespace {

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

struct Sample {
  std::vector<double> a, b, y;
  std::vector<double> points;
};

Sample make_sample(std::size_t n, std::size_t m) {
  std::mt19937_64 rng(21);
  Sample s;
  s.a = testutil::normals(n, rng);
  s.b = testutil::normals(n, rng);
  auto e = testutil::normals(n, rng, 0.3);
  s.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.y[i] = std::sin(s.a[i]) + s.b[i] * s.b[i] + e[i];
  auto p = testutil::normals(2 * m, rng);
  s.points = p;
  return s;
}

} // namespace

TEST_SUITE("kernels") {

TEST_CASE("parallel fits are bit-identical to the serial reference") {
  const Sample s = make_sample(3000, 64);
  smooth::SmootherConfig c;
  c.bandwidths = {0.3, 0.4};
  c.trim_density_floor = 0.02;
  const auto par = kernels::fit_points({s.a, s.b}, s.y, s.points, c, kernels::Exec::parallel);
  const auto ser = reference::fit_points({s.a, s.b}, s.y, s.points, c);
  REQUIRE(par.size() == ser.size());
  for (std::size_t p = 0; p < par.size(); ++p) {
    REQUIRE(par[p].ok() == ser[p].ok());
    if (!par[p].ok()) continue;
    CHECK(same_bits(par[p].fit.mean, ser[p].fit.mean));
    CHECK(same_bits(*par[p].fit.derivative_wrt_first, *ser[p].fit.derivative_wrt_first));
    CHECK(par[p].fit.trimmed == ser[p].fit.trimmed);
  }
}

TEST_CASE("parallel fits match single-point calls") {
  const Sample s = make_sample(500, 8);
  smooth::SmootherConfig c;
  c.bandwidths = {0.5, 0.5};
  const auto par = kernels::fit_points({s.a, s.b}, s.y, s.points, c, kernels::Exec::parallel);
  for (std::size_t p = 0; p < par.size(); ++p) {
    const auto one = smooth::local_poly_fit({s.a, s.b}, s.y, std::span<const double>(s.points.data() + 2 * p, 2), c);
    CHECK(same_bits(par[p].fit.mean, one.mean));
  }
}

TEST_CASE("density, cdf and leave-one-out kernels agree with the reference") {
  const Sample s = make_sample(1500, 40);
  smooth::SmootherConfig c;
  c.bandwidths = {0.3, 0.4};
  const auto dp = kernels::density_at_points({s.a, s.b}, s.points, c, kernels::Exec::parallel);
  const auto ds = reference::density_at_points({s.a, s.b}, s.points, c);
  for (std::size_t p = 0; p < dp.size(); ++p) CHECK(same_bits(dp[p].density, ds[p].density));

  smooth::SmootherConfig cc;
  cc.bandwidths = {0.3, 0.4};
  cc.degree = 0;
  const auto cp = kernels::conditional_cdf_at_rows(s.y, {s.a}, cc, kernels::Exec::parallel);
  const auto cs = reference::conditional_cdf_at_rows(s.y, {s.a}, cc);
  REQUIRE(cp.values.size() == s.y.size());
  for (std::size_t i = 0; i < cp.values.size(); ++i) CHECK(same_bits(cp.values[i], cs.values[i]));

  const double lp = kernels::loo_squared_error({s.a, s.b}, s.y, c, kernels::Exec::parallel);
  const double ls = reference::loo_squared_error({s.a, s.b}, s.y, c);
  CHECK(same_bits(lp, ls));
}

TEST_CASE("leave-one-out error matches a direct computation") {
  const Sample s = make_sample(200, 1);
  smooth::SmootherConfig c;
  c.bandwidths = {0.5, 0.6};
  double direct = 0.0;
  for (std::size_t i = 0; i < s.y.size(); ++i) {
    const double pt[2] = {s.a[i], s.b[i]};
    const double r = s.y[i] - smooth::local_poly_fit({s.a, s.b}, s.y, pt, c, i).mean;
    direct += r * r;
  }
  direct /= static_cast<double>(s.y.size());
  CHECK(kernels::loo_squared_error({s.a, s.b}, s.y, c, kernels::Exec::parallel) == doctest::Approx(direct));
}

TEST_CASE("failed points carry their error without aborting the batch") {
  const std::vector<double> a = {0.0, 0.1, 0.2, 0.3, 0.4}, y = {1.0, 1.0, 1.0, 1.0, 1.0};
  smooth::SmootherConfig c;
  c.kernel = smooth::Kernel::epanechnikov;
  c.bandwidths = {0.25};
  const std::vector<double> pts = {0.2, 50.0, 0.3};
  const auto out = kernels::fit_points({a}, y, pts, c, kernels::Exec::parallel);
  CHECK(out[0].ok());
  CHECK_FALSE(out[1].ok());
  CHECK_THROWS_AS(std::rethrow_exception(out[1].error), SingularFitError);
  CHECK(out[2].ok());
}

TEST_CASE("for_each_index rethrows the lowest failing index") {
  std::vector<int> done(100, 0);
  try {
    kernels::for_each_index(100, kernels::Exec::parallel, [&](std::size_t i) {
      done[i] = 1;
      if (i == 70 || i == 30) throw std::runtime_error(std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "30");
  }
  for (int v : done) CHECK(v == 1);
}

}
