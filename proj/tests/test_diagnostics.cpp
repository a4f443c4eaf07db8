#include "endo/diagnostics.hpp"
#include "endo/errors.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace endo;

namespace {

DataView separable_data(std::size_t n, bool deterministic_d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto x = testutil::normals(n, rng), u = testutil::normals(n, rng), e = testutil::normals(n, rng);
  std::vector<double> d(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = deterministic_d ? x[i] * x[i] : x[i] + u[i];
    y[i] = d[i] + x[i] + e[i];
  }
  return DataView(std::move(y), std::move(d), {std::move(x)});
}

/// X | D = 0 ~ U(0, 1) and X | D = 1 ~ U(0.5, 1.5): half the treated lie outside the control support.
DataView half_overlap(std::size_t per_arm, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> y, d, x;
  for (std::size_t i = 0; i < 2 * per_arm; ++i) {
    const bool treated = i >= per_arm;
    d.push_back(treated ? 1.0 : 0.0);
    x.push_back(u(rng) + (treated ? 0.5 : 0.0));
    y.push_back(x.back());
  }
  return DataView(std::move(y), std::move(d), {std::move(x)});
}

} // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("separability fails when D is a function of X") {
  const auto r = diag::separability_check(separable_data(2000, true, 1));
  CHECK(r.verdict == diag::Verdict::fail);
  CHECK(r.statistic < 0.01);
}

TEST_CASE("separability passes with independent variation in D") {
  const auto r = diag::separability_check(separable_data(2000, false, 2));
  CHECK(r.verdict == diag::Verdict::pass);
  // Var(D | X) / Var(D) = 1 / 2 for D = X + U.
  CHECK(r.statistic == doctest::Approx(0.5).epsilon(0.3));
}

TEST_CASE("separability warns on small or binary samples") {
  CHECK(diag::separability_check(separable_data(60, false, 3)).verdict == diag::Verdict::warn);
  const auto bin = diag::separability_check(half_overlap(100, 3));
  CHECK(bin.verdict == diag::Verdict::warn);
  CHECK(std::isnan(bin.statistic));
  CHECK(bin.to_json()["statistic"].is_null());
}

TEST_CASE("support overlap on the half-overlap construction") {
  diag::OverlapConfig c;
  c.smoother.bandwidths = {0.01};
  const auto r = diag::support_overlap(half_overlap(20000, 4), 0.0, 1.0, c);
  CHECK(std::abs(r.statistic - 0.5) < 0.05);
  CHECK(r.verdict == diag::Verdict::fail);
  const auto reverse = diag::support_overlap(half_overlap(20000, 4), 1.0, 0.0, c);
  CHECK(std::abs(reverse.statistic - 0.5) < 0.05);
}

TEST_CASE("support overlap passes for a shared support") {
  std::mt19937_64 rng(5);
  const std::size_t n = 4000;
  auto x = testutil::normals(n, rng), u = testutil::normals(n, rng);
  std::vector<double> d(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = x[i] + u[i];
    y[i] = d[i];
  }
  const DataView v(y, d, {x});
  const auto r = diag::support_overlap(v, 0.0, 0.5);
  CHECK(r.verdict == diag::Verdict::pass);
  CHECK(r.statistic < 0.05);
  CHECK_THROWS_AS(diag::support_overlap(v, 0.0, 100.0, [] {
                    diag::OverlapConfig c;
                    c.smoother.kernel = smooth::Kernel::epanechnikov;
                    return c;
                  }()),
                  NoSupportError);
}

TEST_CASE("support overlap needs both arms") {
  std::vector<double> y(50, 1.0), d(50, 1.0), x(50);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i) / 50.0;
  CHECK_THROWS_AS(diag::support_overlap(DataView(y, d, {x}), 0.0, 1.0), NoSupportError);
}

TEST_CASE("KS distance to the uniform law") {
  std::vector<double> grid(100);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = (static_cast<double>(i) + 0.5) / 100.0;
  CHECK(diag::ks_uniform(grid) == doctest::Approx(0.005));
  CHECK(diag::ks_uniform(std::vector<double>(10, 0.0)) == doctest::Approx(1.0));
  CHECK(diag::ks_uniform(std::vector<double>{0.25}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(diag::ks_uniform(std::vector<double>{}), PreconditionError);
  CHECK(diag::cv_uniformity(grid).verdict == diag::Verdict::pass);
  CHECK(diag::cv_uniformity(std::vector<double>(10, 0.5)).verdict == diag::Verdict::fail);
}

TEST_CASE("reports render as text and JSON") {
  const auto r = diag::cv_uniformity(std::vector<double>{0.1, 0.5, 0.9}, 0.5);
  CHECK(r.to_text().find("cv_uniformity: pass") == 0);
  const auto j = r.to_json();
  CHECK(j["verdict"] == "pass");
  CHECK(j["threshold"] == 0.5);
}

}
