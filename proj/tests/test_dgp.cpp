#include "endo/dgp.hpp"
#include "endo/errors.hpp"
#include "endo/estimators.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace endo;

namespace {

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double cov(const std::vector<double>& a, const std::vector<double>& b) {
  const double ma = mean(a), mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size());
}

bool within_se(const dgp::OracleValue& o, double truth, double k = 4.0) {
  return std::abs(o.value - truth) <= k * o.se + 1e-12;
}

} // namespace

TEST_SUITE("dgp") {

TEST_CASE("registry specs validate and round-trip through YAML") {
  const auto entries = dgp::registry();
  CHECK(entries.size() >= 10);
  for (const auto& e : entries) {
    const dgp::ModelSpec s = dgp::registry_spec(e.name);
    CHECK_NOTHROW(s.validate());
    const std::string text = dgp::to_yaml(s);
    CHECK(dgp::to_yaml(dgp::from_yaml(text)) == text);
  }
  CHECK_THROWS_AS(dgp::registry_spec("no_such_model"), ConfigError);
}

TEST_CASE("malformed model text reports a line") {
  const std::string text = dgp::to_yaml(dgp::registry_spec("dgp_l1")) + "bogus_key: 3\n";
  try {
    dgp::from_yaml(text);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.line() > 0);
  }
}

TEST_CASE("sampling is deterministic in the seed") {
  const auto s = dgp::registry_spec("triangular_endox");
  const DataSet a = dgp::sample(s, 200, 9), b = dgp::sample(s, 200, 9), c = dgp::sample(s, 200, 10);
  CHECK(a.y == b.y);
  CHECK(a.d == b.d);
  CHECK(*a.z == *b.z);
  CHECK(a.y != c.y);
  REQUIRE(a.latent);
  CHECK(a.latent->eps.size() == 200);
}

TEST_CASE("dgp_l1 moments") {
  const DataSet ds = dgp::sample(dgp::registry_spec("dgp_l1"), 200000, 1);
  const double tol = 4.0 / std::sqrt(200000.0);
  CHECK(std::abs(mean(ds.d)) < tol * 1.3);
  CHECK(cov(ds.d, ds.d) == doctest::Approx(1.64).epsilon(0.02));
  CHECK(cov(ds.d, ds.x[0]) == doctest::Approx(0.8).epsilon(0.02));
  CHECK(cov(ds.latent->eps, ds.x[0]) == doctest::Approx(0.5).epsilon(0.03));
  CHECK(std::abs(cov(ds.latent->eps, ds.latent->eta)) < 4 * tol);
  for (std::size_t i = 0; i < 100; ++i) {
    CHECK(ds.y[i] == doctest::Approx(2.0 * ds.d[i] + ds.x[0][i] + ds.latent->eps[i]));
  }
}

TEST_CASE("linear projection of dgp_l1 matches the normal equations") {
  // Cov(D, X) block and Cov with Y from the structural equations.
  Eigen::Matrix2d sxx;
  sxx << 1.64, 0.8, 0.8, 1.0;
  Eigen::Vector2d sxy(2.0 * 1.64 + 0.8 + 0.5 * 0.8, 2.0 * 0.8 + 1.0 + 0.5);
  const Eigen::Vector2d slope = sxx.ldlt().solve(sxy);
  const auto lp = est::theoretical_lp(dgp::registry_spec("dgp_l1"));
  REQUIRE(lp.names.size() == 3);
  CHECK(lp.coef[0] == doctest::Approx(0.0));
  CHECK(lp.coef[1] == doctest::Approx(slope(0)));
  CHECK(lp.coef[2] == doctest::Approx(slope(1)));
  CHECK(lp.coef[1] - 2.0 == doctest::Approx(0.0));
  CHECK(lp.coef[2] - 1.0 == doctest::Approx(0.5));
}

TEST_CASE("monte carlo projection of dgp_l2 matches moment algebra") {
  // X = Exp(1) - 1 has moments 0, 1, 2, 9; Q = X^2 - 1 has Var 8 and Cov(X, Q) = 2.
  // D = 0.8X + 0.4Q + U, eps = 0.5Q + nu, Y = 2D + X + eps.
  const double var_d = 0.64 + 0.16 * 8.0 + 2.0 * 0.8 * 0.4 * 2.0 + 1.0;
  const double cov_dx = 0.8 + 0.4 * 2.0;
  const double cov_ed = 0.5 * (0.8 * 2.0 + 0.4 * 8.0), cov_ex = 0.5 * 2.0;
  Eigen::Matrix2d sxx;
  sxx << var_d, cov_dx, cov_dx, 1.0;
  Eigen::Vector2d sxy(2.0 * var_d + cov_dx + cov_ed, 2.0 * cov_dx + 1.0 + cov_ex);
  const Eigen::Vector2d slope = sxx.ldlt().solve(sxy);
  const auto lp = est::theoretical_lp(dgp::registry_spec("dgp_l2"), 2'000'000, 3);
  REQUIRE(lp.se.size() == 3);
  CHECK(std::abs(lp.coef[1] - slope(0)) < 5.0 * lp.se[1]);
  CHECK(std::abs(lp.coef[2] - slope(1)) < 5.0 * lp.se[2]);
  CHECK(slope(0) - 2.0 > 0.05);
}

TEST_CASE("structural derivative oracles") {
  const auto inter = dgp::registry_spec("interaction");
  CHECK_FALSE(inter.true_tau());
  const double x0[1] = {0.0}, x1[1] = {1.0};
  // clar(d, x) = 1 + 0.5 E[eps | X = x] = 1 + 0.25 (x^2 - 1).
  CHECK(dgp::true_clar(inter, 0.3, x0).value == doctest::Approx(0.75));
  CHECK(dgp::true_clar(inter, -1.0, x1).value == doctest::Approx(1.0));
  // X | D = 0 is normal with variance 1 / 1.64, so lar(0) = 1 + 0.25 (1/1.64 - 1).
  const auto lar = dgp::true_lar(inter, 0.0, 1'000'000, 5);
  CHECK(lar.provenance == dgp::Provenance::monte_carlo);
  CHECK(lar.se > 0.0);
  CHECK(within_se(lar, 1.0 + 0.25 * (1.0 / 1.64 - 1.0)));
  const auto ate = dgp::true_ate_continuous(inter, 0.0, 400000, 6);
  CHECK(within_se(ate, 1.0));

  const auto lin = dgp::registry_spec("dgp_l2");
  CHECK(*lin.true_tau() == 2.0);
  const double xm[1] = {0.4};
  CHECK(dgp::true_clar(lin, 1.0, xm).value == 2.0);
  CHECK(dgp::true_lar(lin, 0.5, 1000, 1).value == 2.0);
}

TEST_CASE("counterfactual mean oracle") {
  // dgp_l1: E[Y(d) | D = dt] = 2d + 1.5 E[X | D = dt].
  const auto s = dgp::registry_spec("dgp_l1");
  const double dt = 0.5;
  const double truth = 2.0 * 1.0 + 1.5 * 0.8 * dt / 1.64;
  CHECK(within_se(dgp::true_counterfactual_mean(s, 1.0, dt, 1'000'000, 2), truth, 5.0));
}

TEST_CASE("binary effect oracles") {
  const auto dx = dgp::true_binary_effects(dgp::registry_spec("binary_dx"), 1'000'000, 4);
  // D = 1{X + U > 0}: E[X | D = 1] = Cov(X, X + U) / sd(X + U) * phi(0) / Phi(0).
  const double att = (1.0 / std::sqrt(2.0)) * testutil::normal_pdf(0.0) / 0.5;
  CHECK(within_se(dx.att(), att));
  CHECK(within_se(dx.ate(), 0.0));
  CHECK(dx.treated_share() == doctest::Approx(0.5).epsilon(0.01));
  const double xq[1] = {0.7};
  CHECK(dx.clar(1, xq).value == doctest::Approx(0.7));

  const auto bc = dgp::true_binary_effects(dgp::registry_spec("binary_const"), 100000, 4);
  CHECK(bc.lar(1).value == doctest::Approx(1.5));
  CHECK(bc.lar(0).value == doctest::Approx(1.5));
  CHECK(bc.ate().value == doctest::Approx(1.5));

  const auto deg = dgp::true_binary_effects(dgp::registry_spec("binary_degenerate"), 10000, 4);
  CHECK(deg.treated_share() == 1.0);
  CHECK_THROWS_AS(deg.ate(), SupportError);
}

TEST_CASE("control variable absorbs the endogeneity in the triangular model") {
  const auto spec = dgp::registry_spec("triangular_endox");
  const DataSet ds = dgp::sample(spec, 200000, 8);
  const std::size_t n = ds.size();
  // Residuals from the structural conditional means given X.
  std::vector<double> rd(n), re(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x[1] = {ds.x[0][i]};
    rd[i] = ds.d[i] - spec.treatment.intercept - spec.treatment.x.eval(x) - spec.treatment.pi_z * spec.instrument->x.eval(x);
    re[i] = ds.latent->eps[i] - spec.errors.x.eval(x);
  }
  const auto cov = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0.0, mb = 0.0, s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) s += (a[i] - ma) * (b[i] - mb);
    return s / static_cast<double>(n);
  };
  const auto& eta = ds.latent->eta;
  const double given_x = cov(rd, re);
  // Partial out eta linearly.
  const double var_eta = cov(eta, eta), bd = cov(rd, eta) / var_eta, be = cov(re, eta) / var_eta;
  std::vector<double> rd2(n), re2(n);
  for (std::size_t i = 0; i < n; ++i) {
    rd2[i] = rd[i] - bd * eta[i];
    re2[i] = re[i] - be * eta[i];
  }
  const double given_x_eta = cov(rd2, re2);
  CHECK(given_x == doctest::Approx(spec.treatment.u_scale * spec.errors.u_loading).epsilon(0.05));
  CHECK(std::abs(given_x_eta) < 0.01);
}

}
