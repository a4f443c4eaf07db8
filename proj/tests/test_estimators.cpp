#include "endo/dgp.hpp"
#include "endo/errors.hpp"
#include "endo/estimators.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>

using namespace endo;

namespace {

DataView noiseless_triangular(std::size_t n, std::uint64_t seed) {
  auto spec = dgp::registry_spec("triangular_exog");
  spec.errors.u_loading = 0.0;
  spec.errors.nu_scale = 0.0;
  return DataView(dgp::sample(spec, n, seed));
}

const double kTau = 2.0;

} // namespace

TEST_SUITE("estimators") {

TEST_CASE("registry and id strings") {
  for (const auto& info : est::estimator_registry()) {
    CHECK(est::estimator_from_string(est::to_string(info.id)) == info.id);
    CHECK_FALSE(info.description.empty());
  }
  CHECK_THROWS_AS(est::estimator_from_string("lasso"), ConfigError);
}

TEST_CASE("ols matches the normal equations and the HC0 sandwich") {
  const DataView v(testutil::linear_data(300, 2, 1.0, 0.5, false));
  const auto fit = est::ols_fit(v);
  const std::size_t n = v.size();
  Eigen::MatrixXd w(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    w(i, 0) = 1.0;
    w(i, 1) = v.d()[i];
    w(i, 2) = v.x(0)[i];
    y(i) = v.y()[i];
  }
  const Eigen::MatrixXd wtw_inv = (w.transpose() * w).inverse();
  const Eigen::VectorXd b = wtw_inv * w.transpose() * y;
  const Eigen::VectorXd r = y - w * b;
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
  for (std::size_t i = 0; i < n; ++i) meat += r(i) * r(i) * w.row(i).transpose() * w.row(i);
  const Eigen::MatrixXd cov = wtw_inv * meat * wtw_inv;
  for (int j = 0; j < 3; ++j) {
    CHECK(fit.coef[j] == doctest::Approx(b(j)).epsilon(1e-10));
    CHECK(fit.se[j] == doctest::Approx(std::sqrt(cov(j, j))).epsilon(1e-8));
  }
  CHECK(fit.names == std::vector<std::string>{"intercept", "d", "x1"});
  CHECK(fit.coefficient("d") == fit.coef[1]);
  CHECK_THROWS_AS(fit.coefficient("z"), PreconditionError);
}

TEST_CASE("ols reports a rank-deficient design") {
  DataSet ds = testutil::linear_data(50, 3, 1.0, 0.1, false);
  ds.x[0] = ds.d;
  CHECK_THROWS_AS(est::ols_fit(DataView(ds)), SingularFitError);
}

TEST_CASE("just-identified 2SLS equals (Z'W)^-1 Z'Y") {
  const DataView v(testutil::linear_data(400, 4, 1.5, 1.0, true));
  const auto fit = est::tsls_fit(v);
  const std::size_t n = v.size();
  Eigen::MatrixXd w(n, 3), q(n, 3);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    w.row(i) << 1.0, v.d()[i], v.x(0)[i];
    q.row(i) << 1.0, v.z()[i], v.x(0)[i];
    y(i) = v.y()[i];
  }
  const Eigen::VectorXd b = (q.transpose() * w).lu().solve(q.transpose() * y);
  for (int j = 0; j < 3; ++j) CHECK(fit.coef[j] == doctest::Approx(b(j)).epsilon(1e-9));
  REQUIRE(fit.first_stage_f);
  CHECK(*fit.first_stage_f > 10.0);
  CHECK(fit.warnings.empty());
}

TEST_CASE("2SLS flags a weak instrument and needs one") {
  DataSet ds = testutil::linear_data(400, 5, 1.0, 1.0, true);
  std::mt19937_64 rng(1);
  *ds.z = testutil::normals(400, rng);
  const auto fit = est::tsls_fit(DataView(ds));
  REQUIRE(fit.first_stage_f);
  CHECK(*fit.first_stage_f < 10.0);
  REQUIRE_FALSE(fit.warnings.empty());
  CHECK(fit.warnings[0].find("weak instrument") != std::string::npos);
  CHECK_THROWS_AS(est::tsls_fit(DataView(testutil::linear_data(50, 1, 1.0, 1.0, false))), PreconditionError);
}

TEST_CASE("noiseless linear data give tau exactly") {
  const DataView lin(testutil::linear_data(500, 6, kTau, 0.0, true));
  est::EstimatorConfig cfg;
  const double x0[1] = {0.1};
  CHECK(std::abs(est::clar_continuous(lin, 0.2, x0, cfg).value - kTau) < 1e-6);
  CHECK(std::abs(est::lar_continuous(lin, 0.2, cfg).value - kTau) < 1e-6);
  CHECK(std::abs(est::iv_ratio(lin, 0.0, x0, cfg).value - kTau) < 1e-6);

  const DataView tri = noiseless_triangular(500, 7);
  const auto v = est::construct_control_variable(tri, cfg);
  CHECK(std::abs(est::clar_triangular(tri, v, 0.0, x0, cfg).value - kTau) < 1e-6);
  CHECK(std::abs(est::lar_triangular(tri, v, 0.0, cfg).value - kTau) < 1e-6);
}

TEST_CASE("estimates carry evaluation metadata") {
  const DataView lin(testutil::linear_data(500, 8, kTau, 0.3, false));
  const double x0[1] = {0.0};
  const auto e = est::clar_continuous(lin, 0.5, x0, {});
  CHECK(e.id == est::EstimatorId::clar_continuous);
  CHECK(*e.eval_d == 0.5);
  CHECK(e.eval_x == std::vector<double>{0.0});
  CHECK(e.bandwidths.size() == 2);
  CHECK(e.n_effective > 0.0);
  CHECK(e.trimmed_fraction == 0.0);
  CHECK(est::Estimate::csv_header(1) == "estimator_id,d,x1,value,se,n_effective,trimmed_fraction");
  CHECK(e.csv_row(1).rfind("clar_continuous,0.5,0,", 0) == 0);
  CHECK(e.to_json()["estimator_id"] == "clar_continuous");
}

TEST_CASE("row order does not change any estimate") {
  DataSet ds = testutil::linear_data(400, 9, 1.0, 0.5, true);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.y[i] += std::sin(ds.d[i]) * ds.x[0][i];
  DataSet shuffled = ds;
  std::vector<std::size_t> perm(ds.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.y[i] = ds.y[perm[i]];
    shuffled.d[i] = ds.d[perm[i]];
    shuffled.x[0][i] = ds.x[0][perm[i]];
    (*shuffled.z)[i] = (*ds.z)[perm[i]];
  }
  const DataView a(ds), b(shuffled);
  const double x0[1] = {0.2};
  const est::EstimatorConfig cfg;
  CHECK(est::clar_continuous(a, 0.1, x0, cfg).value == est::clar_continuous(b, 0.1, x0, cfg).value);
  CHECK(est::lar_continuous(a, 0.1, cfg).value == est::lar_continuous(b, 0.1, cfg).value);
  CHECK(est::ols_fit(a).coef == est::ols_fit(b).coef);
  const auto va = est::construct_control_variable(a, cfg), vb = est::construct_control_variable(b, cfg);
  CHECK(va.v == vb.v);
  CHECK(est::clar_triangular(a, va, 0.1, x0, cfg).value == est::clar_triangular(b, vb, 0.1, x0, cfg).value);
}

TEST_CASE("affine changes of Y and D rescale the derivative") {
  DataSet ds = testutil::linear_data(600, 10, 1.0, 0.4, false);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.y[i] += 0.3 * ds.d[i] * ds.d[i];
  const double a = 3.0, b = -2.0, c = 2.5, shift = 1.0;
  DataSet moved = ds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    moved.y[i] = a + b * ds.y[i];
    moved.d[i] = shift + c * ds.d[i];
  }
  const double x0[1] = {0.0};
  const double d0 = 0.3;
  est::EstimatorConfig cfg;
  const double base = est::clar_continuous(DataView(ds), d0, x0, cfg).value;
  const double scaled = est::clar_continuous(DataView(moved), shift + c * d0, x0, cfg).value;
  CHECK(scaled == doctest::Approx(base * b / c).epsilon(1e-8));
}

TEST_CASE("estimators never read the latent columns") {
  const auto spec = dgp::registry_spec("triangular_endox");
  DataSet ds = dgp::sample(spec, 600, 11);
  const DataView before(ds);
  for (auto& e : ds.latent->eps) e = 1e9;
  ds.latent->eta.assign(ds.size(), -5.0);
  const DataView after(ds);
  const double x0[1] = {0.0};
  const est::EstimatorConfig cfg;
  CHECK(est::clar_continuous(before, 0.0, x0, cfg).value == est::clar_continuous(after, 0.0, x0, cfg).value);
  CHECK(est::tsls_fit(before).coef == est::tsls_fit(after).coef);
  CHECK(est::construct_control_variable(before, cfg).v == est::construct_control_variable(after, cfg).v);
}

TEST_CASE("iv_ratio rejects a flat first stage") {
  DataSet ds = testutil::linear_data(400, 12, 1.0, 0.0, true);
  for (std::size_t i = 0; i < ds.size(); ++i) ds.d[i] = ds.x[0][i];
  for (std::size_t i = 0; i < ds.size(); ++i) ds.y[i] = ds.d[i] + (*ds.z)[i];
  const double x0[1] = {0.0};
  CHECK_THROWS_AS(est::iv_ratio(DataView(ds), 0.0, x0, {}), NearZeroDenominatorError);
  CHECK_THROWS_AS(est::iv_ratio(DataView(testutil::linear_data(100, 1, 1.0, 0.1, false)), 0.0, x0, {}),
                  PreconditionError);
}

TEST_CASE("continuous estimators reject binary data and vice versa") {
  const DataView bin(dgp::sample(dgp::registry_spec("binary_const"), 300, 13));
  const DataView cont(testutil::linear_data(300, 13, 1.0, 0.5, false));
  const double x0[1] = {0.0};
  CHECK_THROWS_AS(est::clar_continuous(bin, 0.0, x0, {}), WrongKindError);
  CHECK_THROWS_AS(est::clar_binary(cont, x0, {}), WrongKindError);
  CHECK_THROWS_AS(est::lar_binary(bin, 2, {}), PreconditionError);
  const double x2[2] = {0.0, 0.0};
  CHECK_THROWS_AS(est::clar_continuous(cont, 0.0, x2, {}), PreconditionError);
}

TEST_CASE("binary estimators recover a constant effect") {
  const DataView v(dgp::sample(dgp::registry_spec("binary_const"), 4000, 14));
  const double x0[1] = {0.0};
  const est::EstimatorConfig cfg;
  CHECK(est::clar_binary(v, x0, cfg).value == doctest::Approx(1.5).epsilon(0.1));
  CHECK(est::lar_binary(v, 1, cfg).value == doctest::Approx(1.5).epsilon(0.05));
  CHECK(est::ate(v, 1.0, cfg).value == doctest::Approx(1.5).epsilon(0.05));
  const auto att = est::att(v, 1.0, 1.0, cfg);
  CHECK(att.value == est::lar_binary(v, 1, cfg).value);
}

TEST_CASE("one-arm data raise an overlap error") {
  const DataView v(dgp::sample(dgp::registry_spec("binary_degenerate"), 500, 15));
  const double x0[1] = {0.0};
  CHECK_THROWS_AS(est::clar_binary(v, x0, {}), OverlapError);
  CHECK_THROWS_AS(est::lar_binary(v, 1, {}), OverlapError);
  CHECK_THROWS_AS(est::ate(v, 1.0, {}), OverlapError);
}

TEST_CASE("counterfactual mean at its own treatment level is the regression of Y on D") {
  const DataView v(dgp::sample(dgp::registry_spec("binary_dx"), 3000, 16));
  const est::EstimatorConfig cfg;
  const auto cm = est::counterfactual_mean(v, 1.0, 1.0, cfg);
  const auto treated = v.arm(1.0);
  double mean = 0.0;
  for (double y : treated.y()) mean += y;
  mean /= static_cast<double>(treated.size());
  CHECK(cm.value == doctest::Approx(mean).epsilon(0.02));
  CHECK_THROWS_AS(est::counterfactual_mean(v, 0.5, 1.0, cfg), PreconditionError);
}

TEST_CASE("triangular mode needs a control variable") {
  const DataView v(dgp::sample(dgp::registry_spec("triangular_endox"), 500, 17));
  CHECK_THROWS_AS(est::att(v, 0.0, 0.5, {}, est::EffectMode::triangular, nullptr), PreconditionError);
  CHECK_THROWS_AS(est::construct_control_variable(DataView(testutil::linear_data(100, 1, 1.0, 0.1, false)), {}),
                  PreconditionError);
}

TEST_CASE("control variable is within [0, 1] and deterministic") {
  const DataView v(dgp::sample(dgp::registry_spec("triangular_endox"), 800, 18));
  const auto a = est::construct_control_variable(v, {}), b = est::construct_control_variable(v, {});
  CHECK(a.v == b.v);
  for (double x : a.v) {
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
  }
  CHECK(a.bandwidths.size() == 3);
}

TEST_CASE("bootstrap standard error of a mean") {
  std::mt19937_64 rng(19);
  const std::size_t n = 400;
  auto y = testutil::normals(n, rng, 2.0);
  const DataView v(y, std::vector<double>(testutil::normals(n, rng)), {testutil::normals(n, rng)});
  const est::ScalarEstimator mean = [](const DataView& d) {
    double s = 0.0;
    for (double x : d.y()) s += x;
    return s / static_cast<double>(d.size());
  };
  double m = 0.0, ss = 0.0;
  for (double x : y) m += x;
  m /= n;
  for (double x : y) ss += (x - m) * (x - m);
  const double analytic = std::sqrt(ss / n) / std::sqrt(static_cast<double>(n));
  const double se = est::bootstrap_se(mean, v, 400, 5, kernels::Exec::parallel);
  CHECK(se == doctest::Approx(analytic).epsilon(0.15));
  CHECK(se == est::bootstrap_se(mean, v, 400, 5, kernels::Exec::serial));
  CHECK_THROWS_AS(est::bootstrap_se(mean, v, 49, 5, kernels::Exec::serial), PreconditionError);
  const est::ScalarEstimator flaky = [](const DataView& d) {
    if (d.y()[0] > -1.0) throw SupportError("no", 0.0);
    return 0.0;
  };
  CHECK_THROWS_AS(est::bootstrap_se(flaky, v, 60, 5, kernels::Exec::serial), InstabilityError);
}

TEST_CASE("bootstrap SE of constant and OLS estimators") {
  const DataView v(dgp::sample(dgp::registry_spec("dgp_l1"), 10000, 21));
  const est::ScalarEstimator constant = [](const DataView&) { return 3.0; };
  CHECK(est::bootstrap_se(constant, v, 50, 1) == 0.0);
  const est::ScalarEstimator tau = [](const DataView& d) { return est::ols_fit(d).coefficient("d"); };
  const double analytic = est::ols_fit(v).standard_error("d");
  CHECK(est::bootstrap_se(tau, v, 200, 2) == doctest::Approx(analytic).epsilon(0.3));
}

}
