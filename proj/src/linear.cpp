#include "endo/estimators.hpp"

#include "endo/errors.hpp"
#include "endo/format.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace endo::est {

namespace {

std::vector<std::string> coefficient_names(std::size_t k) {
  std::vector<std::string> names{"intercept", "d"};
  for (std::size_t j = 0; j < k; ++j) names.push_back("x" + std::to_string(j + 1));
  return names;
}

Eigen::VectorXd to_vector(std::span<const double> s) {
  return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

/// Columns: 1, first, X_1..X_k.
Eigen::MatrixXd design(const DataView& data, std::span<const double> first) {
  const auto n = static_cast<Eigen::Index>(data.size());
  const auto k = static_cast<Eigen::Index>(data.num_controls());
  Eigen::MatrixXd w(n, 2 + k);
  w.col(0).setOnes();
  w.col(1) = to_vector(first);
  for (Eigen::Index j = 0; j < k; ++j) w.col(2 + j) = to_vector(data.x(static_cast<std::size_t>(j)));
  return w;
}

Eigen::MatrixXd checked_inverse(const Eigen::MatrixXd& m, const char* what, double n) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    throw SingularFitError(std::string(what) + ": design matrix is rank deficient (rank " +
                             std::to_string(lu.rank()) + " of " + std::to_string(m.rows()) + ")",
                           n, 0.0);
  }
  return lu.inverse();
}

/// Least squares via column-pivoted QR with an explicit rank check.
Eigen::VectorXd least_squares(const Eigen::MatrixXd& w, const Eigen::VectorXd& y, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(w);
  qr.setThreshold(1e-12);
  if (qr.rank() < w.cols()) {
    throw SingularFitError(std::string(what) + ": design matrix is rank deficient (rank " +
                             std::to_string(qr.rank()) + " of " + std::to_string(w.cols()) + ")",
                           static_cast<double>(w.rows()), 0.0);
  }
  return qr.solve(y);
}

/// HC0 sandwich with bread (A'B)^-1 and meat sum e_i^2 a_i a_i'.
std::vector<double> sandwich_se(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& resid) {
  const Eigen::MatrixXd bread = checked_inverse(a.transpose() * b, "sandwich", static_cast<double>(a.rows()));
  const Eigen::MatrixXd scaled = a.array().colwise() * resid.array();
  const Eigen::MatrixXd meat = scaled.transpose() * scaled;
  const Eigen::MatrixXd cov = bread * meat * bread.transpose();
  std::vector<double> se(static_cast<std::size_t>(cov.rows()));
  for (Eigen::Index j = 0; j < cov.rows(); ++j) se[static_cast<std::size_t>(j)] = std::sqrt(std::max(0.0, cov(j, j)));
  return se;
}

double slope_of(const dgp::ControlTerm& t) {
  return t.linear + (t.shape == dgp::Shape::identity ? t.nonlinear : 0.0);
}

bool affine_spec(const dgp::ModelSpec& spec) {
  if (spec.treatment.kind != dgp::TreatmentKind::continuous) return false;
  if (!spec.treatment.x.is_affine() || !spec.errors.x.is_affine()) return false;
  if (spec.instrument && !spec.instrument->x.is_affine()) return false;
  return true;
}

LinearProjection closed_form_lp(const dgp::ModelSpec& spec) {
  const std::size_t k = spec.num_controls;
  // Primitive draws: X_1..X_k, U, nu, zeta; mutually independent.
  const std::size_t p = k + 3;
  const std::size_t iu = k, inu = k + 1, izeta = k + 2;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  Eigen::VectorXd var = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
  for (std::size_t j = 0; j < k; ++j) {
    mean(j) = spec.errors.x_dist.mean();
    var(j) = spec.errors.x_dist.variance();
  }
  mean(iu) = spec.errors.u_dist.mean();
  var(iu) = spec.errors.u_dist.variance();
  mean(inu) = spec.errors.nu_dist.mean();
  var(inu) = spec.errors.nu_dist.variance();
  if (spec.instrument) {
    mean(izeta) = spec.instrument->innovation.mean();
    var(izeta) = spec.instrument->innovation.variance();
  }

  struct Affine {
    double constant = 0.0;
    Eigen::VectorXd load;
  };
  const auto zero = [&] { return Affine{0.0, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p))}; };
  const auto sum_x = [&](double slope) {
    Affine a = zero();
    for (std::size_t j = 0; j < k; ++j) a.load(j) = slope;
    return a;
  };

  Affine z = zero();
  if (spec.instrument) {
    z = sum_x(slope_of(spec.instrument->x));
    z.load(izeta) = 1.0;
  }
  Affine eps = sum_x(slope_of(spec.errors.x));
  eps.load(iu) = spec.errors.u_loading;
  eps.load(inu) = spec.errors.nu_scale;

  Affine d = sum_x(slope_of(spec.treatment.x));
  d.constant = spec.treatment.intercept + spec.treatment.pi_z * z.constant;
  d.load += spec.treatment.pi_z * z.load;
  d.load(iu) += spec.treatment.u_scale;

  const auto& out = spec.outcome;
  Affine y = zero();
  y.constant = out.intercept + out.tau * d.constant + out.eps_loading * eps.constant;
  y.load = out.tau * d.load + out.eps_loading * eps.load;
  for (std::size_t j = 0; j < k; ++j) y.load(j) += out.beta[j];

  std::vector<Affine> w{d};
  for (std::size_t j = 0; j < k; ++j) {
    Affine xj = zero();
    xj.load(j) = 1.0;
    w.push_back(xj);
  }
  const auto mu = [&](const Affine& a) { return a.constant + a.load.dot(mean); };
  const auto cov = [&](const Affine& a, const Affine& b) { return (a.load.array() * b.load.array() * var.array()).sum(); };

  const auto q = static_cast<Eigen::Index>(w.size());
  Eigen::MatrixXd sww(q, q);
  Eigen::VectorXd swy(q);
  for (Eigen::Index r = 0; r < q; ++r) {
    swy(r) = cov(w[r], y);
    for (Eigen::Index c = 0; c < q; ++c) sww(r, c) = cov(w[r], w[c]);
  }
  const Eigen::VectorXd slope = checked_inverse(sww, "theoretical projection", 0.0) * swy;
  double intercept = mu(y);
  for (Eigen::Index r = 0; r < q; ++r) intercept -= slope(r) * mu(w[r]);

  LinearProjection lp;
  lp.names = coefficient_names(k);
  lp.coef.push_back(intercept);
  for (Eigen::Index r = 0; r < q; ++r) lp.coef.push_back(slope(r));
  lp.se.assign(lp.coef.size(), 0.0);
  lp.provenance = dgp::Provenance::closed_form;
  return lp;
}

LinearProjection monte_carlo_lp(const dgp::ModelSpec& spec, std::size_t draws, std::uint64_t seed) {
  const std::size_t k = spec.num_controls;
  const auto q = static_cast<Eigen::Index>(k + 2);
  const auto fill = [&](const dgp::Draw& dr, Eigen::VectorXd& w) {
    w(0) = 1.0;
    w(1) = dr.d;
    for (std::size_t j = 0; j < k; ++j) w(2 + static_cast<Eigen::Index>(j)) = dr.x[j];
  };
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd my = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd w(q);
  dgp::Draw dr;
  {
    Rng rng = make_rng(seed);
    for (std::size_t i = 0; i < draws; ++i) {
      dgp::draw_row(spec, rng, dr);
      fill(dr, w);
      m.selfadjointView<Eigen::Lower>().rankUpdate(w);
      my += w * dr.y;
    }
  }
  m = m.selfadjointView<Eigen::Lower>();
  const Eigen::MatrixXd m_inv = checked_inverse(m, "theoretical projection", static_cast<double>(draws));
  const Eigen::VectorXd beta = m_inv * my;

  // Second pass over the same stream for the sandwich variance.
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(q, q);
  {
    Rng rng = make_rng(seed);
    for (std::size_t i = 0; i < draws; ++i) {
      dgp::draw_row(spec, rng, dr);
      fill(dr, w);
      const double e = dr.y - w.dot(beta);
      meat.selfadjointView<Eigen::Lower>().rankUpdate(w, e * e);
    }
  }
  meat = meat.selfadjointView<Eigen::Lower>();
  const Eigen::MatrixXd cov = m_inv * meat * m_inv;

  LinearProjection lp;
  lp.names = coefficient_names(k);
  lp.coef.assign(beta.data(), beta.data() + q);
  for (Eigen::Index j = 0; j < q; ++j) lp.se.push_back(std::sqrt(std::max(0.0, cov(j, j))));
  lp.provenance = dgp::Provenance::monte_carlo;
  return lp;
}

} // namespace

double LinearFit::coefficient(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw PreconditionError("no coefficient named '" + name + "'");
  return coef[static_cast<std::size_t>(it - names.begin())];
}

double LinearFit::standard_error(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw PreconditionError("no coefficient named '" + name + "'");
  return se[static_cast<std::size_t>(it - names.begin())];
}

Estimate LinearFit::as_estimate(EstimatorId id, const std::string& name) const {
  Estimate e;
  e.id = id;
  e.value = coefficient(name);
  e.se = standard_error(name);
  e.n_effective = static_cast<double>(n);
  e.warnings = warnings;
  return e;
}

LinearFit ols_fit(const DataView& data) {
  const std::size_t k = data.num_controls();
  if (data.size() < k + 2) throw PreconditionError("ols_fit needs at least as many rows as coefficients");
  const Eigen::MatrixXd w = design(data, data.d());
  const Eigen::VectorXd y = to_vector(data.y());
  const Eigen::VectorXd beta = least_squares(w, y, "ols_fit");
  const Eigen::VectorXd resid = y - w * beta;

  LinearFit fit;
  fit.names = coefficient_names(k);
  fit.coef.assign(beta.data(), beta.data() + beta.size());
  fit.se = sandwich_se(w, w, resid);
  fit.n = data.size();
  return fit;
}

LinearProjection theoretical_lp(const dgp::ModelSpec& spec, std::size_t mc_draws, std::uint64_t seed) {
  spec.validate();
  if (spec.outcome.family != dgp::Family::linear) {
    throw UnsupportedFamilyError(std::string("theoretical_lp needs the linear family, got '") +
                                 dgp::to_string(spec.outcome.family) + "'");
  }
  if (affine_spec(spec)) return closed_form_lp(spec);
  if (mc_draws < 1000) throw PreconditionError("theoretical_lp needs at least 1000 Monte Carlo draws");
  return monte_carlo_lp(spec, mc_draws, seed);
}

LinearFit tsls_fit(const DataView& data, const EstimatorConfig& config) {
  if (!data.has_instrument()) throw PreconditionError("tsls_fit needs an instrument column");
  const std::size_t k = data.num_controls();
  const std::size_t n = data.size();
  if (n < k + 3) throw PreconditionError("tsls_fit needs more rows than first-stage coefficients");

  const Eigen::MatrixXd w = design(data, data.d());
  const Eigen::MatrixXd q = design(data, data.z());
  const Eigen::VectorXd y = to_vector(data.y());
  const Eigen::VectorXd dcol = to_vector(data.d());

  // First stage and the F statistic on the excluded instrument.
  const Eigen::VectorXd pi = least_squares(q, dcol, "tsls first stage");
  const double rss_u = (dcol - q * pi).squaredNorm();
  Eigen::MatrixXd q_r(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k + 1));
  q_r.col(0) = q.col(0);
  q_r.rightCols(static_cast<Eigen::Index>(k)) = q.rightCols(static_cast<Eigen::Index>(k));
  const Eigen::VectorXd pi_r = least_squares(q_r, dcol, "tsls restricted first stage");
  const double rss_r = (dcol - q_r * pi_r).squaredNorm();
  const double dof = static_cast<double>(n - k - 2);
  const double f_stat =
    rss_u > 0.0 ? (rss_r - rss_u) / (rss_u / dof) : std::numeric_limits<double>::infinity();

  const Eigen::MatrixXd w_hat = q * (checked_inverse(q.transpose() * q, "tsls", static_cast<double>(n)) *
                                     (q.transpose() * w));
  const Eigen::VectorXd beta =
    checked_inverse(w_hat.transpose() * w, "tsls second stage", static_cast<double>(n)) * (w_hat.transpose() * y);
  const Eigen::VectorXd resid = y - w * beta;

  LinearFit fit;
  fit.names = coefficient_names(k);
  fit.coef.assign(beta.data(), beta.data() + beta.size());
  fit.se = sandwich_se(w_hat, w, resid);
  fit.first_stage_f = f_stat;
  fit.n = n;
  if (!(f_stat >= config.weak_instrument_f)) {
    fit.warnings.push_back("weak instrument: first-stage F = " + format_double(f_stat) + " < " +
                           format_double(config.weak_instrument_f));
  }
  return fit;
}

} // namespace endo::est
