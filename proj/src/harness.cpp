#include "endo/errors.hpp"
#include "endo/format.hpp"
#include "endo/harness.hpp"
#include "endo/parallel.hpp"
#include "endo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <map>

namespace endo::harness {

namespace {

using est::EstimatorId;

// Seed streams outside the replicate range 1..reps.
constexpr std::uint64_t pilot_stream = 0;
constexpr std::uint64_t oracle_stream = 0xffff'ffff'0000'0001ULL;
constexpr std::uint64_t bootstrap_stream = 0xffff'ffff'0000'0002ULL;

double median_of(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  const std::size_t mid = s.size() / 2;
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid), s.end());
  double m = s[mid];
  if (s.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return v >= lo && v <= hi; }
};

Range range_of(std::span<const double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

struct Medians {
  double d = 0.0;
  double z = 0.0;
  std::vector<double> x;
  Range d_range, z_range;
  std::vector<Range> x_range;
};

Medians pilot_medians(const ExperimentConfig& cfg) {
  const DataSet pilot = dgp::sample(cfg.model, cfg.pilot_n, derive_seed(cfg.master_seed, pilot_stream));
  Medians m;
  m.d = median_of(pilot.d);
  m.d_range = range_of(pilot.d);
  for (const auto& col : pilot.x) {
    m.x.push_back(median_of(col));
    m.x_range.push_back(range_of(col));
  }
  if (pilot.z) {
    m.z = median_of(*pilot.z);
    m.z_range = range_of(*pilot.z);
  }
  return m;
}

double resolve(const Value& v, double median) { return v.median ? median : v.number; }

OracleEntry entry(const dgp::OracleValue& v) { return {v.value, v.se, dgp::to_string(v.provenance)}; }

class OracleBook {
public:
  OracleBook(const ExperimentConfig& cfg) : cfg_(cfg) {}

  void fill(const EstimatorSpec& spec, PlannedRow& row) {
    try {
      row.oracle = compute(spec, row);
    } catch (const Error& err) {
      row.oracle_note = err.what();
    }
    if (spec.id == EstimatorId::ols) {
      try {
        const est::LinearProjection& lp = projection();
        const auto it = std::find(lp.names.begin(), lp.names.end(), spec.coefficient);
        row.projection = lp.coef[static_cast<std::size_t>(it - lp.names.begin())];
      } catch (const Error&) {
      }
    }
  }

private:
  std::uint64_t seed() const { return derive_seed(cfg_.master_seed, oracle_stream); }

  const est::LinearProjection& projection() {
    if (!projection_) projection_ = est::theoretical_lp(cfg_.model, cfg_.projection_draws, seed());
    return *projection_;
  }

  const dgp::BinaryEffects& binary() {
    if (!binary_) binary_.emplace(cfg_.model, cfg_.oracle_draws, seed());
    return *binary_;
  }

  std::optional<OracleEntry> structural(const std::string& coefficient) const {
    const auto& m = cfg_.model;
    if (m.outcome.family != dgp::Family::linear) {
      throw UnsupportedFamilyError("structural coefficients exist only for the linear family");
    }
    if (coefficient == "d") return OracleEntry{m.outcome.tau, 0.0, "closed_form"};
    if (coefficient == "intercept") return OracleEntry{m.outcome.intercept, 0.0, "closed_form"};
    const std::size_t j = std::stoul(coefficient.substr(1)) - 1;
    return OracleEntry{m.outcome.beta.at(j), 0.0, "closed_form"};
  }

  std::optional<OracleEntry> compute(const EstimatorSpec& spec, const PlannedRow& row) {
    const auto& m = cfg_.model;
    const std::size_t draws = cfg_.oracle_draws;
    switch (spec.id) {
    case EstimatorId::ols:
    case EstimatorId::tsls: return structural(spec.coefficient);
    case EstimatorId::iv_ratio: return structural("d");
    case EstimatorId::clar_continuous:
    case EstimatorId::clar_triangular: return entry(dgp::true_clar(m, *row.eval_d, row.eval_x, draws, seed()));
    case EstimatorId::lar_continuous:
    case EstimatorId::lar_triangular: return entry(dgp::true_lar(m, *row.eval_d, draws, seed()));
    case EstimatorId::clar_binary: return entry(binary().clar(1, row.eval_x));
    case EstimatorId::lar_binary: return entry(binary().lar(static_cast<int>(*row.eval_d)));
    case EstimatorId::counterfactual_mean:
      if (m.treatment_kind() == dgp::TreatmentKind::binary) {
        throw UnsupportedFamilyError("no oracle for binary counterfactual means");
      }
      return entry(dgp::true_counterfactual_mean(m, *row.eval_d, *row.d_tilde, draws, seed()));
    case EstimatorId::att:
      if (m.treatment_kind() == dgp::TreatmentKind::binary) return entry(binary().att());
      if (*row.d_tilde != *row.eval_d) throw UnsupportedFamilyError("att oracle needs d_tilde = d");
      return entry(dgp::true_lar(m, *row.eval_d, draws, seed()));
    case EstimatorId::ate:
      if (m.treatment_kind() == dgp::TreatmentKind::binary) return entry(binary().ate());
      return entry(dgp::true_ate_continuous(m, *row.eval_d, draws, seed()));
    }
    return std::nullopt;
  }

  const ExperimentConfig& cfg_;
  std::optional<est::LinearProjection> projection_;
  std::optional<dgp::BinaryEffects> binary_;
};

bool uses_control_variable(const EstimatorSpec& spec) {
  return spec.id == EstimatorId::clar_triangular || spec.id == EstimatorId::lar_triangular ||
         spec.mode == est::EffectMode::triangular;
}

est::Estimate evaluate(const EstimatorSpec& spec, const PlannedRow& row, const DataView& view) {
  std::optional<est::ControlVariableColumn> v;
  if (uses_control_variable(spec)) v = est::construct_control_variable(view, spec.config);
  const auto& cfg = spec.config;
  const double d = row.eval_d.value_or(0.0);
  switch (spec.id) {
  case EstimatorId::ols: return est::ols_fit(view).as_estimate(EstimatorId::ols, spec.coefficient);
  case EstimatorId::tsls: return est::tsls_fit(view, cfg).as_estimate(EstimatorId::tsls, spec.coefficient);
  case EstimatorId::iv_ratio: return est::iv_ratio(view, *row.eval_z, row.eval_x, cfg);
  case EstimatorId::clar_continuous: return est::clar_continuous(view, d, row.eval_x, cfg);
  case EstimatorId::lar_continuous: return est::lar_continuous(view, d, cfg);
  case EstimatorId::clar_binary: return est::clar_binary(view, row.eval_x, cfg);
  case EstimatorId::lar_binary: return est::lar_binary(view, static_cast<int>(d), cfg);
  case EstimatorId::clar_triangular: return est::clar_triangular(view, *v, d, row.eval_x, cfg);
  case EstimatorId::lar_triangular: return est::lar_triangular(view, *v, d, cfg);
  case EstimatorId::counterfactual_mean:
    return est::counterfactual_mean(view, d, row.d_tilde.value_or(d), cfg, spec.mode, v ? &*v : nullptr);
  case EstimatorId::att: return est::att(view, d, row.d_tilde.value_or(d), cfg, spec.mode, v ? &*v : nullptr);
  case EstimatorId::ate: return est::ate(view, d, cfg, spec.mode, v ? &*v : nullptr);
  }
  throw PreconditionError("unknown estimator");
}

struct RowOutcome {
  bool ok = false;
  double value = 0.0;
  double trimmed = 0.0;
  std::optional<double> se;
  std::size_t warnings = 0;
  std::string error;
};

struct DiagOutcome {
  bool ok = false;
  diag::DiagnosticReport report;
};

struct ReplicateResult {
  std::vector<RowOutcome> rows;
  std::vector<DiagOutcome> diags;
};

diag::DiagnosticReport run_diagnostic(const DiagnosticSpec& spec, const DataView& view,
                                      std::pair<double, double> at) {
  switch (spec.kind) {
  case DiagnosticKind::separability: {
    diag::SeparabilityConfig c;
    if (spec.threshold) c.threshold = *spec.threshold;
    c.smoother.bandwidths = spec.bandwidths;
    return diag::separability_check(view, c);
  }
  case DiagnosticKind::support_overlap: {
    diag::OverlapConfig c;
    if (spec.threshold) c.threshold = *spec.threshold;
    c.smoother.bandwidths = spec.bandwidths;
    return diag::support_overlap(view, at.first, at.second, c);
  }
  case DiagnosticKind::cv_uniformity: {
    const est::ControlVariableColumn v = est::construct_control_variable(view, spec.config);
    return diag::cv_uniformity(v.v, spec.threshold.value_or(0.05));
  }
  }
  throw PreconditionError("unknown diagnostic");
}

ReplicateResult run_replicate(const ExperimentConfig& cfg, const Plan& plan, std::size_t r) {
  const std::uint64_t seed = derive_seed(cfg.master_seed, r);
  const DataSet data = dgp::sample(cfg.model, cfg.n, seed);
  const DataView view(data);
  ReplicateResult out;
  out.rows.resize(plan.rows.size());
  for (std::size_t i = 0; i < plan.rows.size(); ++i) {
    const PlannedRow& row = plan.rows[i];
    const EstimatorSpec& spec = cfg.estimators[row.estimator];
    RowOutcome& o = out.rows[i];
    try {
      const est::Estimate e = evaluate(spec, row, view);
      if (!std::isfinite(e.value)) throw InstabilityError("estimate is not finite");
      o.value = e.value;
      o.trimmed = e.trimmed_fraction;
      o.warnings = e.warnings.size();
      if (spec.bootstrap > 0) {
        o.se = est::bootstrap_se([&](const DataView& b) { return evaluate(spec, row, b).value; }, view,
                                 spec.bootstrap, derive_seed(seed ^ bootstrap_stream, i));
      }
      o.ok = true;
    } catch (const Error& err) {
      o.error = err.what();
    }
  }
  out.diags.resize(cfg.diagnostics.size());
  for (std::size_t i = 0; i < cfg.diagnostics.size(); ++i) {
    try {
      out.diags[i].report = run_diagnostic(cfg.diagnostics[i], view, plan.diagnostic_points.at(i));
      out.diags[i].ok = true;
    } catch (const Error& err) {
      out.diags[i].report.details = err.what();
    }
  }
  return out;
}

const char* diagnostic_name(DiagnosticKind k) {
  switch (k) {
  case DiagnosticKind::separability: return "separability_check";
  case DiagnosticKind::support_overlap: return "support_overlap";
  case DiagnosticKind::cv_uniformity: return "cv_uniformity";
  }
  return "?";
}

} // namespace

Plan plan_experiment(const ExperimentConfig& config) {
  config.model.validate();
  bool need_pilot = !config.diagnostics.empty();
  for (const auto& e : config.estimators) need_pilot = need_pilot || !e.points.empty() || e.d_tilde;
  const Medians med = need_pilot ? pilot_medians(config) : Medians{};
  const auto check_support = [&](const std::string& label, const char* what, double v, const Range& r) {
    if (!r.contains(v)) {
      throw ConfigError(label + ": " + what + " = " + format_double(v) + " lies outside the support of the model [" +
                        format_double(r.lo) + ", " + format_double(r.hi) + "]");
    }
  };

  Plan plan;
  OracleBook oracles(config);
  for (std::size_t e = 0; e < config.estimators.size(); ++e) {
    const EstimatorSpec& spec = config.estimators[e];
    const auto add = [&](const PointSpec* p) {
      PlannedRow row;
      row.estimator = e;
      if (p) {
        if (p->d) row.eval_d = resolve(*p->d, med.d);
        if (p->z) row.eval_z = resolve(*p->z, med.z);
        for (std::size_t j = 0; j < p->x.size(); ++j) row.eval_x.push_back(resolve(p->x[j], med.x.empty() ? 0.0 : med.x[j]));
        if (row.eval_d) check_support(spec.label, "d", *row.eval_d, med.d_range);
        if (row.eval_z) check_support(spec.label, "z", *row.eval_z, med.z_range);
        for (std::size_t j = 0; j < row.eval_x.size(); ++j) {
          check_support(spec.label, "x", row.eval_x[j], med.x_range[j]);
        }
        if (row.eval_d && (spec.id == EstimatorId::counterfactual_mean || spec.id == EstimatorId::att)) {
          row.d_tilde = spec.d_tilde ? resolve(*spec.d_tilde, med.d) : *row.eval_d;
          check_support(spec.label, "d_tilde", *row.d_tilde, med.d_range);
        }
      }
      oracles.fill(spec, row);
      plan.rows.push_back(std::move(row));
    };
    if (spec.points.empty()) {
      add(nullptr);
    } else {
      for (const auto& p : spec.points) add(&p);
    }
  }
  for (const auto& d : config.diagnostics) {
    plan.diagnostic_points.emplace_back(resolve(d.d, med.d), resolve(d.d_tilde, med.d));
  }
  return plan;
}

ExperimentSummary run_experiment(const ExperimentConfig& config, int workers) {
  return run_experiment(config, plan_experiment(config), workers);
}

ExperimentSummary run_experiment(const ExperimentConfig& config, const Plan& plan, int workers) {
  const int w = workers > 0 ? workers : parallel::resolve_workers(config.workers);
  const std::size_t reps = config.reps;
  std::vector<ReplicateResult> results(reps);
  std::vector<std::exception_ptr> errors(reps);
  const auto body = [&](std::size_t r) {
    try {
      results[r] = run_replicate(config, plan, r + 1);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  };
  if (w <= 1 || reps <= 1) {
    for (std::size_t r = 0; r < reps; ++r) body(r);
  } else {
    const long long count = static_cast<long long>(reps);
    ENDO_OMP(parallel for num_threads(w) schedule(dynamic, 1))
    for (long long r = 0; r < count; ++r) body(static_cast<std::size_t>(r));
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ExperimentSummary s;
  s.name = config.name;
  s.dgp = config.dgp;
  s.n = config.n;
  s.reps = reps;
  s.master_seed = config.master_seed;
  for (std::size_t i = 0; i < plan.rows.size(); ++i) {
    const PlannedRow& p = plan.rows[i];
    const EstimatorSpec& spec = config.estimators[p.estimator];
    RowSummary row;
    row.label = spec.label;
    row.estimator = est::to_string(spec.id);
    row.eval_d = spec.id == EstimatorId::iv_ratio ? p.eval_z : p.eval_d;
    row.eval_x = p.eval_x;
    row.d_tilde = p.d_tilde;
    row.oracle = p.oracle;
    row.projection = p.projection;
    row.oracle_note = p.oracle_note;

    std::vector<double> values;
    double trimmed = 0.0, se_sum = 0.0;
    std::size_t se_count = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      const RowOutcome& o = results[r].rows[i];
      if (!o.ok) {
        ++row.failures;
        if (row.first_error.empty()) row.first_error = o.error;
        continue;
      }
      values.push_back(o.value);
      trimmed += o.trimmed;
      row.warnings += o.warnings;
      if (o.se) {
        se_sum += *o.se;
        ++se_count;
      }
    }
    row.successes = values.size();
    if (2 * row.failures > reps) {
      throw Error("estimator '" + spec.label + "' failed in " + std::to_string(row.failures) + " of " +
                  std::to_string(reps) + " replicates: " + row.first_error);
    }
    const double m = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= m;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    row.mean = mean;
    row.sd = std::sqrt(ss / m);
    row.trimmed_frac = trimmed / m;
    if (se_count > 0) row.mean_se = se_sum / static_cast<double>(se_count);
    if (row.oracle) {
      const double truth = row.oracle->value;
      row.bias = mean - truth;
      double sq = 0.0;
      for (double v : values) sq += (v - truth) * (v - truth);
      row.rmse = std::sqrt(sq / m);
    }
    s.rows.push_back(std::move(row));
  }

  for (std::size_t i = 0; i < config.diagnostics.size(); ++i) {
    DiagnosticSummary d;
    d.name = diagnostic_name(config.diagnostics[i].kind);
    std::vector<double> stats;
    for (std::size_t r = 0; r < reps; ++r) {
      const DiagOutcome& o = results[r].diags[i];
      if (!o.ok) {
        ++d.failures;
        continue;
      }
      d.threshold = o.report.threshold;
      switch (o.report.verdict) {
      case diag::Verdict::pass: ++d.pass; break;
      case diag::Verdict::warn: ++d.warn; break;
      case diag::Verdict::fail: ++d.fail; break;
      }
      if (std::isfinite(o.report.statistic)) stats.push_back(o.report.statistic);
    }
    if (!stats.empty()) {
      double sum = 0.0;
      for (double v : stats) sum += v;
      d.mean_statistic = sum / static_cast<double>(stats.size());
      d.median_statistic = median_of(stats);
    }
    s.diagnostics.push_back(std::move(d));
  }
  return s;
}

} // namespace endo::harness
