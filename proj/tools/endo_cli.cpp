#include "endo/dataset.hpp"
#include "endo/diagnostics.hpp"
#include "endo/errors.hpp"
#include "endo/estimators.hpp"
#include "endo/format.hpp"
#include "endo/harness.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

namespace fs = std::filesystem;
using namespace endo;

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_runtime = 2;

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

int env_workers() {
  const auto v = env("ENDO_WORKERS");
  if (!v) return 0;
  try {
    std::size_t pos = 0;
    const int w = std::stoi(*v, &pos);
    if (pos == v->size() && w >= 0) return w;
  } catch (const std::exception&) {
  }
  throw ConfigError("ENDO_WORKERS must be a non-negative integer, got '" + *v + "'");
}

fs::path output_path(const std::string& configured, const std::string& output_dir) {
  const fs::path p(configured);
  if (output_dir.empty() || p.is_absolute()) return p;
  return fs::path(output_dir) / p;
}

std::string point_text(const harness::RowSummary& r) {
  std::string s;
  if (r.eval_d) s += "d=" + format_double(*r.eval_d);
  if (!r.eval_x.empty()) {
    s += s.empty() ? "x=(" : " x=(";
    for (std::size_t j = 0; j < r.eval_x.size(); ++j) s += (j ? "," : "") + format_double(r.eval_x[j]);
    s += ")";
  }
  if (r.d_tilde) s += " d~=" + format_double(*r.d_tilde);
  return s;
}

int cmd_run(const std::string& config_path, int workers, std::string output_dir, bool quiet) {
  const harness::ExperimentConfig cfg = harness::load_config(config_path);
  if (workers == 0) workers = env_workers();
  if (output_dir.empty()) output_dir = env("ENDO_OUTPUT_DIR").value_or("");
  if (!output_dir.empty()) fs::create_directories(output_dir);

  const auto start = std::chrono::steady_clock::now();
  const harness::ExperimentSummary summary = harness::run_experiment(cfg, workers);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::string csv = cfg.csv_output, json = cfg.json_output;
  if (csv.empty() && json.empty()) {
    csv = cfg.name + ".csv";
    json = cfg.name + ".json";
  }
  if (!csv.empty()) harness::export_summary(summary, harness::ExportFormat::csv, output_path(csv, output_dir));
  if (!json.empty()) harness::export_summary(summary, harness::ExportFormat::json, output_path(json, output_dir));
  if (!quiet) std::cout << summary.to_text();
  std::cerr << "wall time " << format_double(std::round(seconds * 1000.0) / 1000.0) << " s\n";
  return exit_ok;
}

int cmd_oracle(const std::string& config_path) {
  const harness::ExperimentConfig cfg = harness::load_config(config_path);
  if (const auto tau = cfg.model.true_tau()) std::cout << "tau = " << format_double(*tau) << '\n';
  const harness::Plan plan = harness::plan_experiment(cfg);
  for (const auto& row : plan.rows) {
    const auto& spec = cfg.estimators[row.estimator];
    std::cout << spec.label;
    harness::RowSummary tmp;
    tmp.eval_d = row.eval_z ? row.eval_z : row.eval_d;
    tmp.eval_x = row.eval_x;
    tmp.d_tilde = row.d_tilde;
    const std::string at = point_text(tmp);
    if (!at.empty()) std::cout << " [" << at << "]";
    if (row.oracle) {
      std::cout << " = " << format_double(row.oracle->value);
      if (row.oracle->se > 0.0) std::cout << " +/- " << format_double(row.oracle->se);
      std::cout << " (" << row.oracle->provenance << ")";
    } else {
      std::cout << ": no oracle (" << row.oracle_note << ")";
    }
    if (row.projection) std::cout << ", linear projection " << format_double(*row.projection);
    std::cout << '\n';
  }
  return exit_ok;
}

double median(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t m = s.size() / 2;
  return s.size() % 2 ? s[m] : 0.5 * (s[m - 1] + s[m]);
}

void report_estimate(const std::string& label, const std::function<est::Estimate()>& f, nlohmann::ordered_json& out,
                     bool text) {
  try {
    const est::Estimate e = f();
    nlohmann::ordered_json j = e.to_json();
    j["label"] = label;
    out.push_back(j);
    if (text) {
      std::cout << "  " << label << " = " << format_double(e.value);
      if (e.se) std::cout << " (se " << format_double(*e.se) << ")";
      if (e.trimmed_fraction > 0.0) std::cout << ", trimmed " << format_double(e.trimmed_fraction);
      std::cout << '\n';
      for (const auto& w : e.warnings) std::cout << "    warning: " << w << '\n';
    }
  } catch (const Error& err) {
    out.push_back({{"label", label}, {"error", err.what()}});
    if (text) std::cout << "  " << label << ": " << err.what() << '\n';
  }
}

int cmd_diagnose(const std::string& csv_path, const std::string& map_spec, std::optional<double> d_opt,
                 std::optional<double> d_tilde_opt, bool as_json) {
  const DataSet data = read_csv(csv_path, ColumnMap::parse(map_spec));
  const DataView view(data);
  const bool binary = view.binary_treatment();
  std::vector<double> x_med;
  for (std::size_t j = 0; j < view.num_controls(); ++j) x_med.push_back(median(view.x(j)));
  const double d = d_opt.value_or(binary ? 0.0 : median(view.d()));
  double d_tilde = d_tilde_opt.value_or(binary ? 1.0 : d);
  if (!d_tilde_opt && !binary) {
    std::vector<double> s(view.d().begin(), view.d().end());
    std::sort(s.begin(), s.end());
    d_tilde = s[(3 * s.size()) / 4];
  }

  nlohmann::ordered_json diags = nlohmann::ordered_json::array();
  nlohmann::ordered_json ests = nlohmann::ordered_json::array();
  const auto diagnostic = [&](const std::function<diag::DiagnosticReport()>& f, const std::string& name) {
    try {
      const diag::DiagnosticReport r = f();
      diags.push_back(r.to_json());
      if (!as_json) std::cout << r.to_text() << '\n';
    } catch (const Error& err) {
      diags.push_back({{"name", name}, {"error", err.what()}});
      if (!as_json) std::cout << name << ": error: " << err.what() << '\n';
    }
  };

  if (!as_json) std::cout << "rows " << view.size() << ", treatment " << (binary ? "binary" : "continuous") << '\n';
  diagnostic([&] { return diag::separability_check(view); }, "separability_check");
  diagnostic([&] { return diag::support_overlap(view, d, d_tilde); }, "support_overlap");
  const est::EstimatorConfig cfg;
  std::optional<est::ControlVariableColumn> v;
  if (view.has_instrument()) {
    diagnostic(
        [&] {
          v = est::construct_control_variable(view, cfg);
          return diag::cv_uniformity(v->v);
        },
        "cv_uniformity");
  }

  if (!as_json) std::cout << "estimates:\n";
  const bool text = !as_json;
  report_estimate("ols_d", [&] { return est::ols_fit(view).as_estimate(est::EstimatorId::ols, "d"); }, ests, text);
  if (view.has_instrument()) {
    report_estimate("tsls_d", [&] { return est::tsls_fit(view, cfg).as_estimate(est::EstimatorId::tsls, "d"); }, ests,
                    text);
    report_estimate("iv_ratio", [&] { return est::iv_ratio(view, median(view.z()), x_med, cfg); }, ests, text);
  }
  if (binary) {
    report_estimate("clar_binary", [&] { return est::clar_binary(view, x_med, cfg); }, ests, text);
    report_estimate("lar_binary", [&] { return est::lar_binary(view, 1, cfg); }, ests, text);
    report_estimate("att", [&] { return est::att(view, 1.0, 1.0, cfg, est::EffectMode::conditional_independence); },
                    ests, text);
    report_estimate("ate", [&] { return est::ate(view, 1.0, cfg, est::EffectMode::conditional_independence); }, ests,
                    text);
  } else {
    report_estimate("clar_continuous", [&] { return est::clar_continuous(view, d, x_med, cfg); }, ests, text);
    report_estimate("lar_continuous", [&] { return est::lar_continuous(view, d, cfg); }, ests, text);
    if (v) {
      report_estimate("clar_triangular", [&] { return est::clar_triangular(view, *v, d, x_med, cfg); }, ests, text);
      report_estimate("lar_triangular", [&] { return est::lar_triangular(view, *v, d, cfg); }, ests, text);
    }
  }
  if (as_json) {
    nlohmann::ordered_json out;
    out["rows"] = view.size();
    out["treatment"] = binary ? "binary" : "continuous";
    out["d"] = d;
    out["d_tilde"] = d_tilde;
    out["diagnostics"] = diags;
    out["estimates"] = ests;
    std::cout << out.dump(2) << '\n';
  }
  return exit_ok;
}

int cmd_list_dgps() {
  for (const auto& e : dgp::registry()) std::cout << e.name << "  " << e.description << '\n';
  return exit_ok;
}

int cmd_list_estimators() {
  for (const auto& e : est::estimator_registry()) std::cout << est::to_string(e.id) << "  " << e.description << '\n';
  return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonparametric treatment effect estimators and Monte Carlo experiments"};
  app.require_subcommand(1);

  std::string config_path, output_dir, csv_path, map_spec;
  int workers = 0;
  bool quiet = false, as_json = false;
  std::optional<double> d_opt, d_tilde_opt;

  auto* run = app.add_subcommand("run", "Run an experiment file and write its summary");
  run->add_option("config", config_path, "Experiment file")->required();
  run->add_option("-w,--workers", workers, "Worker threads (0: ENDO_WORKERS, the config, or all cores)")
      ->check(CLI::NonNegativeNumber);
  run->add_option("-o,--output-dir", output_dir, "Directory for relative output paths (default: ENDO_OUTPUT_DIR)");
  run->add_flag("-q,--quiet", quiet, "Do not print the summary table");

  auto* oracle = app.add_subcommand("oracle", "Print ground-truth values for an experiment file");
  oracle->add_option("config", config_path, "Experiment file")->required();

  auto* diagnose = app.add_subcommand("diagnose", "Run diagnostics and estimators on a CSV file");
  diagnose->add_option("csv", csv_path, "Input CSV with a header row")->required();
  diagnose->add_option("--map", map_spec, "Column mapping, e.g. y=score,d=dose,x=age;income,z=offer")->required();
  diagnose->add_option("--d", d_opt, "Treatment level for the estimators (default: median, or 0 when binary)");
  diagnose->add_option("--d-tilde", d_tilde_opt, "Comparison level for the overlap check");
  diagnose->add_flag("--json", as_json, "Emit JSON");

  auto* list_dgps = app.add_subcommand("list-dgps", "List registered data-generating processes");
  auto* list_estimators = app.add_subcommand("list-estimators", "List estimators");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return exit_config;
  }

  try {
    if (*run) return cmd_run(config_path, workers, output_dir, quiet);
    if (*oracle) return cmd_oracle(config_path);
    if (*diagnose) return cmd_diagnose(csv_path, map_spec, d_opt, d_tilde_opt, as_json);
    if (*list_dgps) return cmd_list_dgps();
    if (*list_estimators) return cmd_list_estimators();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_runtime;
  }
  return exit_config;
}
