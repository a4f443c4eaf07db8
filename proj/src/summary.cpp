#include "endo/errors.hpp"
#include "endo/format.hpp"
#include "endo/harness.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace endo::harness {

namespace {

using json = nlohmann::ordered_json;

json optional_number(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

std::optional<double> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string csv_optional(const std::optional<double>& v) { return v ? format_field(*v) : std::string(); }

std::string join_x(const std::vector<double>& x) {
  std::string out;
  for (std::size_t j = 0; j < x.size(); ++j) out += (j ? ";" : "") + format_double(x[j]);
  return out;
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

} // namespace

json ExperimentSummary::to_json() const {
  json j;
  j["format"] = "endo-experiment-summary";
  j["version"] = 1;
  j["name"] = name;
  j["dgp"] = dgp;
  j["n"] = n;
  j["reps"] = reps;
  j["master_seed"] = master_seed;
  json rows_json = json::array();
  for (const auto& r : rows) {
    json row;
    row["label"] = r.label;
    row["estimator"] = r.estimator;
    row["eval_d"] = optional_number(r.eval_d);
    row["eval_x"] = r.eval_x;
    row["d_tilde"] = optional_number(r.d_tilde);
    if (r.oracle) {
      row["oracle"] = {{"value", r.oracle->value}, {"se", r.oracle->se}, {"provenance", r.oracle->provenance}};
    } else {
      row["oracle"] = nullptr;
    }
    row["oracle_note"] = r.oracle_note;
    row["projection"] = optional_number(r.projection);
    row["mean"] = r.mean;
    row["sd"] = r.sd;
    row["bias"] = optional_number(r.bias);
    row["rmse"] = optional_number(r.rmse);
    row["trimmed_frac"] = r.trimmed_frac;
    row["mean_se"] = optional_number(r.mean_se);
    row["failures"] = r.failures;
    row["successes"] = r.successes;
    row["warnings"] = r.warnings;
    row["first_error"] = r.first_error;
    rows_json.push_back(std::move(row));
  }
  j["rows"] = std::move(rows_json);
  json diags = json::array();
  for (const auto& d : diagnostics) {
    diags.push_back({{"name", d.name},
                     {"mean_statistic", d.mean_statistic},
                     {"median_statistic", d.median_statistic},
                     {"threshold", d.threshold},
                     {"pass", d.pass},
                     {"warn", d.warn},
                     {"fail", d.fail},
                     {"failures", d.failures}});
  }
  j["diagnostics"] = std::move(diags);
  return j;
}

ExperimentSummary ExperimentSummary::from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "endo-experiment-summary" || j.at("version").get<int>() != 1) {
      throw ConfigError("not a version-1 experiment summary");
    }
    ExperimentSummary s;
    s.name = j.at("name").get<std::string>();
    s.dgp = j.at("dgp").get<std::string>();
    s.n = j.at("n").get<std::size_t>();
    s.reps = j.at("reps").get<std::size_t>();
    s.master_seed = j.at("master_seed").get<std::uint64_t>();
    for (const auto& row : j.at("rows")) {
      RowSummary r;
      r.label = row.at("label").get<std::string>();
      r.estimator = row.at("estimator").get<std::string>();
      r.eval_d = read_optional(row, "eval_d");
      r.eval_x = row.at("eval_x").get<std::vector<double>>();
      r.d_tilde = read_optional(row, "d_tilde");
      if (!row.at("oracle").is_null()) {
        const auto& o = row.at("oracle");
        r.oracle = OracleEntry{o.at("value").get<double>(), o.at("se").get<double>(),
                               o.at("provenance").get<std::string>()};
      }
      r.oracle_note = row.at("oracle_note").get<std::string>();
      r.projection = read_optional(row, "projection");
      r.mean = row.at("mean").get<double>();
      r.sd = row.at("sd").get<double>();
      r.bias = read_optional(row, "bias");
      r.rmse = read_optional(row, "rmse");
      r.trimmed_frac = row.at("trimmed_frac").get<double>();
      r.mean_se = read_optional(row, "mean_se");
      r.failures = row.at("failures").get<std::size_t>();
      r.successes = row.at("successes").get<std::size_t>();
      r.warnings = row.at("warnings").get<std::size_t>();
      r.first_error = row.at("first_error").get<std::string>();
      s.rows.push_back(std::move(r));
    }
    for (const auto& d : j.at("diagnostics")) {
      DiagnosticSummary ds;
      ds.name = d.at("name").get<std::string>();
      ds.mean_statistic = d.at("mean_statistic").get<double>();
      ds.median_statistic = d.at("median_statistic").get<double>();
      ds.threshold = d.at("threshold").get<double>();
      ds.pass = d.at("pass").get<std::size_t>();
      ds.warn = d.at("warn").get<std::size_t>();
      ds.fail = d.at("fail").get<std::size_t>();
      ds.failures = d.at("failures").get<std::size_t>();
      s.diagnostics.push_back(std::move(ds));
    }
    return s;
  } catch (const nlohmann::json::exception& err) {
    throw ConfigError(std::string("malformed experiment summary: ") + err.what());
  }
}

std::string ExperimentSummary::to_csv() const {
  std::string out = "estimator_id,eval_d,eval_x,oracle,mean,bias,sd,rmse,trimmed_frac,failures\n";
  for (const auto& r : rows) {
    out += csv_text(r.label);
    out += ',' + csv_optional(r.eval_d);
    out += ',' + join_x(r.eval_x);
    out += ',' + (r.oracle ? format_field(r.oracle->value) : std::string());
    out += ',' + format_field(r.mean);
    out += ',' + csv_optional(r.bias);
    out += ',' + format_field(r.sd);
    out += ',' + csv_optional(r.rmse);
    out += ',' + format_field(r.trimmed_frac);
    out += ',' + std::to_string(r.failures);
    out += '\n';
  }
  return out;
}

std::string ExperimentSummary::to_text() const {
  std::ostringstream out;
  out << name << " (dgp " << dgp << ", n " << n << ", reps " << reps << ", seed " << master_seed << ")\n";
  out << std::left << std::setw(24) << "estimator" << std::right << std::setw(10) << "eval_d" << std::setw(12)
      << "oracle" << std::setw(12) << "mean" << std::setw(12) << "bias" << std::setw(10) << "sd" << std::setw(10)
      << "rmse" << std::setw(8) << "trim" << std::setw(6) << "fail" << '\n';
  const auto num = [](const std::optional<double>& v, int width) {
    std::ostringstream s;
    s << std::setw(width);
    if (v) s << std::fixed << std::setprecision(4) << *v;
    else s << "-";
    return s.str();
  };
  for (const auto& r : rows) {
    out << std::left << std::setw(24) << r.label << std::right << num(r.eval_d, 10)
        << num(r.oracle ? std::optional<double>(r.oracle->value) : std::nullopt, 12) << num(r.mean, 12)
        << num(r.bias, 12) << num(r.sd, 10) << num(r.rmse, 10) << num(r.trimmed_frac, 8) << std::setw(6)
        << r.failures << '\n';
  }
  for (const auto& d : diagnostics) {
    out << d.name << ": median statistic " << format_double(d.median_statistic) << " (threshold "
        << format_double(d.threshold) << "), pass " << d.pass << ", warn " << d.warn << ", fail " << d.fail
        << ", errors " << d.failures << '\n';
  }
  return out.str();
}

std::string dump_json(const ExperimentSummary& summary) { return summary.to_json().dump(2) + "\n"; }

void export_summary(const ExperimentSummary& summary, ExportFormat format, const std::filesystem::path& path) {
  write_file(path, format == ExportFormat::csv ? summary.to_csv() : dump_json(summary));
}

ExperimentSummary load_summary_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const nlohmann::json::exception& err) {
    throw ConfigError(std::string("malformed JSON in '") + path.string() + "': " + err.what());
  }
  return ExperimentSummary::from_json(j);
}

} // namespace endo::harness
