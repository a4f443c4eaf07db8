#include "endo/dataset.hpp"

#include "endo/errors.hpp"
#include "endo/format.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace endo {

namespace {

void check_column(const std::vector<double>& col, std::size_t n, const std::string& name) {
  if (col.size() != n) {
    throw PreconditionError("column '" + name + "' has " + std::to_string(col.size()) + " rows, expected " +
                            std::to_string(n));
  }
  for (double v : col) {
    if (!std::isfinite(v)) throw PreconditionError("column '" + name + "' contains a non-finite value");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

} // namespace

void DataSet::validate() const {
  const std::size_t n = y.size();
  check_column(d, n, "d");
  for (std::size_t j = 0; j < x.size(); ++j) check_column(x[j], n, "x" + std::to_string(j + 1));
  if (z) check_column(*z, n, "z");
  if (latent) {
    const auto check_latent = [&](const std::vector<double>& c, const char* name) {
      if (!c.empty()) check_column(c, n, name);
    };
    check_latent(latent->eps, "eps");
    check_latent(latent->eta, "eta");
    check_latent(latent->nu, "nu");
    check_latent(latent->zeta, "zeta");
  }
}

std::string DataSet::to_csv() const {
  std::string out = "y,d";
  for (std::size_t j = 0; j < x.size(); ++j) out += ",x" + std::to_string(j + 1);
  if (z) out += ",z";
  out += '\n';
  for (std::size_t i = 0; i < size(); ++i) {
    out += format_double(y[i]);
    out += ',';
    out += format_double(d[i]);
    for (const auto& col : x) {
      out += ',';
      out += format_double(col[i]);
    }
    if (z) {
      out += ',';
      out += format_double((*z)[i]);
    }
    out += '\n';
  }
  return out;
}

void DataSet::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << to_csv();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

ColumnMap ColumnMap::parse(const std::string& spec) {
  ColumnMap map;
  for (const auto& item : split(spec, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("column map entry '" + item + "' is not key=value");
    const std::string key = trim(item.substr(0, eq));
    const std::string value = trim(item.substr(eq + 1));
    if (value.empty()) throw ConfigError("column map entry '" + key + "' has no column name");
    if (key == "y") {
      map.y = value;
    } else if (key == "d") {
      map.d = value;
    } else if (key == "x") {
      for (const auto& name : split(value, ';')) map.x.push_back(trim(name));
    } else if (key == "z") {
      map.z = value;
    } else {
      throw ConfigError("unknown column map key '" + key + "' (expected y, d, x, z)");
    }
  }
  if (map.y.empty() || map.d.empty() || map.x.empty()) throw ConfigError("column map needs y=, d= and x=");
  return map;
}

DataSet parse_csv(const std::string& text, const ColumnMap& map) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty CSV input");
  std::map<std::string, std::size_t> index;
  const auto header = split(line, ',');
  for (std::size_t i = 0; i < header.size(); ++i) index[trim(header[i])] = i;
  const auto column = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("CSV has no column '" + name + "'");
    return it->second;
  };
  const std::size_t iy = column(map.y);
  const std::size_t id = column(map.d);
  std::vector<std::size_t> ix;
  for (const auto& name : map.x) ix.push_back(column(name));
  const std::optional<std::size_t> iz = map.z ? std::optional(column(*map.z)) : std::nullopt;

  DataSet data;
  data.x.resize(ix.size());
  if (iz) data.z.emplace();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    const auto value = [&](std::size_t i) {
      if (i >= fields.size()) throw IoError("CSV line " + std::to_string(lineno) + ": too few fields");
      const std::string f = trim(fields[i]);
      double v = 0.0;
      auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (res.ec != std::errc() || res.ptr != f.data() + f.size()) {
        throw IoError("CSV line " + std::to_string(lineno) + ": cannot parse '" + f + "' as a number");
      }
      return v;
    };
    data.y.push_back(value(iy));
    data.d.push_back(value(id));
    for (std::size_t j = 0; j < ix.size(); ++j) data.x[j].push_back(value(ix[j]));
    if (iz) data.z->push_back(value(*iz));
  }
  data.validate();
  return data;
}

DataSet read_csv(const std::filesystem::path& path, const ColumnMap& map) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), map);
}

// ---------------------------------------------------------------------------

DataView::DataView(const DataSet& data) : y_(data.y), d_(data.d), x_(data.x), z_(data.z) {
  check();
  canonicalize();
}

DataView::DataView(std::vector<double> y, std::vector<double> d, std::vector<std::vector<double>> x,
                   std::optional<std::vector<double>> z)
  : y_(std::move(y)), d_(std::move(d)), x_(std::move(x)), z_(std::move(z)) {
  check();
  canonicalize();
}

void DataView::check() const {
  const std::size_t n = y_.size();
  check_column(d_, n, "d");
  for (std::size_t j = 0; j < x_.size(); ++j) check_column(x_[j], n, "x" + std::to_string(j + 1));
  if (z_) check_column(*z_, n, "z");
  for (double v : y_) {
    if (!std::isfinite(v)) throw PreconditionError("column 'y' contains a non-finite value");
  }
}

void DataView::canonicalize() {
  const std::size_t n = size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto less = [&](std::size_t a, std::size_t b) {
    if (d_[a] != d_[b]) return d_[a] < d_[b];
    for (const auto& col : x_) {
      if (col[a] != col[b]) return col[a] < col[b];
    }
    if (z_ && (*z_)[a] != (*z_)[b]) return (*z_)[a] < (*z_)[b];
    return y_[a] < y_[b];
  };
  std::sort(order.begin(), order.end(), less);
  const auto permute = [&](std::vector<double>& col) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = col[order[i]];
    col = std::move(out);
  };
  permute(y_);
  permute(d_);
  for (auto& col : x_) permute(col);
  if (z_) permute(*z_);
}

bool DataView::binary_treatment() const {
  return std::all_of(d_.begin(), d_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::span<const double> DataView::z() const {
  if (!z_) throw PreconditionError("data has no instrument column");
  return *z_;
}

std::vector<std::span<const double>> DataView::controls() const {
  std::vector<std::span<const double>> out;
  out.reserve(x_.size());
  for (const auto& col : x_) out.emplace_back(col);
  return out;
}

DataView DataView::resample(std::span<const std::size_t> rows) const {
  DataView out;
  const auto pick = [&](const std::vector<double>& col) {
    std::vector<double> v(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) v[i] = col.at(rows[i]);
    return v;
  };
  out.y_ = pick(y_);
  out.d_ = pick(d_);
  for (const auto& col : x_) out.x_.push_back(pick(col));
  if (z_) out.z_ = pick(*z_);
  out.canonicalize();
  return out;
}

DataView DataView::arm(double value) const {
  DataView out;
  out.x_.resize(x_.size());
  if (z_) out.z_.emplace();
  for (std::size_t i = 0; i < size(); ++i) {
    if (d_[i] != value) continue;
    out.y_.push_back(y_[i]);
    out.d_.push_back(d_[i]);
    for (std::size_t j = 0; j < x_.size(); ++j) out.x_[j].push_back(x_[j][i]);
    if (z_) out.z_->push_back((*z_)[i]);
  }
  return out;
}

DataView DataView::with_outcome(std::vector<double> y) const {
  if (y.size() != size()) throw PreconditionError("replacement outcome has the wrong length");
  DataView out = *this;
  out.y_ = std::move(y);
  out.check();
  return out;
}

} // namespace endo
