#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace endo {

/// Realized latent draws. Kept for oracle checks only; no estimator can see them.
struct LatentColumns {
  std::vector<double> eps;
  std::vector<double> eta;
  std::vector<double> nu;
  std::vector<double> zeta;
};

/// Columnar sample (Y, D, X_1..X_k, optional Z, optional latent errors).
struct DataSet {
  std::vector<double> y;
  std::vector<double> d;
  std::vector<std::vector<double>> x;
  std::optional<std::vector<double>> z;
  std::optional<LatentColumns> latent;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t num_controls() const noexcept { return x.size(); }

  /// Throws PreconditionError on ragged or non-finite columns.
  void validate() const;

  /// CSV with header `y,d,x1..xk[,z]`; latent columns are never written.
  void write_csv(const std::filesystem::path& path) const;
  std::string to_csv() const;
};

/// Column mapping for external CSV input, e.g. y=score,d=spend,x=inc;age,z=qob.
struct ColumnMap {
  std::string y;
  std::string d;
  std::vector<std::string> x;
  std::optional<std::string> z;

  static ColumnMap parse(const std::string& spec);
};

DataSet read_csv(const std::filesystem::path& path, const ColumnMap& map);
DataSet parse_csv(const std::string& text, const ColumnMap& map);

/// Estimator-side projection of a DataSet: observed columns only, rows in a
/// canonical order (lexicographic in d, x.., z, y). Every smoother and
/// estimator takes a DataView, so outputs cannot depend on latent columns
/// or on the row order of the source sample.
class DataView {
public:
  explicit DataView(const DataSet& data);
  DataView(std::vector<double> y, std::vector<double> d, std::vector<std::vector<double>> x,
           std::optional<std::vector<double>> z = std::nullopt);

  std::size_t size() const noexcept { return y_.size(); }
  std::size_t num_controls() const noexcept { return x_.size(); }
  bool has_instrument() const noexcept { return z_.has_value(); }
  bool binary_treatment() const;

  std::span<const double> y() const noexcept { return y_; }
  std::span<const double> d() const noexcept { return d_; }
  std::span<const double> x(std::size_t j) const { return x_.at(j); }
  std::span<const double> z() const;
  std::vector<std::span<const double>> controls() const;

  /// Rows at `rows` (repeats allowed), re-canonicalized.
  DataView resample(std::span<const std::size_t> rows) const;
  /// Rows where D == value, in the existing (canonical) order.
  DataView arm(double value) const;
  /// Same rows with Y replaced; row order is kept.
  DataView with_outcome(std::vector<double> y) const;

private:
  DataView() = default;
  void canonicalize();
  void check() const;

  std::vector<double> y_;
  std::vector<double> d_;
  std::vector<std::vector<double>> x_;
  std::optional<std::vector<double>> z_;
};

} // namespace endo
