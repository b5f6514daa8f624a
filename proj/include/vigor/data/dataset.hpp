#pragma once

#include "vigor/nn/matrix.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vigor::data {

/// Observational data: covariates X, binary treatment T, binary outcome Y and
/// an optional candidate confounder column.
///
/// Covariates are stored as read; standardisation happens when model inputs
/// are built. `u_star` and `true_ate` exist only for synthetic benchmarks and
/// are never written by save_csv.
struct Dataset {
  nn::Matrix x;
  std::vector<double> t;
  std::vector<double> y;
  std::vector<std::string> column_names;
  std::optional<std::vector<double>> u_hat;
  std::optional<std::vector<double>> u_star;
  std::optional<double> true_ate;

  std::size_t size() const { return t.size(); }
  std::size_t covariate_count() const { return x.cols(); }

  /// Throws ValidationError on inconsistent lengths, non-binary t/y or
  /// duplicate column names.
  void validate() const;

  Dataset subset(std::span<const std::size_t> rows) const;

  /// Copy with `u_hat` replaced.
  Dataset with_u_hat(std::vector<double> values) const;

  /// Removes the named covariate and returns it as a vector.
  std::vector<double> take_column(const std::string& name);
};

/// Reads a header-first CSV. Columns named "t" and "y" (case-insensitive) are
/// treatment and outcome; every other column is a covariate.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text, const std::string& source_name = "<memory>");

/// Writes covariates, then t, y and (if present) a "u_hat" column. Values use
/// 17 significant digits so load_csv(save_csv(d)) reproduces d exactly.
void save_csv(const Dataset& dataset, const std::filesystem::path& path);
std::string to_csv(const Dataset& dataset);

/// Difference in mean outcome between treated and control rows.
double naive_ate(const Dataset& dataset);

/// 64-bit FNV-1a over the CSV serialisation; identifies a dataset in run logs.
std::string fingerprint(const Dataset& dataset);

/// Column means and standard deviations (population form; zero spread maps to 1).
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const nn::Matrix& x);
  nn::Matrix apply(const nn::Matrix& x) const;
};

/// Min-max scaling to [0, 1]; a constant vector maps to all zeros.
std::vector<double> min_max_scale(std::span<const double> values);

} // namespace vigor::data
