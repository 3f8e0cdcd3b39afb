#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ncp/math.hpp"
#include "ncp/rng.hpp"

namespace ncp {

enum class ColumnKind { kContinuous, kCategorical };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kContinuous;
  /// Category labels in code order; code k is `categories[k]`. Empty for continuous columns.
  std::vector<std::string> categories;

  std::size_t n_classes() const { return categories.size(); }
  bool operator==(const ColumnSpec&) const = default;
};

/// Split bookkeeping. visible and pool are disjoint subsets of the train rows;
/// test rows are never in either.
struct Splits {
  std::vector<std::size_t> test;
  std::vector<std::size_t> visible;
  std::vector<std::size_t> pool;
  /// Seed that produced the split, for provenance.
  std::optional<std::uint64_t> seed;

  bool operator==(const Splits&) const = default;
};

struct Dataset {
  Matrix features;
  Vector targets;
  std::vector<ColumnSpec> columns;
  std::string target_name = "y";
  /// Position of the target column in the original CSV header.
  std::size_t target_position = 0;
  Splits splits;

  std::size_t rows() const { return features.rows(); }
  std::size_t dims() const { return features.cols(); }

  /// Visible and pool rows, sorted.
  std::vector<std::size_t> train_indices() const;
  /// Moves the given rows from the pool into the visible set.
  /// Throws InvalidArgument if any index is not currently in the pool or is repeated.
  void acquire(std::span<const std::size_t> pool_indices);
  /// Throws InvalidArgument when shapes or split invariants are violated.
  void validate() const;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

/// Two-band 1-D regression task:
///   y = slope * x + sin(frequency * x) + eps,  eps ~ N(0, (noise_base + noise_slope * g(x))^2)
///   g(x) = max(x - noise_origin, 0)
struct ToyConfig {
  Interval band_a{-1.2, -0.6};
  Interval band_b{0.6, 1.2};
  std::size_t n_per_band = 100;
  Interval test_range{-2.4, 2.4};
  std::size_t test_points = 200;
  bool exclude_bands_from_test = false;
  double slope = 0.3;
  double frequency = 3.0;
  double noise_base = 0.05;
  double noise_slope = 0.15;
  double noise_origin = -1.2;

  double mean_function(double x) const;
  double noise_std(double x) const;
};

/// Train rows (uniform within the bands, all in the pool) followed by the test grid rows.
Dataset generate_toy(const ToyConfig& cfg, RngStream& rng);

/// Synthetic mixed-type tabular regression set with 6 continuous and 2
/// categorical inputs and a heteroskedastic target. Column names are
/// x1..x6, carrier, weekday and target "delay".
Dataset generate_tabular(std::size_t n_rows, RngStream& rng);

struct CsvSchema {
  std::string target;
  /// Columns to read as categorical; all others are parsed as numbers.
  std::vector<std::string> categorical;
};

/// Comma-separated, header required, '.' decimal, no quoting. Row numbers in
/// errors count data rows from 1 (the header is not a row).
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema);
Dataset read_csv(std::istream& in, const CsvSchema& schema);
void write_csv(std::ostream& out, const Dataset& ds);
void write_csv(const std::filesystem::path& path, const Dataset& ds);

/// Last round(test_fraction * rows) rows become the test split; the rest form the pool.
void split_tail(Dataset& ds, double test_fraction);

class Standardizer {
public:
  static constexpr double kMinScale = 1e-12;

  Standardizer() = default;
  Standardizer(Vector feature_mean, Vector feature_scale, std::vector<ColumnKind> kinds,
               double target_mean, double target_scale);

  void transform_features(std::span<double> row) const;
  double transform_target(double y) const { return (y - target_mean_) / target_scale_; }
  double inverse_target(double z) const { return z * target_scale_ + target_mean_; }
  double inverse_variance(double v) const { return v * target_scale_ * target_scale_; }

  const Vector& feature_mean() const { return feature_mean_; }
  const Vector& feature_scale() const { return feature_scale_; }
  const std::vector<ColumnKind>& kinds() const { return kinds_; }
  double target_mean() const { return target_mean_; }
  double target_scale() const { return target_scale_; }

  bool operator==(const Standardizer&) const = default;

private:
  Vector feature_mean_;
  Vector feature_scale_;
  std::vector<ColumnKind> kinds_;
  double target_mean_ = 0.0;
  double target_scale_ = 1.0;
};

/// Fits continuous features on `feature_fit` rows and the target on
/// `target_values` (already gathered by the caller), then transforms every row.
Standardizer fit_standardizer(const Dataset& ds, std::span<const std::size_t> feature_fit,
                              std::span<const double> target_values);
Dataset apply_standardizer(const Dataset& ds, const Standardizer& s);

/// Features and target both fit on `fit_on`.
std::pair<Dataset, Standardizer> standardize(const Dataset& ds, std::span<const std::size_t> fit_on);

std::string splits_to_json(const Splits& splits);
Splits splits_from_json(const std::string& text);

}  // namespace ncp
