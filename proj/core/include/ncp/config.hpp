#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ncp/data.hpp"
#include "ncp/harness.hpp"

namespace ncp {

struct DataConfig {
  /// "toy" or "csv".
  std::string source = "toy";
  std::string path;
  std::string target = "y";
  std::vector<std::string> categorical;
  /// Tail fraction of CSV rows held out as the test split.
  double test_fraction = 0.1;
  /// Seed of the toy generator, independent of the experiment seed.
  std::uint64_t seed = 0;
  ToyConfig toy;
};

struct SweepConfig {
  SweepGrid grid;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::vector<ModelKind> baselines = {ModelKind::kBbb};
};

struct RunConfig {
  ExperimentConfig experiment;
  DataConfig data;
  SweepConfig sweep;
  /// Epoch count for passive training (the `train` subcommand).
  std::size_t train_epochs = 50;
  /// Non-fatal diagnostics collected while parsing (duplicate keys).
  std::vector<std::string> warnings;
};

/// Parses `key = value` lines ('#' starts a comment), then applies each
/// override of the same form. Later occurrences of a key win and leave a
/// warning. Throws ConfigError for unknown keys (naming the key) and for
/// values that do not parse (naming the line).
RunConfig parse_config(std::string_view text, std::span<const std::string> overrides = {});

/// Canonical text form; parse_config(format_config(c)) reproduces c.
std::string format_config(const RunConfig& cfg);

/// Builds the configured dataset: the seeded toy generator, or a CSV file
/// whose last `test_fraction` of rows become the test split.
Dataset load_data(const DataConfig& data);

/// Every recognized key, in canonical order.
std::vector<std::string> config_keys();

}  // namespace ncp
