#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "ncp/data.hpp"
#include "ncp/distributions.hpp"
#include "ncp/math.hpp"
#include "ncp/rng.hpp"

namespace ncp {

/// How continuous columns are perturbed. Categorical columns are always
/// perturbed by class flipping with `flip_probability`; with kCategoricalFlip
/// continuous columns are left untouched.
enum class NoiseKind { kGaussian, kUniform, kCategoricalFlip };

/// Mean of the output prior: the label of the unperturbed source row, or a constant.
enum class MeanRule { kLabelPassthrough, kConstant };

/// kForward: KL(output prior || mean belief). kReverse: KL(mean belief || output prior).
enum class KlDirection { kForward, kReverse };

/// Noise contrastive prior hyperparameters. All second Gaussian parameters are variances.
struct NcpConfig {
  NoiseKind noise = NoiseKind::kGaussian;
  /// Input noise variance, in standardized input units.
  double sigma_x_sq = 0.5;
  double flip_probability = 0.1;
  /// Output prior variance on the mean belief (BBB+NCP).
  double sigma_mu_sq = 1.0;
  /// Data-space output prior variance (ODC mixture branch, output_prior_targets).
  double sigma_y_sq = 1.0;
  MeanRule mean_rule = MeanRule::kLabelPassthrough;
  /// Constant output prior mean, used when mean_rule == kConstant.
  double mu_y = 0.0;
  double gamma = 1.0;
  KlDirection kl_direction = KlDirection::kForward;

  void validate() const;
  bool operator==(const NcpConfig&) const = default;
};

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view text);

struct PerturbedBatch {
  Matrix inputs;
  /// Labels of the unperturbed source rows, row-aligned with `inputs`.
  Vector source_labels;
  NoiseKind noise = NoiseKind::kGaussian;
  double sigma_x_sq = 0.0;
};

/// Fresh noised-up copy of `batch_x`. `columns` declares per-column kinds; an
/// empty span treats every column as continuous. Rows keep their order.
PerturbedBatch perturb_inputs(const Matrix& batch_x, std::span<const double> labels, const NcpConfig& ncp,
                              std::span<const ColumnSpec> columns, RngStream& rng);

/// Output prior per row: N(y_i, sigma_y^2) under label passthrough, N(mu_y, sigma_y^2) otherwise.
std::vector<Gaussian1D> output_prior_targets(std::span<const double> batch_y, const NcpConfig& ncp);

}  // namespace ncp
