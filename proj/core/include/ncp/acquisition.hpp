#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ncp/models.hpp"
#include "ncp/rng.hpp"

namespace ncp {

struct AcquisitionConfig {
  /// Sampling temperature; 0.5 sharpens the gain distribution by squaring it.
  double temperature = 0.5;
  /// Labels acquired per round.
  std::size_t batch_size = 1;

  void validate() const;
};

/// Natural log of the acquisition weight (1 + epistemic / aleatoric)^(1/tau):
///
///   Bayesian kinds: epistemic = Var[q(mu(x))]
///   ODC:            epistemic = pi(x) * sigma_y^2, the extra variance the OOD branch adds
///   Det:            no epistemic estimate; (sigma^2(x))^(1/tau) is used as a proxy
///
/// Sampling indices with probability proportional to these weights is the same
/// as a softmax over the log weights, which is how the sampler evaluates them.
double log_information_gain_weight(const Prediction& pred, ModelKind kind, double temperature,
                                   double sigma_y_sq = 1.0);
double information_gain_weight(const Prediction& pred, ModelKind kind, double temperature, double sigma_y_sq = 1.0);

/// Draws cfg.batch_size distinct indices without replacement, each draw
/// proportional to the remaining weights. Entries of -inf have zero weight.
/// Throws InvalidArgument if batch_size exceeds the pool, any entry is NaN or
/// +inf, or every weight is zero.
std::vector<std::size_t> sample_acquisition_log(std::span<const double> log_weights, const AcquisitionConfig& cfg,
                                                RngStream& rng);
std::vector<std::size_t> sample_acquisition(std::span<const double> weights, const AcquisitionConfig& cfg,
                                            RngStream& rng);

/// Uniform-random baseline: batch_size distinct indices in [0, pool_size).
std::vector<std::size_t> sample_uniform(std::size_t pool_size, std::size_t count, RngStream& rng);

}  // namespace ncp
