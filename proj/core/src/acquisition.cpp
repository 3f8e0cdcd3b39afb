#include "ncp/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ncp/errors.hpp"

namespace ncp {

void AcquisitionConfig::validate() const {
  if (!(temperature > 0.0)) throw InvalidArgument("acquisition: temperature must be > 0");
  if (batch_size < 1) throw InvalidArgument("acquisition: batch size must be >= 1");
}

double log_information_gain_weight(const Prediction& pred, ModelKind kind, double temperature, double sigma_y_sq) {
  if (!(temperature > 0.0)) throw InvalidArgument("information_gain_weight: temperature must be > 0");
  if (!(pred.aleatoric_variance > 0.0)) {
    throw InvalidArgument("information_gain_weight: aleatoric variance must be positive");
  }
  const double inv_t = 1.0 / temperature;
  switch (kind) {
    case ModelKind::kBbb:
    case ModelKind::kBbbNcp:
      return inv_t * std::log1p(pred.epistemic_variance / pred.aleatoric_variance);
    case ModelKind::kOdcNcp: {
      const double pi = pred.ood_probability.value_or(0.0);
      return inv_t * std::log1p(pi * sigma_y_sq / pred.aleatoric_variance);
    }
    case ModelKind::kDet:
      return inv_t * std::log(pred.aleatoric_variance);
  }
  return 0.0;
}

double information_gain_weight(const Prediction& pred, ModelKind kind, double temperature, double sigma_y_sq) {
  return std::exp(log_information_gain_weight(pred, kind, temperature, sigma_y_sq));
}

std::vector<std::size_t> sample_acquisition_log(std::span<const double> log_weights, const AcquisitionConfig& cfg,
                                                RngStream& rng) {
  cfg.validate();
  const std::size_t n = log_weights.size();
  if (cfg.batch_size > n) {
    throw InvalidArgument("sample_acquisition: batch size " + std::to_string(cfg.batch_size) +
                          " exceeds pool size " + std::to_string(n));
  }
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  bool any_positive = false;
  for (double lw : log_weights) {
    if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity()) {
      throw InvalidArgument("sample_acquisition: non-finite weight");
    }
    any_positive = any_positive || lw > kNegInf;
  }
  if (!any_positive) throw InvalidArgument("sample_acquisition: all weights are zero");

  std::vector<double> remaining(log_weights.begin(), log_weights.end());
  std::vector<bool> taken(n, false);
  std::vector<std::size_t> chosen;
  std::vector<double> probs(n);
  chosen.reserve(cfg.batch_size);
  while (chosen.size() < cfg.batch_size) {
    double top = kNegInf;
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i]) top = std::max(top, remaining[i]);
    }
    // Remaining mass is all zero-weight: fall back to uniform over what is left.
    const bool uniform = top == kNegInf;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      probs[i] = taken[i] ? 0.0 : (uniform ? 1.0 : std::exp(remaining[i] - top));
      total += probs[i];
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = n;
    std::size_t last_valid = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (probs[i] <= 0.0) continue;
      last_valid = i;
      acc += probs[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    if (pick == n) pick = last_valid;  // u landed on the rounding tail
    taken[pick] = true;
    chosen.push_back(pick);
  }
  return chosen;
}

std::vector<std::size_t> sample_acquisition(std::span<const double> weights, const AcquisitionConfig& cfg,
                                            RngStream& rng) {
  std::vector<double> logs(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) {
      throw InvalidArgument("sample_acquisition: weights must be finite and nonnegative");
    }
    logs[i] = std::log(weights[i]);
  }
  return sample_acquisition_log(logs, cfg, rng);
}

std::vector<std::size_t> sample_uniform(std::size_t pool_size, std::size_t count, RngStream& rng) {
  if (count > pool_size) throw InvalidArgument("sample_uniform: count exceeds pool size");
  std::vector<std::size_t> idx(pool_size);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.index(pool_size - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace ncp
