#include "ncp/distributions.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ncp/errors.hpp"

namespace ncp {

void Gaussian1D::validate() const {
  if (!std::isfinite(mean) || !std::isfinite(variance) || !(variance > 0.0)) {
    throw InvalidArgument("Gaussian1D: variance must be positive and finite (mean=" +
                          std::to_string(mean) + ", variance=" + std::to_string(variance) + ")");
  }
}

double normal_log_pdf(double y, const Gaussian1D& dist) {
  dist.validate();
  const double r = y - dist.mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * dist.variance) + r * r / dist.variance);
}

double kl_normal_normal(const Gaussian1D& p, const Gaussian1D& q) {
  p.validate();
  q.validate();
  const double d = p.mean - q.mean;
  return 0.5 * std::log(q.variance / p.variance) + (p.variance + d * d) / (2.0 * q.variance) - 0.5;
}

KlGradient kl_normal_normal_grad(const Gaussian1D& p, const Gaussian1D& q) {
  const double value = kl_normal_normal(p, q);
  const double d = p.mean - q.mean;
  const double inv_q = 1.0 / q.variance;
  return KlGradient{
      .value = value,
      .d_p_mean = d * inv_q,
      .d_p_variance = -0.5 / p.variance + 0.5 * inv_q,
      .d_q_mean = -d * inv_q,
      .d_q_variance = 0.5 * inv_q - 0.5 * (p.variance + d * d) * inv_q * inv_q,
  };
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double bernoulli_log_pmf_logit(int outcome, double logit) {
  if (outcome == 1) return -softplus(-logit);
  if (outcome == 0) return -softplus(logit);
  throw InvalidArgument("bernoulli_log_pmf: outcome must be 0 or 1");
}

double bernoulli_log_pmf(int outcome, double p1, BoundaryMode mode) {
  if (outcome != 0 && outcome != 1) throw InvalidArgument("bernoulli_log_pmf: outcome must be 0 or 1");
  if (!(p1 >= 0.0 && p1 <= 1.0)) {
    throw InvalidArgument("bernoulli_log_pmf: probability outside [0, 1]: " + std::to_string(p1));
  }
  const double p = outcome == 1 ? p1 : 1.0 - p1;
  if (p == 0.0) {
    if (mode == BoundaryMode::kThrow) throw NumericalError("bernoulli_log_pmf: zero-probability outcome");
    return -std::numeric_limits<double>::infinity();
  }
  return outcome == 1 ? std::log(p1) : std::log1p(-p1);
}

double softplus_variance(double raw, double floor) {
  if (!(floor > 0.0)) throw InvalidArgument("softplus_variance: floor must be positive");
  return softplus(raw) + floor;
}

}  // namespace ncp
