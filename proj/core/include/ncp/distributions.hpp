#pragma once

namespace ncp {

/// Default lower bound added to predicted variances, in standardized target units.
inline constexpr double kDefaultVarianceFloor = 1e-6;

/// Univariate normal parameterized by mean and *variance* (not standard deviation).
struct Gaussian1D {
  double mean = 0.0;
  double variance = 1.0;

  /// Throws InvalidArgument unless variance > 0 and both fields are finite.
  void validate() const;
  bool operator==(const Gaussian1D&) const = default;
};

/// ln N(y | mean, variance).
double normal_log_pdf(double y, const Gaussian1D& dist);

/// KL(p || q) = ln(s_q / s_p) + (s_p^2 + (m_p - m_q)^2) / (2 s_q^2) - 1/2.
double kl_normal_normal(const Gaussian1D& p, const Gaussian1D& q);

/// Partial derivatives of KL(p || q) with respect to the four distribution parameters.
struct KlGradient {
  double value;
  double d_p_mean;
  double d_p_variance;
  double d_q_mean;
  double d_q_variance;
};
KlGradient kl_normal_normal_grad(const Gaussian1D& p, const Gaussian1D& q);

/// ln(1 + e^x), stable for large |x|.
double softplus(double x);
/// 1 / (1 + e^-x), stable for large |x|.
double sigmoid(double x);

/// ln Bernoulli(outcome | sigmoid(logit)). outcome must be 0 or 1.
double bernoulli_log_pmf_logit(int outcome, double logit);

enum class BoundaryMode {
  /// p1 == 0 with outcome 1 (or p1 == 1 with outcome 0) returns -infinity.
  kNegativeInfinity,
  /// ... throws NumericalError instead.
  kThrow,
};

/// ln Bernoulli(outcome | p1). Throws InvalidArgument for p1 outside [0, 1] or outcome not in {0, 1}.
double bernoulli_log_pmf(int outcome, double p1, BoundaryMode mode = BoundaryMode::kNegativeInfinity);

/// softplus(raw) + floor; the positivity transform for predicted variances.
double softplus_variance(double raw, double floor = kDefaultVarianceFloor);

}  // namespace ncp
