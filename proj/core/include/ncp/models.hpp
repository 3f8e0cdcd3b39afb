#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>

#include "ncp/data.hpp"
#include "ncp/distributions.hpp"
#include "ncp/math.hpp"
#include "ncp/network.hpp"
#include "ncp/priors.hpp"
#include "ncp/rng.hpp"

namespace ncp {

enum class ModelKind {
  /// Heteroskedastic network, point estimate, maximum likelihood.
  kDet,
  /// Variational mean output layer with an independent normal weight prior.
  kBbb,
  /// Variational mean output layer with the noise contrastive output prior.
  kBbbNcp,
  /// Point estimate with an OOD classifier head trained on noised-up inputs.
  kOdcNcp,
};

std::string_view to_string(ModelKind kind);
/// Accepts det, bbb, bbb_ncp, odc_ncp. Throws InvalidArgument naming the valid kinds.
ModelKind parse_model_kind(std::string_view text);
bool is_bayesian(ModelKind kind);
bool uses_ncp(ModelKind kind);

inline constexpr double kDefaultPosteriorLogStd = -3.0;

/// Diagonal Gaussian belief over the mean output layer: F weights then the bias.
/// `values` stores all means followed by all log standard deviations so it can
/// be optimized as one flat vector.
class VariationalPosterior {
public:
  VariationalPosterior() = default;
  explicit VariationalPosterior(std::size_t feature_dim);

  /// Means copied from the network's deterministic mean head; log-stds set to `log_std`.
  static VariationalPosterior from_network(const NetworkParams& params, double log_std = kDefaultPosteriorLogStd);

  /// Number of coefficients (feature_dim + 1).
  std::size_t size() const { return values_.size() / 2; }
  std::size_t feature_dim() const { return size() - 1; }

  std::span<double> mean() { return std::span<double>(values_).first(size()); }
  std::span<const double> mean() const { return std::span<const double>(values_).first(size()); }
  std::span<double> log_std() { return std::span<double>(values_).last(size()); }
  std::span<const double> log_std() const { return std::span<const double>(values_).last(size()); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const VariationalPosterior&) const = default;

private:
  Vector values_;
};

/// Independent N(0, variance) prior on each mean-layer coefficient.
struct WeightPrior {
  double variance = 1.0;
};

/// Decomposed model output in standardized target units.
struct Prediction {
  ModelKind kind = ModelKind::kDet;
  /// Mean of the belief over mu(x).
  double mean = 0.0;
  /// Variance of the belief over mu(x); exactly 0 for point-estimate models.
  double epistemic_variance = 0.0;
  /// True when there is no weight belief (Det, ODC).
  bool degenerate = true;
  double aleatoric_variance = 1.0;
  /// pi(x) = p(o = 1 | x); ODC only.
  std::optional<double> ood_probability;

  /// q(mu(x)). Throws InvalidArgument for degenerate predictions.
  Gaussian1D mean_belief() const;
};

/// Closed form of the mean belief induced by a diagonal Gaussian over a linear layer:
/// N(sum_i h_i m_i + m_bias, sum_i h_i^2 exp(2 rho_i) + exp(2 rho_bias)).
Gaussian1D mean_belief(const VariationalPosterior& posterior, std::span<const double> features);

struct Batch {
  Matrix x;
  Vector y;
};

struct LossResult {
  double value = 0.0;
  /// Likelihood part (mean negative log-likelihood over the batch).
  double data_term = 0.0;
  /// Everything else: weight KL, output-space KL or classifier terms, already scaled.
  double prior_term = 0.0;
  Vector grad_network;
  /// Gradient w.r.t. VariationalPosterior::values(); empty for point-estimate models.
  Vector grad_posterior;
};

/// Mean over the batch of -ln N(y | mu(x), sigma^2(x)) using the deterministic mean head.
LossResult det_loss(const NetworkParams& params, const Batch& batch, double variance_floor = kDefaultVarianceFloor);

/// Standard-normal draws for the reparameterized mean-layer sample, one per coefficient.
Vector sample_weight_noise(const VariationalPosterior& posterior, RngStream& rng);

/// -(1/B) sum ln N(y | mu(x, w), sigma^2(x)) with w = m + exp(rho) * noise, plus
/// (1/N) sum_i KL(q_i || prior). One weight sample is shared by the whole batch.
LossResult bbb_loss(const NetworkParams& params, const VariationalPosterior& posterior, const WeightPrior& prior,
                    const Batch& batch, std::size_t dataset_size, std::span<const double> weight_noise,
                    double variance_floor = kDefaultVarianceFloor);
LossResult bbb_loss(const NetworkParams& params, const VariationalPosterior& posterior, const WeightPrior& prior,
                    const Batch& batch, std::size_t dataset_size, RngStream& rng,
                    double variance_floor = kDefaultVarianceFloor);

/// Same expected-likelihood term as bbb_loss plus
/// gamma * mean over perturbed rows of KL(N(mu_mu, sigma_mu^2) || q(mu(x~)))
/// (arguments swapped for KlDirection::kReverse). No weight-space KL.
LossResult bbb_ncp_loss(const NetworkParams& params, const VariationalPosterior& posterior, const Batch& batch,
                        const PerturbedBatch& perturbed, const NcpConfig& ncp, std::span<const double> weight_noise,
                        double variance_floor = kDefaultVarianceFloor);
LossResult bbb_ncp_loss(const NetworkParams& params, const VariationalPosterior& posterior, const Batch& batch,
                        const PerturbedBatch& perturbed, const NcpConfig& ncp, RngStream& rng,
                        double variance_floor = kDefaultVarianceFloor);

/// Mean over the batch of [-ln N(y | mu, sigma^2) - ln Bernoulli(0 | pi(x))]
/// + gamma * mean over perturbed rows of [-ln Bernoulli(1 | pi(x~))], from logits.
LossResult odc_ncp_loss(const NetworkParams& params, const Batch& batch, const PerturbedBatch& perturbed,
                        const NcpConfig& ncp, double variance_floor = kDefaultVarianceFloor);

/// A trained or trainable model: network plus, for Bayesian kinds, the mean-layer posterior.
struct Model {
  ModelKind kind = ModelKind::kDet;
  NetworkParams network;
  std::optional<VariationalPosterior> posterior;
  double variance_floor = kDefaultVarianceFloor;

  bool operator==(const Model&) const = default;
};

Model make_model(ModelKind kind, std::span<const std::size_t> widths, RngStream& rng,
                 double leaky_slope = kDefaultLeakySlope, double variance_floor = kDefaultVarianceFloor,
                 double posterior_log_std = kDefaultPosteriorLogStd);

/// Throws InvalidArgument when a posterior is missing for a Bayesian kind.
Prediction predict(ModelKind kind, const NetworkParams& params, const VariationalPosterior* posterior,
                   std::span<const double> x, double variance_floor = kDefaultVarianceFloor);
Prediction predict(const Model& model, std::span<const double> x);

/// Predictive distribution used for NLPD:
///   Bayesian kinds: N(m, epistemic + aleatoric); Det: N(mu, aleatoric);
///   ODC: N(mu, (1 - pi) sigma^2(x) + pi sigma_y^2), the moment-matched o-mixture
///   with the network mean reused for the OOD branch.
Gaussian1D predictive_distribution(const Prediction& pred, const NcpConfig& ncp);

/// Self-describing JSON checkpoint: model kind, network (widths + flat
/// coefficients), posterior, NCP settings and, optionally, the standardizer.
struct Checkpoint {
  Model model;
  NcpConfig ncp;
  std::optional<Standardizer> standardizer;

  bool operator==(const Checkpoint&) const = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

}  // namespace ncp
