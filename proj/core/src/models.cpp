#include "ncp/models.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include <nlohmann/json.hpp>

#include "ncp/errors.hpp"

namespace ncp {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kDet: return "det";
    case ModelKind::kBbb: return "bbb";
    case ModelKind::kBbbNcp: return "bbb_ncp";
    case ModelKind::kOdcNcp: return "odc_ncp";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "det") return ModelKind::kDet;
  if (text == "bbb") return ModelKind::kBbb;
  if (text == "bbb_ncp") return ModelKind::kBbbNcp;
  if (text == "odc_ncp") return ModelKind::kOdcNcp;
  throw InvalidArgument("unknown model kind '" + std::string(text) + "' (valid: det, bbb, bbb_ncp, odc_ncp)");
}

bool is_bayesian(ModelKind kind) { return kind == ModelKind::kBbb || kind == ModelKind::kBbbNcp; }
bool uses_ncp(ModelKind kind) { return kind == ModelKind::kBbbNcp || kind == ModelKind::kOdcNcp; }

VariationalPosterior::VariationalPosterior(std::size_t feature_dim)
    : values_(2 * (feature_dim + 1), 0.0) {}

VariationalPosterior VariationalPosterior::from_network(const NetworkParams& params, double log_std) {
  VariationalPosterior post(params.layout().feature_dim());
  const auto w = params.head_weight(Head::kMean);
  auto m = post.mean();
  std::copy(w.begin(), w.end(), m.begin());
  m.back() = params.head_bias(Head::kMean);
  for (double& r : post.log_std()) r = log_std;
  return post;
}

Gaussian1D Prediction::mean_belief() const {
  if (degenerate) throw InvalidArgument("prediction: point-estimate model has no mean belief");
  return {mean, epistemic_variance};
}

Gaussian1D mean_belief(const VariationalPosterior& posterior, std::span<const double> features) {
  if (features.size() != posterior.feature_dim()) {
    throw InvalidArgument("mean_belief: feature dimension " + std::to_string(features.size()) +
                          " does not match posterior dimension " + std::to_string(posterior.feature_dim()));
  }
  const auto m = posterior.mean();
  const auto rho = posterior.log_std();
  const std::size_t f = features.size();
  double mu = m[f];
  double var = std::exp(2.0 * rho[f]);
  for (std::size_t i = 0; i < f; ++i) {
    mu += features[i] * m[i];
    var += features[i] * features[i] * std::exp(2.0 * rho[i]);
  }
  return {mu, var};
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

struct NllTerm {
  double value;
  double d_mean;
  double d_variance_raw;
};

/// -ln N(y | mean, softplus(raw) + floor) and its partials.
NllTerm gaussian_nll(double y, double mean, double variance_raw, double floor) {
  const double var = softplus_variance(variance_raw, floor);
  const double r = y - mean;
  return NllTerm{
      .value = 0.5 * (kLog2Pi + std::log(var) + r * r / var),
      .d_mean = -r / var,
      .d_variance_raw = (0.5 / var - 0.5 * r * r / (var * var)) * sigmoid(variance_raw),
  };
}

void check_batch(const NetworkParams& params, const Batch& batch) {
  if (batch.x.rows() == 0) throw InvalidArgument("loss: empty batch");
  if (batch.y.size() != batch.x.rows()) throw InvalidArgument("loss: label count differs from row count");
  if (batch.x.cols() != params.layout().input_dim()) throw InvalidArgument("loss: input dimension mismatch");
}

void check_posterior(const NetworkParams& params, const VariationalPosterior& posterior) {
  if (posterior.feature_dim() != params.layout().feature_dim()) {
    throw InvalidArgument("loss: posterior dimension does not match network features");
  }
}

/// Expected log-likelihood term under one reparameterized weight sample, accumulated into `out`.
void accumulate_sampled_nll(const NetworkParams& params, const VariationalPosterior& posterior, const Batch& batch,
                            std::span<const double> noise, double floor, LossResult& out) {
  const std::size_t f = posterior.feature_dim();
  if (noise.size() != f + 1) throw InvalidArgument("loss: weight noise has wrong dimension");
  const auto m = posterior.mean();
  const auto rho = posterior.log_std();
  Vector sigma(f + 1);
  Vector w(f + 1);
  for (std::size_t i = 0; i <= f; ++i) {
    sigma[i] = std::exp(rho[i]);
    w[i] = m[i] + sigma[i] * noise[i];
  }

  const double scale = 1.0 / static_cast<double>(batch.x.rows());
  auto g_mean = out.grad_posterior.begin();
  auto g_rho = out.grad_posterior.begin() + static_cast<std::ptrdiff_t>(f + 1);
  ForwardCache cache;
  Vector d_features(f);
  for (std::size_t r = 0; r < batch.x.rows(); ++r) {
    forward(params, batch.x.row(r), cache);
    const auto& h = cache.output.features;
    double mu = w[f];
    for (std::size_t i = 0; i < f; ++i) mu += h[i] * w[i];
    const NllTerm nll = gaussian_nll(batch.y[r], mu, cache.output.variance_raw, floor);
    out.data_term += scale * nll.value;

    const double dmu = scale * nll.d_mean;
    for (std::size_t i = 0; i < f; ++i) {
      g_mean[i] += dmu * h[i];
      g_rho[i] += dmu * h[i] * noise[i] * sigma[i];
      d_features[i] = dmu * w[i];
    }
    g_mean[f] += dmu;
    g_rho[f] += dmu * noise[f] * sigma[f];
    backward_accumulate(params, cache, HeadGrads{.variance_raw = scale * nll.d_variance_raw, .features = d_features},
                        out.grad_network);
  }
}

}  // namespace

LossResult det_loss(const NetworkParams& params, const Batch& batch, double variance_floor) {
  check_batch(params, batch);
  LossResult out;
  out.grad_network.assign(params.layout().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.x.rows());
  ForwardCache cache;
  for (std::size_t r = 0; r < batch.x.rows(); ++r) {
    forward(params, batch.x.row(r), cache);
    const NllTerm nll = gaussian_nll(batch.y[r], cache.output.mean, cache.output.variance_raw, variance_floor);
    out.data_term += scale * nll.value;
    backward_accumulate(params, cache,
                        HeadGrads{.mean = scale * nll.d_mean, .variance_raw = scale * nll.d_variance_raw},
                        out.grad_network);
  }
  out.value = out.data_term;
  return out;
}

Vector sample_weight_noise(const VariationalPosterior& posterior, RngStream& rng) {
  Vector noise(posterior.size());
  for (double& e : noise) e = rng.normal();
  return noise;
}

LossResult bbb_loss(const NetworkParams& params, const VariationalPosterior& posterior, const WeightPrior& prior,
                    const Batch& batch, std::size_t dataset_size, std::span<const double> weight_noise,
                    double variance_floor) {
  check_batch(params, batch);
  check_posterior(params, posterior);
  if (dataset_size < batch.x.rows()) throw InvalidArgument("bbb_loss: dataset size smaller than batch");
  if (!(prior.variance > 0.0)) throw InvalidArgument("bbb_loss: prior variance must be positive");

  LossResult out;
  out.grad_network.assign(params.layout().size(), 0.0);
  out.grad_posterior.assign(posterior.values().size(), 0.0);
  accumulate_sampled_nll(params, posterior, batch, weight_noise, variance_floor, out);

  const double scale = 1.0 / static_cast<double>(dataset_size);
  const auto m = posterior.mean();
  const auto rho = posterior.log_std();
  const std::size_t n = posterior.size();
  const Gaussian1D p_w{0.0, prior.variance};
  for (std::size_t i = 0; i < n; ++i) {
    const double var = std::exp(2.0 * rho[i]);
    const KlGradient kl = kl_normal_normal_grad({m[i], var}, p_w);
    out.prior_term += scale * kl.value;
    out.grad_posterior[i] += scale * kl.d_p_mean;
    out.grad_posterior[n + i] += scale * kl.d_p_variance * 2.0 * var;
  }
  out.value = out.data_term + out.prior_term;
  return out;
}

LossResult bbb_loss(const NetworkParams& params, const VariationalPosterior& posterior, const WeightPrior& prior,
                    const Batch& batch, std::size_t dataset_size, RngStream& rng, double variance_floor) {
  const Vector noise = sample_weight_noise(posterior, rng);
  return bbb_loss(params, posterior, prior, batch, dataset_size, noise, variance_floor);
}

LossResult bbb_ncp_loss(const NetworkParams& params, const VariationalPosterior& posterior, const Batch& batch,
                        const PerturbedBatch& perturbed, const NcpConfig& ncp, std::span<const double> weight_noise,
                        double variance_floor) {
  check_batch(params, batch);
  check_posterior(params, posterior);
  if (!(ncp.gamma >= 0.0)) throw InvalidArgument("bbb_ncp_loss: gamma must be >= 0");
  if (perturbed.inputs.rows() == 0) throw InvalidArgument("bbb_ncp_loss: empty perturbed batch");
  if (perturbed.source_labels.size() != perturbed.inputs.rows()) {
    throw InvalidArgument("bbb_ncp_loss: perturbed labels do not match perturbed rows");
  }
  if (!(ncp.sigma_mu_sq > 0.0)) throw InvalidArgument("bbb_ncp_loss: sigma_mu_sq must be > 0");

  LossResult out;
  out.grad_network.assign(params.layout().size(), 0.0);
  out.grad_posterior.assign(posterior.values().size(), 0.0);
  accumulate_sampled_nll(params, posterior, batch, weight_noise, variance_floor, out);

  if (ncp.gamma > 0.0) {
    const std::size_t f = posterior.feature_dim();
    const std::size_t n = posterior.size();
    const auto m = posterior.mean();
    const auto rho = posterior.log_std();
    Vector var_w(n);
    for (std::size_t i = 0; i < n; ++i) var_w[i] = std::exp(2.0 * rho[i]);

    const double scale = ncp.gamma / static_cast<double>(perturbed.inputs.rows());
    ForwardCache cache;
    Vector d_features(f);
    for (std::size_t r = 0; r < perturbed.inputs.rows(); ++r) {
      forward(params, perturbed.inputs.row(r), cache);
      const auto& h = cache.output.features;
      const Gaussian1D belief = mean_belief(posterior, h);
      const double prior_mean =
          ncp.mean_rule == MeanRule::kLabelPassthrough ? perturbed.source_labels[r] : ncp.mu_y;
      const Gaussian1D output_prior{prior_mean, ncp.sigma_mu_sq};

      double value = 0.0;
      double d_m = 0.0;
      double d_v = 0.0;
      if (ncp.kl_direction == KlDirection::kForward) {
        const KlGradient kl = kl_normal_normal_grad(output_prior, belief);
        value = kl.value;
        d_m = kl.d_q_mean;
        d_v = kl.d_q_variance;
      } else {
        const KlGradient kl = kl_normal_normal_grad(belief, output_prior);
        value = kl.value;
        d_m = kl.d_p_mean;
        d_v = kl.d_p_variance;
      }
      out.prior_term += scale * value;
      d_m *= scale;
      d_v *= scale;

      for (std::size_t i = 0; i < f; ++i) {
        out.grad_posterior[i] += d_m * h[i];
        out.grad_posterior[n + i] += d_v * 2.0 * h[i] * h[i] * var_w[i];
        d_features[i] = d_m * m[i] + d_v * 2.0 * h[i] * var_w[i];
      }
      out.grad_posterior[f] += d_m;
      out.grad_posterior[n + f] += d_v * 2.0 * var_w[f];
      backward_accumulate(params, cache, HeadGrads{.features = d_features}, out.grad_network);
    }
  }
  out.value = out.data_term + out.prior_term;
  return out;
}

LossResult bbb_ncp_loss(const NetworkParams& params, const VariationalPosterior& posterior, const Batch& batch,
                        const PerturbedBatch& perturbed, const NcpConfig& ncp, RngStream& rng,
                        double variance_floor) {
  const Vector noise = sample_weight_noise(posterior, rng);
  return bbb_ncp_loss(params, posterior, batch, perturbed, ncp, noise, variance_floor);
}

LossResult odc_ncp_loss(const NetworkParams& params, const Batch& batch, const PerturbedBatch& perturbed,
                        const NcpConfig& ncp, double variance_floor) {
  check_batch(params, batch);
  if (!(ncp.gamma >= 0.0)) throw InvalidArgument("odc_ncp_loss: gamma must be >= 0");
  if (perturbed.inputs.rows() == 0) throw InvalidArgument("odc_ncp_loss: empty perturbed batch");

  LossResult out;
  out.grad_network.assign(params.layout().size(), 0.0);
  const double scale = 1.0 / static_cast<double>(batch.x.rows());
  ForwardCache cache;
  for (std::size_t r = 0; r < batch.x.rows(); ++r) {
    forward(params, batch.x.row(r), cache);
    const auto& o = cache.output;
    const NllTerm nll = gaussian_nll(batch.y[r], o.mean, o.variance_raw, variance_floor);
    // -ln Bernoulli(0 | sigmoid(l)) = softplus(l)
    const double in_dist = -bernoulli_log_pmf_logit(0, o.ood_logit);
    out.data_term += scale * nll.value;
    out.prior_term += scale * in_dist;
    backward_accumulate(params, cache,
                        HeadGrads{.mean = scale * nll.d_mean,
                                  .variance_raw = scale * nll.d_variance_raw,
                                  .ood_logit = scale * sigmoid(o.ood_logit)},
                        out.grad_network);
  }
  if (ncp.gamma > 0.0) {
    const double ncp_scale = ncp.gamma / static_cast<double>(perturbed.inputs.rows());
    for (std::size_t r = 0; r < perturbed.inputs.rows(); ++r) {
      forward(params, perturbed.inputs.row(r), cache);
      // -ln Bernoulli(1 | sigmoid(l)) = softplus(-l)
      const double ood = -bernoulli_log_pmf_logit(1, cache.output.ood_logit);
      out.prior_term += ncp_scale * ood;
      backward_accumulate(params, cache, HeadGrads{.ood_logit = -ncp_scale * sigmoid(-cache.output.ood_logit)},
                          out.grad_network);
    }
  }
  out.value = out.data_term + out.prior_term;
  return out;
}

Model make_model(ModelKind kind, std::span<const std::size_t> widths, RngStream& rng, double leaky_slope,
                 double variance_floor, double posterior_log_std) {
  Model model{kind, init_params(widths, rng, leaky_slope), std::nullopt, variance_floor};
  if (is_bayesian(kind)) model.posterior = VariationalPosterior::from_network(model.network, posterior_log_std);
  return model;
}

Prediction predict(ModelKind kind, const NetworkParams& params, const VariationalPosterior* posterior,
                   std::span<const double> x, double variance_floor) {
  if (is_bayesian(kind) && posterior == nullptr) {
    throw InvalidArgument("predict: model kind '" + std::string(to_string(kind)) + "' requires a posterior");
  }
  const TrunkOutput out = forward(params, x);
  Prediction pred;
  pred.kind = kind;
  pred.aleatoric_variance = softplus_variance(out.variance_raw, variance_floor);
  if (is_bayesian(kind)) {
    const Gaussian1D belief = mean_belief(*posterior, out.features);
    pred.mean = belief.mean;
    pred.epistemic_variance = belief.variance;
    pred.degenerate = false;
  } else {
    pred.mean = out.mean;
    pred.epistemic_variance = 0.0;
    pred.degenerate = true;
  }
  if (kind == ModelKind::kOdcNcp) pred.ood_probability = sigmoid(out.ood_logit);
  return pred;
}

Prediction predict(const Model& model, std::span<const double> x) {
  return predict(model.kind, model.network, model.posterior ? &*model.posterior : nullptr, x, model.variance_floor);
}

Gaussian1D predictive_distribution(const Prediction& pred, const NcpConfig& ncp) {
  if (pred.ood_probability) {
    const double pi = *pred.ood_probability;
    return {pred.mean, (1.0 - pi) * pred.aleatoric_variance + pi * ncp.sigma_y_sq};
  }
  return {pred.mean, pred.epistemic_variance + pred.aleatoric_variance};
}

namespace {

using nlohmann::json;

json ncp_to_json(const NcpConfig& ncp) {
  return json{{"noise", std::string(to_string(ncp.noise))},
              {"sigma_x_sq", ncp.sigma_x_sq},
              {"flip_probability", ncp.flip_probability},
              {"sigma_mu_sq", ncp.sigma_mu_sq},
              {"sigma_y_sq", ncp.sigma_y_sq},
              {"mean_rule", ncp.mean_rule == MeanRule::kLabelPassthrough ? "label" : "constant"},
              {"mu_y", ncp.mu_y},
              {"gamma", ncp.gamma},
              {"kl_direction", ncp.kl_direction == KlDirection::kForward ? "forward" : "reverse"}};
}

NcpConfig ncp_from_json(const json& j) {
  NcpConfig ncp;
  ncp.noise = parse_noise_kind(j.at("noise").get<std::string>());
  ncp.sigma_x_sq = j.at("sigma_x_sq").get<double>();
  ncp.flip_probability = j.at("flip_probability").get<double>();
  ncp.sigma_mu_sq = j.at("sigma_mu_sq").get<double>();
  ncp.sigma_y_sq = j.at("sigma_y_sq").get<double>();
  ncp.mean_rule = j.at("mean_rule").get<std::string>() == "label" ? MeanRule::kLabelPassthrough : MeanRule::kConstant;
  ncp.mu_y = j.at("mu_y").get<double>();
  ncp.gamma = j.at("gamma").get<double>();
  ncp.kl_direction = j.at("kl_direction").get<std::string>() == "forward" ? KlDirection::kForward : KlDirection::kReverse;
  ncp.validate();
  return ncp;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const auto& net = ckpt.model.network;
  json j;
  j["format"] = "ncp-checkpoint";
  j["version"] = 1;
  j["model"] = {{"kind", std::string(to_string(ckpt.model.kind))},
                {"variance_floor", ckpt.model.variance_floor},
                {"network",
                 {{"format", "ncp-network"},
                  {"version", 1},
                  {"leaky_slope", net.leaky_slope()},
                  {"widths", net.layout().widths()},
                  {"coefficients", std::vector<double>(net.values().begin(), net.values().end())}}}};
  if (ckpt.model.posterior) {
    const auto& p = *ckpt.model.posterior;
    j["model"]["posterior"] = {{"mean", std::vector<double>(p.mean().begin(), p.mean().end())},
                               {"log_std", std::vector<double>(p.log_std().begin(), p.log_std().end())}};
  } else {
    j["model"]["posterior"] = nullptr;
  }
  j["ncp"] = ncp_to_json(ckpt.ncp);
  if (ckpt.standardizer) {
    const auto& s = *ckpt.standardizer;
    std::vector<std::string> kinds;
    for (auto k : s.kinds()) kinds.push_back(k == ColumnKind::kContinuous ? "continuous" : "categorical");
    j["standardizer"] = {{"feature_mean", s.feature_mean()},
                         {"feature_scale", s.feature_scale()},
                         {"kinds", kinds},
                         {"target_mean", s.target_mean()},
                         {"target_scale", s.target_scale()}};
  } else {
    j["standardizer"] = nullptr;
  }
  out << j.dump(1) << '\n';
}

Checkpoint read_checkpoint(std::istream& in) {
  try {
    const json j = json::parse(in);
    if (j.at("format") != "ncp-checkpoint" || j.at("version") != 1) {
      throw ParseError("checkpoint: unsupported format or version");
    }
    const auto& jm = j.at("model");
    const auto& jn = jm.at("network");
    Checkpoint ckpt;
    ckpt.model.kind = parse_model_kind(jm.at("kind").get<std::string>());
    ckpt.model.variance_floor = jm.at("variance_floor").get<double>();
    ckpt.model.network = NetworkParams(NetworkLayout(jn.at("widths").get<std::vector<std::size_t>>()),
                                       jn.at("leaky_slope").get<double>());
    const auto coeffs = jn.at("coefficients").get<std::vector<double>>();
    if (coeffs.size() != ckpt.model.network.values().size()) {
      throw ParseError("checkpoint: coefficient count does not match layer shapes");
    }
    std::copy(coeffs.begin(), coeffs.end(), ckpt.model.network.values().begin());
    if (!jm.at("posterior").is_null()) {
      VariationalPosterior post(ckpt.model.network.layout().feature_dim());
      const auto mean = jm.at("posterior").at("mean").get<std::vector<double>>();
      const auto log_std = jm.at("posterior").at("log_std").get<std::vector<double>>();
      if (mean.size() != post.size() || log_std.size() != post.size()) {
        throw ParseError("checkpoint: posterior size does not match network features");
      }
      std::copy(mean.begin(), mean.end(), post.mean().begin());
      std::copy(log_std.begin(), log_std.end(), post.log_std().begin());
      ckpt.model.posterior = std::move(post);
    }
    if (is_bayesian(ckpt.model.kind) != ckpt.model.posterior.has_value()) {
      throw ParseError("checkpoint: posterior presence does not match model kind");
    }
    ckpt.ncp = ncp_from_json(j.at("ncp"));
    if (!j.at("standardizer").is_null()) {
      const auto& js = j.at("standardizer");
      std::vector<ColumnKind> kinds;
      for (const auto& k : js.at("kinds")) {
        kinds.push_back(k.get<std::string>() == "continuous" ? ColumnKind::kContinuous : ColumnKind::kCategorical);
      }
      ckpt.standardizer = Standardizer(js.at("feature_mean").get<Vector>(), js.at("feature_scale").get<Vector>(),
                                       std::move(kinds), js.at("target_mean").get<double>(),
                                       js.at("target_scale").get<double>());
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace ncp
