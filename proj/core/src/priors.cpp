#include "ncp/priors.hpp"

#include <cmath>
#include <string>

#include "ncp/errors.hpp"

namespace ncp {

void NcpConfig::validate() const {
  if (!(sigma_x_sq >= 0.0) || !std::isfinite(sigma_x_sq)) throw InvalidArgument("ncp: sigma_x_sq must be >= 0");
  if (!(sigma_mu_sq > 0.0)) throw InvalidArgument("ncp: sigma_mu_sq must be > 0");
  if (!(sigma_y_sq > 0.0)) throw InvalidArgument("ncp: sigma_y_sq must be > 0");
  if (!(gamma >= 0.0)) throw InvalidArgument("ncp: gamma must be >= 0");
  if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
    throw InvalidArgument("ncp: flip_probability must be in [0, 1]");
  }
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kGaussian: return "gaussian";
    case NoiseKind::kUniform: return "uniform";
    case NoiseKind::kCategoricalFlip: return "categorical";
  }
  return "?";
}

NoiseKind parse_noise_kind(std::string_view text) {
  if (text == "gaussian" || text == "normal") return NoiseKind::kGaussian;
  if (text == "uniform") return NoiseKind::kUniform;
  if (text == "categorical" || text == "categorical-flip") return NoiseKind::kCategoricalFlip;
  throw InvalidArgument("unknown noise kind '" + std::string(text) + "' (valid: gaussian, uniform, categorical)");
}

PerturbedBatch perturb_inputs(const Matrix& batch_x, std::span<const double> labels, const NcpConfig& ncp,
                              std::span<const ColumnSpec> columns, RngStream& rng) {
  if (!(ncp.sigma_x_sq >= 0.0)) throw InvalidArgument("perturb_inputs: negative noise variance");
  if (!(ncp.flip_probability >= 0.0 && ncp.flip_probability <= 1.0)) {
    throw InvalidArgument("perturb_inputs: flip probability outside [0, 1]");
  }
  if (labels.size() != batch_x.rows()) throw InvalidArgument("perturb_inputs: label count differs from row count");
  if (!columns.empty() && columns.size() != batch_x.cols()) {
    throw InvalidArgument("perturb_inputs: column schema width differs from batch width");
  }

  PerturbedBatch out{batch_x, Vector(labels.begin(), labels.end()), ncp.noise, ncp.sigma_x_sq};
  const double sigma = std::sqrt(ncp.sigma_x_sq);
  for (std::size_t r = 0; r < batch_x.rows(); ++r) {
    auto row = out.inputs.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      const bool categorical = !columns.empty() && columns[c].kind == ColumnKind::kCategorical;
      if (categorical) {
        const auto n = columns[c].n_classes();
        if (rng.uniform() < ncp.flip_probability && n > 1) {
          const auto current = static_cast<std::uint64_t>(row[c]);
          auto pick = rng.index(n - 1);
          if (pick >= current) ++pick;
          row[c] = static_cast<double>(pick);
        }
        continue;
      }
      switch (ncp.noise) {
        case NoiseKind::kGaussian:
          row[c] += sigma * rng.normal();
          break;
        case NoiseKind::kUniform:
          row[c] += rng.uniform(-2.0 * sigma, 2.0 * sigma);
          break;
        case NoiseKind::kCategoricalFlip:
          break;
      }
    }
  }
  return out;
}

std::vector<Gaussian1D> output_prior_targets(std::span<const double> batch_y, const NcpConfig& ncp) {
  std::vector<Gaussian1D> out;
  out.reserve(batch_y.size());
  for (double y : batch_y) {
    out.push_back({ncp.mean_rule == MeanRule::kLabelPassthrough ? y : ncp.mu_y, ncp.sigma_y_sq});
  }
  return out;
}

}  // namespace ncp
