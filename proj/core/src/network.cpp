#include "ncp/network.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "ncp/errors.hpp"

namespace ncp {

NetworkLayout::NetworkLayout(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.empty()) throw InvalidArgument("network: layer width list is empty");
  for (auto w : widths_) {
    if (w == 0) throw InvalidArgument("network: layer widths must be >= 1");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    layer_offsets_.push_back(offset);
    offset += widths_[l + 1] * widths_[l] + widths_[l + 1];
  }
  heads_offset_ = offset;
  size_ = offset + 3 * (feature_dim() + 1);
}

std::size_t NetworkLayout::head_offset(Head head) const {
  return heads_offset_ + static_cast<std::size_t>(head) * (feature_dim() + 1);
}

NetworkParams::NetworkParams(NetworkLayout layout, double leaky_slope)
    : layout_(std::move(layout)), leaky_slope_(leaky_slope), values_(layout_.size(), 0.0) {}

std::span<double> NetworkParams::weight(std::size_t layer) {
  const auto& w = layout_.widths();
  return std::span<double>(values_).subspan(layout_.weight_offset(layer), w[layer + 1] * w[layer]);
}
std::span<const double> NetworkParams::weight(std::size_t layer) const {
  const auto& w = layout_.widths();
  return std::span<const double>(values_).subspan(layout_.weight_offset(layer), w[layer + 1] * w[layer]);
}
std::span<double> NetworkParams::bias(std::size_t layer) {
  return std::span<double>(values_).subspan(layout_.bias_offset(layer), layout_.widths()[layer + 1]);
}
std::span<const double> NetworkParams::bias(std::size_t layer) const {
  return std::span<const double>(values_).subspan(layout_.bias_offset(layer), layout_.widths()[layer + 1]);
}
std::span<double> NetworkParams::head_weight(Head head) {
  return std::span<double>(values_).subspan(layout_.head_offset(head), layout_.feature_dim());
}
std::span<const double> NetworkParams::head_weight(Head head) const {
  return std::span<const double>(values_).subspan(layout_.head_offset(head), layout_.feature_dim());
}
double& NetworkParams::head_bias(Head head) {
  return values_[layout_.head_offset(head) + layout_.feature_dim()];
}
double NetworkParams::head_bias(Head head) const {
  return values_[layout_.head_offset(head) + layout_.feature_dim()];
}

bool NetworkParams::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

NetworkParams init_params(std::span<const std::size_t> widths, RngStream& rng, double leaky_slope) {
  NetworkParams params(NetworkLayout({widths.begin(), widths.end()}), leaky_slope);
  const auto& layout = params.layout();
  for (std::size_t l = 0; l < layout.hidden_layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layout.widths()[l]));
    for (double& w : params.weight(l)) w = rng.uniform(-limit, limit);
  }
  const double head_limit = std::sqrt(3.0 / static_cast<double>(layout.feature_dim()));
  for (Head head : {Head::kMean, Head::kVariance, Head::kOod}) {
    for (double& w : params.head_weight(head)) w = rng.uniform(-head_limit, head_limit);
  }
  return params;
}

double leaky_relu(double z, double slope) { return z > 0.0 ? z : slope * z; }

void forward(const NetworkParams& params, std::span<const double> x, ForwardCache& cache) {
  const auto& layout = params.layout();
  if (x.size() != layout.input_dim()) {
    throw InvalidArgument("forward: input has dimension " + std::to_string(x.size()) +
                          ", network expects " + std::to_string(layout.input_dim()));
  }
  const std::size_t layers = layout.hidden_layers();
  cache.input.assign(x.begin(), x.end());
  cache.pre_activations.resize(layers);
  cache.activations.resize(layers);
  const double slope = params.leaky_slope();

  std::span<const double> in = cache.input;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t n_out = layout.widths()[l + 1];
    const std::size_t n_in = layout.widths()[l];
    const auto w = params.weight(l);
    const auto b = params.bias(l);
    auto& z = cache.pre_activations[l];
    auto& a = cache.activations[l];
    z.resize(n_out);
    a.resize(n_out);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* row = w.data() + o * n_in;
      double acc = b[o];
      for (std::size_t i = 0; i < n_in; ++i) acc += row[i] * in[i];
      z[o] = acc;
      a[o] = leaky_relu(acc, slope);
    }
    in = a;
  }

  auto& out = cache.output;
  out.features.assign(in.begin(), in.end());
  out.mean = dot(params.head_weight(Head::kMean), out.features) + params.head_bias(Head::kMean);
  out.variance_raw =
      dot(params.head_weight(Head::kVariance), out.features) + params.head_bias(Head::kVariance);
  out.ood_logit = dot(params.head_weight(Head::kOod), out.features) + params.head_bias(Head::kOod);
}

TrunkOutput forward(const NetworkParams& params, std::span<const double> x) {
  ForwardCache cache;
  forward(params, x, cache);
  return std::move(cache.output);
}

void backward_accumulate(const NetworkParams& params, const ForwardCache& cache,
                         const HeadGrads& head_grads, std::span<double> grad) {
  const auto& layout = params.layout();
  if (grad.size() != layout.size()) throw InvalidArgument("backward: gradient buffer has wrong size");
  const std::size_t feat = layout.feature_dim();
  if (!head_grads.features.empty() && head_grads.features.size() != feat) {
    throw InvalidArgument("backward: feature gradient has wrong dimension");
  }
  const auto& h = cache.output.features;

  Vector upstream(feat, 0.0);
  if (!head_grads.features.empty()) {
    std::copy(head_grads.features.begin(), head_grads.features.end(), upstream.begin());
  }
  const std::pair<Head, double> heads[] = {{Head::kMean, head_grads.mean},
                                           {Head::kVariance, head_grads.variance_raw},
                                           {Head::kOod, head_grads.ood_logit}};
  for (const auto& [head, g] : heads) {
    if (g == 0.0) continue;
    const std::size_t off = layout.head_offset(head);
    const auto w = params.head_weight(head);
    for (std::size_t j = 0; j < feat; ++j) {
      grad[off + j] += g * h[j];
      upstream[j] += g * w[j];
    }
    grad[off + feat] += g;
  }

  const double slope = params.leaky_slope();
  Vector delta;
  for (std::size_t l = layout.hidden_layers(); l-- > 0;) {
    const std::size_t n_out = layout.widths()[l + 1];
    const std::size_t n_in = layout.widths()[l];
    const auto& z = cache.pre_activations[l];
    const auto& in = l == 0 ? cache.input : cache.activations[l - 1];
    delta.resize(n_out);
    for (std::size_t o = 0; o < n_out; ++o) delta[o] = upstream[o] * (z[o] > 0.0 ? 1.0 : slope);

    const auto w = params.weight(l);
    double* gw = grad.data() + layout.weight_offset(l);
    double* gb = grad.data() + layout.bias_offset(l);
    Vector next(l == 0 ? 0 : n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      double* grow = gw + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) grow[i] += d * in[i];
      gb[o] += d;
      if (l > 0) {
        const double* wrow = w.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) next[i] += d * wrow[i];
      }
    }
    upstream = std::move(next);
  }
}

Vector backward(const NetworkParams& params, std::span<const double> x, const HeadGrads& head_grads) {
  ForwardCache cache;
  forward(params, x, cache);
  Vector grad(params.layout().size(), 0.0);
  backward_accumulate(params, cache, head_grads, grad);
  return grad;
}

void write_network(std::ostream& out, const NetworkParams& params) {
  const auto& widths = params.layout().widths();
  out << "ncp-network 1\n";
  out << "leaky_slope " << format_double(params.leaky_slope()) << '\n';
  out << "widths " << widths.size();
  for (auto w : widths) out << ' ' << w;
  out << '\n';
  out << "coefficients " << params.values().size() << '\n';
  for (double v : params.values()) out << format_double(v) << '\n';
}

NetworkParams read_network(std::istream& in) {
  auto expect = [&](const std::string& word) {
    std::string token;
    if (!(in >> token) || token != word) {
      throw ParseError("read_network: expected '" + word + "', found '" + token + "'");
    }
  };
  expect("ncp-network");
  int version = 0;
  if (!(in >> version) || version != 1) throw ParseError("read_network: unsupported format version");
  expect("leaky_slope");
  double slope = 0.0;
  if (!(in >> slope)) throw ParseError("read_network: bad leaky_slope");
  expect("widths");
  std::size_t count = 0;
  if (!(in >> count) || count == 0) throw ParseError("read_network: bad width count");
  std::vector<std::size_t> widths(count);
  for (auto& w : widths) {
    if (!(in >> w)) throw ParseError("read_network: truncated width list");
  }
  NetworkParams params(NetworkLayout(std::move(widths)), slope);
  expect("coefficients");
  std::size_t n = 0;
  if (!(in >> n) || n != params.values().size()) {
    throw ParseError("read_network: coefficient count does not match layer shapes");
  }
  for (double& v : params.values()) {
    if (!(in >> v)) throw ParseError("read_network: truncated coefficient list");
  }
  if (!params.all_finite()) throw ParseError("read_network: non-finite coefficient");
  return params;
}

}  // namespace ncp
