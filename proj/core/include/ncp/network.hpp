#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "ncp/math.hpp"
#include "ncp/rng.hpp"

namespace ncp {

inline constexpr double kDefaultLeakySlope = 0.2;

enum class Head { kMean, kVariance, kOod };

/// Shapes and flat offsets of a trunk with three scalar heads.
///
/// `widths` lists the input dimension followed by every hidden width, so
/// {1, 200, 200} is a 1-D input with two hidden layers of 200 units. A single
/// entry {D} means no hidden layers: the features are the raw inputs.
///
/// Flat coefficient order (the serialization order as well):
///   for each hidden layer l: W_l (widths[l+1] x widths[l], row-major), b_l
///   mean head: w (F), b;  variance head: w (F), b;  OOD head: w (F), b
/// where F = widths.back().
class NetworkLayout {
public:
  NetworkLayout() = default;
  explicit NetworkLayout(std::vector<std::size_t> widths);

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t input_dim() const { return widths_.front(); }
  std::size_t feature_dim() const { return widths_.back(); }
  std::size_t hidden_layers() const { return widths_.size() - 1; }

  std::size_t weight_offset(std::size_t layer) const { return layer_offsets_[layer]; }
  std::size_t bias_offset(std::size_t layer) const {
    return layer_offsets_[layer] + widths_[layer + 1] * widths_[layer];
  }
  std::size_t head_offset(Head head) const;
  std::size_t size() const { return size_; }

  bool operator==(const NetworkLayout& other) const { return widths_ == other.widths_; }

private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> layer_offsets_;
  std::size_t heads_offset_ = 0;
  std::size_t size_ = 0;
};

/// All point-estimated coefficients: trunk, deterministic mean head, variance head, OOD head.
class NetworkParams {
public:
  NetworkParams() = default;
  NetworkParams(NetworkLayout layout, double leaky_slope = kDefaultLeakySlope);

  const NetworkLayout& layout() const { return layout_; }
  double leaky_slope() const { return leaky_slope_; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> weight(std::size_t layer);
  std::span<const double> weight(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;
  std::span<double> head_weight(Head head);
  std::span<const double> head_weight(Head head) const;
  double& head_bias(Head head);
  double head_bias(Head head) const;

  bool all_finite() const;
  bool operator==(const NetworkParams&) const = default;

private:
  NetworkLayout layout_;
  double leaky_slope_ = kDefaultLeakySlope;
  Vector values_;
};

struct TrunkOutput {
  /// Last hidden activation h(x).
  Vector features;
  double mean = 0.0;
  double variance_raw = 0.0;
  double ood_logit = 0.0;
};

/// Per-layer pre-activations and activations recorded by a forward pass.
struct ForwardCache {
  Vector input;
  std::vector<Vector> pre_activations;
  std::vector<Vector> activations;
  TrunkOutput output;
};

/// Upstream gradients of a scalar objective with respect to the head outputs.
/// `features` is the gradient with respect to h(x) from layers outside the
/// network (the variational mean layer); leave empty when there is none.
struct HeadGrads {
  double mean = 0.0;
  double variance_raw = 0.0;
  double ood_logit = 0.0;
  std::span<const double> features = {};
};

/// Trunk weights ~ U(-sqrt(6/fan_in), sqrt(6/fan_in)); head weights
/// ~ U(-sqrt(3/F), sqrt(3/F)); all biases zero.
NetworkParams init_params(std::span<const std::size_t> widths, RngStream& rng,
                          double leaky_slope = kDefaultLeakySlope);

double leaky_relu(double z, double slope);

TrunkOutput forward(const NetworkParams& params, std::span<const double> x);
void forward(const NetworkParams& params, std::span<const double> x, ForwardCache& cache);

/// Gradient of sum_k head_grads_k * head_k(x) with respect to every coefficient.
Vector backward(const NetworkParams& params, std::span<const double> x, const HeadGrads& head_grads);
/// Same contraction, added into `grad` using the activations stored in `cache`.
void backward_accumulate(const NetworkParams& params, const ForwardCache& cache,
                         const HeadGrads& head_grads, std::span<double> grad);

/// Text serialization; see docs/formats.md.
void write_network(std::ostream& out, const NetworkParams& params);
NetworkParams read_network(std::istream& in);

}  // namespace ncp
