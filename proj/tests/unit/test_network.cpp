#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncp/errors.hpp"
#include "ncp/network.hpp"

namespace ncp {
namespace {

NetworkParams hand_network() {
  const std::vector<std::size_t> widths = {2, 2, 2};
  NetworkParams p{NetworkLayout(widths), 0.2};
  const Vector w1 = {0.5, -1.0, 0.25, 0.75};
  const Vector w2 = {1.0, -0.5, -2.0, 0.3};
  std::copy(w1.begin(), w1.end(), p.weight(0).begin());
  std::copy(w2.begin(), w2.end(), p.weight(1).begin());
  p.bias(0)[0] = 0.1;
  p.bias(0)[1] = -0.2;
  p.bias(1)[0] = 0.0;
  p.bias(1)[1] = 0.05;
  p.head_weight(Head::kMean)[0] = 0.7;
  p.head_weight(Head::kMean)[1] = -0.4;
  p.head_bias(Head::kMean) = 0.3;
  p.head_weight(Head::kVariance)[0] = 0.2;
  p.head_weight(Head::kVariance)[1] = 0.1;
  p.head_bias(Head::kVariance) = -0.5;
  p.head_weight(Head::kOod)[0] = -1.0;
  p.head_weight(Head::kOod)[1] = 2.0;
  p.head_bias(Head::kOod) = 0.25;
  return p;
}

NetworkParams random_network(std::vector<std::size_t> widths, std::uint64_t seed) {
  RngStream rng(seed, 0);
  NetworkParams p = init_params(widths, rng);
  for (auto& v : p.values()) v += 0.1 * rng.normal();
  return p;
}

TEST(Layout, SizesAndOffsets) {
  const NetworkLayout l({3, 4, 2});
  EXPECT_EQ(l.input_dim(), 3u);
  EXPECT_EQ(l.feature_dim(), 2u);
  EXPECT_EQ(l.hidden_layers(), 2u);
  EXPECT_EQ(l.bias_offset(0), 12u);
  EXPECT_EQ(l.weight_offset(1), 16u);
  EXPECT_EQ(l.head_offset(Head::kMean), 26u);
  EXPECT_EQ(l.size(), 26u + 9u);
}

TEST(Init, Deterministic) {
  const std::vector<std::size_t> widths = {1, 200, 200};
  RngStream a(7, 1);
  RngStream b(7, 1);
  EXPECT_EQ(init_params(widths, a), init_params(widths, b));
}

TEST(Init, BiasesZero) {
  const std::vector<std::size_t> widths = {3, 50, 20};
  RngStream rng(7, 1);
  const auto p = init_params(widths, rng);
  for (std::size_t l = 0; l < 2; ++l) {
    for (double b : p.bias(l)) EXPECT_EQ(b, 0.0);
  }
  for (Head h : {Head::kMean, Head::kVariance, Head::kOod}) EXPECT_EQ(p.head_bias(h), 0.0);
}

TEST(Init, WeightScaleFollowsFanIn) {
  const std::vector<std::size_t> widths = {1, 200, 200};
  RngStream rng(7, 1);
  const auto p = init_params(widths, rng);
  const auto w = p.weight(1);
  const double expected = std::sqrt(6.0 / 200.0) / std::sqrt(3.0);
  EXPECT_NEAR(stddev(w), expected, 0.2 * expected);
  const double bound = std::sqrt(6.0 / 200.0);
  for (double v : w) EXPECT_LE(std::abs(v), bound);
}

TEST(Forward, ZeroNetworkGivesZero) {
  const std::vector<std::size_t> widths = {3, 4, 4};
  NetworkParams p{NetworkLayout(widths)};
  const auto out = forward(p, Vector{1.0, -2.0, 3.0});
  for (double h : out.features) EXPECT_EQ(h, 0.0);
  EXPECT_EQ(out.mean, 0.0);
  EXPECT_EQ(out.variance_raw, 0.0);
  EXPECT_EQ(out.ood_logit, 0.0);
}

TEST(Forward, LeakyNegativeSide) {
  const std::vector<std::size_t> widths = {1, 1};
  NetworkParams p{NetworkLayout(widths), 0.2};
  p.weight(0)[0] = 1.0;
  const auto out = forward(p, Vector{-1.0});
  EXPECT_EQ(out.features[0], -0.2);
  EXPECT_EQ(leaky_relu(-3.0, 0.1), -0.30000000000000004);
  EXPECT_EQ(leaky_relu(2.0, 0.1), 2.0);
}

TEST(Forward, HandComputedTwoLayer) {
  const auto p = hand_network();
  ForwardCache cache;
  forward(p, Vector{1.0, 2.0}, cache);
  EXPECT_NEAR(cache.pre_activations[0][0], -1.4, 1e-12);
  EXPECT_NEAR(cache.pre_activations[0][1], 1.55, 1e-12);
  EXPECT_NEAR(cache.pre_activations[1][0], -1.055, 1e-12);
  EXPECT_NEAR(cache.pre_activations[1][1], 1.075, 1e-12);
  EXPECT_NEAR(cache.output.features[0], -0.211, 1e-12);
  EXPECT_NEAR(cache.output.features[1], 1.075, 1e-12);
  EXPECT_NEAR(cache.output.mean, -0.2777, 1e-12);
  EXPECT_NEAR(cache.output.variance_raw, -0.4347, 1e-12);
  EXPECT_NEAR(cache.output.ood_logit, 2.611, 1e-12);
}

TEST(Forward, DimensionMismatchThrows) {
  const auto p = hand_network();
  EXPECT_THROW(forward(p, Vector{1.0}), InvalidArgument);
  EXPECT_THROW(backward(p, Vector{1.0, 2.0, 3.0}, {1.0}), InvalidArgument);
}

TEST(Forward, RepeatableBitForBit) {
  const auto p = random_network({4, 8, 8}, 3);
  const Vector x = {0.1, -0.5, 2.0, 0.3};
  const auto a = forward(p, x);
  const auto b = forward(p, x);
  EXPECT_EQ(a.features, b.features);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.variance_raw, b.variance_raw);
  EXPECT_EQ(a.ood_logit, b.ood_logit);
}

TEST(Backward, ZeroUpstreamGivesZero) {
  const auto p = random_network({3, 5, 4}, 4);
  const auto g = backward(p, Vector{0.2, 0.1, -0.7}, {});
  for (double v : g) EXPECT_EQ(v, 0.0);
}

TEST(Backward, LinearMeanHeadGradientIsInput) {
  const std::vector<std::size_t> widths = {3};
  NetworkParams p{NetworkLayout(widths)};
  const Vector x = {0.5, -1.5, 2.0};
  const auto g = backward(p, x, {1.0});
  const auto off = p.layout().head_offset(Head::kMean);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g[off + i], x[i]);
  EXPECT_EQ(g[off + 3], 1.0);
}

TEST(Backward, LinearInUpstream) {
  const auto p = random_network({3, 6, 5}, 5);
  const Vector x = {0.3, -0.2, 1.1};
  const auto g1 = backward(p, x, {0.5, -1.25, 2.0});
  const auto g4 = backward(p, x, {2.0, -5.0, 8.0});
  for (std::size_t i = 0; i < g1.size(); ++i) EXPECT_EQ(g4[i], 4.0 * g1[i]);
}

bool near_kink(const NetworkParams& p, std::span<const double> x, double margin) {
  ForwardCache cache;
  forward(p, x, cache);
  for (const auto& z : cache.pre_activations) {
    for (double v : z) {
      if (std::abs(v) < margin) return true;
    }
  }
  return false;
}

TEST(Backward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_network({3, 8, 6, 5}, 100 + seed);
    RngStream rng(200 + seed, 0);
    const Vector x = {rng.normal(), rng.normal(), rng.normal()};
    const HeadGrads hg{rng.normal(), rng.normal(), rng.normal()};
    if (near_kink(p, x, 1e-3)) continue;
    const auto analytic = backward(p, x, hg);
    auto f = [&](std::span<const double> v) {
      NetworkParams q = p;
      std::copy(v.begin(), v.end(), q.values().begin());
      const auto out = forward(q, x);
      return hg.mean * out.mean + hg.variance_raw * out.variance_raw + hg.ood_logit * out.ood_logit;
    };
    const auto numeric = finite_diff_grad(f, p.values(), 1e-5);
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
      EXPECT_LE(std::abs(analytic[i] - numeric[i]), 1e-4 * scale + 1e-8) << "seed " << seed << " coord " << i;
    }
  }
}

TEST(Backward, FeatureGradientFlowsIntoTrunk) {
  const auto p = random_network({2, 4, 3}, 9);
  const Vector x = {0.7, -0.4};
  const Vector fg = {0.3, -1.0, 0.5};
  HeadGrads hg;
  hg.features = fg;
  const auto analytic = backward(p, x, hg);
  auto f = [&](std::span<const double> v) {
    NetworkParams q = p;
    std::copy(v.begin(), v.end(), q.values().begin());
    return dot(forward(q, x).features, fg);
  };
  const auto numeric = finite_diff_grad(f, p.values(), 1e-6);
  for (std::size_t i = 0; i < analytic.size(); ++i) EXPECT_NEAR(analytic[i], numeric[i], 1e-7);
}

TEST(Backward, AccumulateAdds) {
  const auto p = random_network({2, 3}, 11);
  const Vector x = {0.5, 0.5};
  ForwardCache cache;
  forward(p, x, cache);
  Vector grad(p.layout().size(), 1.0);
  backward_accumulate(p, cache, {1.0, 0.0, 0.0}, grad);
  const auto fresh = backward(p, x, {1.0, 0.0, 0.0});
  for (std::size_t i = 0; i < grad.size(); ++i) EXPECT_EQ(grad[i], fresh[i] + 1.0);
}

TEST(Serialization, RoundTripsExactly) {
  const auto p = random_network({3, 7, 2}, 12);
  std::stringstream ss;
  write_network(ss, p);
  EXPECT_EQ(read_network(ss), p);
}

TEST(Serialization, TruncatedInputThrows) {
  const auto p = random_network({2, 3}, 13);
  std::stringstream ss;
  write_network(ss, p);
  std::string text = ss.str();
  text.resize(text.size() / 2);
  std::istringstream in(text);
  EXPECT_THROW(read_network(in), ParseError);
}

}  // namespace
}  // namespace ncp
