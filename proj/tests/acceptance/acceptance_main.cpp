// End-to-end acceptance gate. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.
//
//   ncp_acceptance [--only 1,3,...] [--set key=value]...
//
// --set overrides apply to the toy preset on top of its file contents, but
// never to the settings a criterion pins (architecture, schedule, sigma_x^2,
// seed count).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "cli.hpp"
#include "ncp/acquisition.hpp"
#include "ncp/config.hpp"
#include "ncp/data.hpp"
#include "ncp/distributions.hpp"
#include "ncp/harness.hpp"
#include "ncp/models.hpp"
#include "ncp/network.hpp"
#include "ncp/priors.hpp"
#include "ncp/rng.hpp"

namespace fs = std::filesystem;
using namespace ncp;

namespace {

// Pinned tolerances and limits.
constexpr double kFdStep = 1e-5;
constexpr double kFdRelTol = 1e-4;
constexpr double kFdNegligible = 1e-8;  // both gradients below this count as agreeing
constexpr double kFdMinPassFraction = 0.99;
constexpr double kFdSeconds = 30.0;

constexpr std::size_t kMcDraws = 100000;
constexpr std::size_t kMcInstances = 20;
constexpr double kMcRelTol = 0.01;
constexpr double kMcSeconds = 60.0;

constexpr std::size_t kToySeeds = 10;
constexpr std::size_t kSweepSeeds = 5;
constexpr double kToySeconds = 600.0;
constexpr double kGapRatio = 2.0;
constexpr double kOdcTrainMax = 0.2;
constexpr double kOdcNoisedMin = 0.8;
constexpr double kOdcNoiseSigmas = 3.0;
constexpr std::size_t kOdcDrawsPerInput = 200;
constexpr double kSweepWinFraction = 0.7;
constexpr std::size_t kTabularRows = 10000;
constexpr std::size_t kTabularEpochs = 50;
constexpr double kTabularSeconds = 300.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Gate {
  int failures = 0;
  void report(int id, bool pass, const std::string& title, const std::string& detail, double seconds) {
    if (!pass) ++failures;
    std::printf("%s  C%d  %-34s %s (%.1f s)\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- C1

std::vector<char> kink_pattern(const NetworkParams& p, const std::vector<const Matrix*>& inputs) {
  std::vector<char> pattern;
  ForwardCache cache;
  for (const Matrix* m : inputs) {
    for (std::size_t r = 0; r < m->rows(); ++r) {
      forward(p, m->row(r), cache);
      for (const auto& layer : cache.pre_activations) {
        for (double z : layer) pattern.push_back(z > 0.0);
      }
    }
  }
  return pattern;
}

struct FdTally {
  std::size_t checked = 0;
  std::size_t passed = 0;
  std::size_t excluded = 0;
};

using LossFn = std::function<LossResult(const NetworkParams&, const VariationalPosterior*)>;

void check_gradients(const NetworkParams& net, const VariationalPosterior* post, const LossFn& loss,
                     const std::vector<const Matrix*>& inputs, FdTally& tally) {
  const LossResult base = loss(net, post);
  const auto agrees = [&](double analytic, double numeric) {
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    return scale < kFdNegligible || std::abs(analytic - numeric) <= kFdRelTol * scale;
  };
  const auto base_kinks = kink_pattern(net, inputs);
  for (std::size_t i = 0; i < net.values().size(); ++i) {
    NetworkParams plus = net;
    NetworkParams minus = net;
    plus.values()[i] += kFdStep;
    minus.values()[i] -= kFdStep;
    if (kink_pattern(plus, inputs) != base_kinks || kink_pattern(minus, inputs) != base_kinks) {
      ++tally.excluded;
      continue;
    }
    const double numeric = (loss(plus, post).value - loss(minus, post).value) / (2.0 * kFdStep);
    ++tally.checked;
    tally.passed += agrees(base.grad_network[i], numeric);
  }
  if (post == nullptr) return;
  for (std::size_t i = 0; i < post->values().size(); ++i) {
    VariationalPosterior plus = *post;
    VariationalPosterior minus = *post;
    plus.values()[i] += kFdStep;
    minus.values()[i] -= kFdStep;
    const double numeric = (loss(net, &plus).value - loss(net, &minus).value) / (2.0 * kFdStep);
    ++tally.checked;
    tally.passed += agrees(base.grad_posterior[i], numeric);
  }
}

void criterion_gradients(Gate& gate) {
  const auto t0 = Clock::now();
  constexpr std::size_t kInstances = 40;
  RngStream rng = make_rng(101, 0);
  const char* names[] = {"det", "bbb", "bbb_ncp", "odc_ncp"};
  std::vector<FdTally> tallies(4);
  for (std::size_t inst = 0; inst < kInstances; ++inst) {
    const std::size_t in_dim = 1 + rng.index(3);
    std::vector<std::size_t> widths = {in_dim};
    const std::size_t layers = 1 + rng.index(2);
    for (std::size_t l = 0; l < layers; ++l) widths.push_back(2 + rng.index(7));
    const std::size_t batch_size = 1 + rng.index(4);

    NetworkParams net = init_params(widths, rng);
    for (double& v : net.values()) v += 0.1 * rng.normal();
    VariationalPosterior post = VariationalPosterior::from_network(net);
    const std::size_t n = post.size();
    for (std::size_t i = 0; i < n; ++i) {
      post.values()[i] += 0.3 * rng.normal();
      post.values()[n + i] = rng.uniform(-2.0, 0.0);
    }

    Batch batch{Matrix(batch_size, in_dim), Vector(batch_size)};
    for (std::size_t r = 0; r < batch_size; ++r) {
      for (std::size_t c = 0; c < in_dim; ++c) batch.x(r, c) = rng.normal();
      batch.y[r] = rng.normal();
    }
    NcpConfig ncp;
    ncp.sigma_x_sq = rng.uniform(0.1, 1.0);
    ncp.sigma_mu_sq = rng.uniform(0.5, 2.0);
    ncp.sigma_y_sq = rng.uniform(0.5, 2.0);
    ncp.gamma = rng.uniform(0.1, 2.0);
    ncp.mu_y = rng.normal();
    ncp.mean_rule = rng.uniform() < 0.5 ? MeanRule::kLabelPassthrough : MeanRule::kConstant;
    ncp.kl_direction = rng.uniform() < 0.5 ? KlDirection::kForward : KlDirection::kReverse;
    std::vector<ColumnSpec> columns(in_dim, ColumnSpec{"x", ColumnKind::kContinuous, {}});
    const PerturbedBatch perturbed = perturb_inputs(batch.x, batch.y, ncp, columns, rng);
    const Vector noise = sample_weight_noise(post, rng);
    const std::size_t dataset_size = batch_size + rng.index(50);
    const WeightPrior prior{rng.uniform(0.5, 2.0)};
    const std::vector<const Matrix*> clean = {&batch.x};
    const std::vector<const Matrix*> both = {&batch.x, &perturbed.inputs};

    check_gradients(
        net, nullptr, [&](const NetworkParams& p, const VariationalPosterior*) { return det_loss(p, batch); }, clean,
        tallies[0]);
    check_gradients(
        net, &post,
        [&](const NetworkParams& p, const VariationalPosterior* q) {
          return bbb_loss(p, *q, prior, batch, dataset_size, noise);
        },
        clean, tallies[1]);
    check_gradients(
        net, &post,
        [&](const NetworkParams& p, const VariationalPosterior* q) {
          return bbb_ncp_loss(p, *q, batch, perturbed, ncp, noise);
        },
        both, tallies[2]);
    check_gradients(
        net, nullptr,
        [&](const NetworkParams& p, const VariationalPosterior*) { return odc_ncp_loss(p, batch, perturbed, ncp); },
        both, tallies[3]);
  }
  bool pass = true;
  std::ostringstream detail;
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& t = tallies[k];
    const double frac = t.checked ? static_cast<double>(t.passed) / t.checked : 0.0;
    pass = pass && t.checked > 0 && frac >= kFdMinPassFraction;
    detail << names[k] << " " << t.passed << "/" << t.checked << " (" << t.excluded << " kink) ";
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < kFdSeconds;
  gate.report(1, pass, "gradients vs finite differences", detail.str(), secs);
}

// ---------------------------------------------------------------- C2

// Standard normal quantile: rational initial guess refined by Halley steps.
double normal_quantile(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01,  -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - 0.02425) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

// Latin hypercube standard-normal draws: column j holds one draw per stratum
// of (0, 1), in an independent random order per dimension.
std::vector<Vector> lhs_normals(std::size_t dims, std::size_t draws, RngStream& rng) {
  std::vector<Vector> cols(dims, Vector(draws));
  for (auto& col : cols) {
    for (std::size_t k = 0; k < draws; ++k) {
      col[k] = normal_quantile((static_cast<double>(k) + rng.uniform()) / static_cast<double>(draws));
    }
    rng.shuffle(std::span<double>(col));
  }
  return cols;
}

double rel_err(double mc, double exact) { return std::abs(mc - exact) / std::abs(exact); }

void criterion_monte_carlo(Gate& gate) {
  const auto t0 = Clock::now();
  RngStream rng = make_rng(202, 0);
  double worst_belief = 0.0;
  double worst_kl = 0.0;
  double worst_weight_kl = 0.0;
  for (std::size_t inst = 0; inst < kMcInstances; ++inst) {
    // Mean belief of a random mean layer.
    const std::size_t f = 1 + rng.index(8);
    NetworkParams net = init_params(std::vector<std::size_t>{1, f}, rng);
    VariationalPosterior post = VariationalPosterior::from_network(net);
    for (std::size_t i = 0; i <= f; ++i) {
      post.values()[i] = rng.normal();
      post.values()[f + 1 + i] = rng.uniform(-2.0, 0.5);
    }
    Vector h(f);
    for (auto& v : h) v = rng.normal();
    const Gaussian1D cf = mean_belief(post, h);
    const auto z = lhs_normals(f + 1, kMcDraws, rng);
    double s1 = 0.0;
    double s2 = 0.0;
    std::vector<double> samples(kMcDraws);
    for (std::size_t k = 0; k < kMcDraws; ++k) {
      double mu = 0.0;
      for (std::size_t i = 0; i <= f; ++i) {
        const double w = post.values()[i] + std::exp(post.values()[f + 1 + i]) * z[i][k];
        mu += (i < f ? h[i] : 1.0) * w;
      }
      samples[k] = mu;
      s1 += mu;
    }
    const double mc_mean = s1 / kMcDraws;
    for (double s : samples) s2 += (s - mc_mean) * (s - mc_mean);
    const double mc_var = s2 / (kMcDraws - 1);
    worst_belief = std::max({worst_belief, rel_err(mc_mean, cf.mean), rel_err(mc_var, cf.variance)});

    // KL between the belief and a random Gaussian, both directions.
    const Gaussian1D other{cf.mean + rng.uniform(-2.0, 2.0) * std::sqrt(cf.variance),
                           cf.variance * std::exp(rng.uniform(-1.0, 1.0))};
    for (const auto& [p, q] : {std::pair{cf, other}, std::pair{other, cf}}) {
      const auto zz = lhs_normals(1, kMcDraws, rng);
      double acc = 0.0;
      for (double zk : zz[0]) {
        const double x = p.mean + std::sqrt(p.variance) * zk;
        acc += normal_log_pdf(x, p) - normal_log_pdf(x, q);
      }
      worst_kl = std::max(worst_kl, rel_err(acc / kMcDraws, kl_normal_normal(p, q)));
    }

    // Weight-space KL of the whole mean layer against an isotropic prior.
    const Gaussian1D prior{0.0, rng.uniform(0.5, 2.0)};
    double exact = 0.0;
    for (std::size_t i = 0; i <= f; ++i) {
      exact += kl_normal_normal({post.values()[i], std::exp(2.0 * post.values()[f + 1 + i])}, prior);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < kMcDraws; ++k) {
      for (std::size_t i = 0; i <= f; ++i) {
        const Gaussian1D qi{post.values()[i], std::exp(2.0 * post.values()[f + 1 + i])};
        const double w = qi.mean + std::sqrt(qi.variance) * z[i][k];
        acc += normal_log_pdf(w, qi) - normal_log_pdf(w, prior);
      }
    }
    worst_weight_kl = std::max(worst_weight_kl, rel_err(acc / kMcDraws, exact));
  }
  const double secs = seconds_since(t0);
  const bool pass = worst_belief <= kMcRelTol && worst_kl <= kMcRelTol && worst_weight_kl <= kMcRelTol &&
                    secs < kMcSeconds;
  gate.report(2, pass, "closed forms vs Monte-Carlo",
              "max rel err: belief " + fmt("%.4f", worst_belief) + ", output KL " + fmt("%.4f", worst_kl) +
                  ", weight KL " + fmt("%.4f", worst_weight_kl),
              secs);
}

// ---------------------------------------------------------------- toy runs (C3-C6)

RunConfig toy_preset(const std::vector<std::string>& overrides) {
  std::ifstream in(NCP_SOURCE_DIR "/configs/toy-active.cfg");
  std::stringstream text;
  text << in.rdbuf();
  RunConfig cfg = parse_config(text.str(), overrides);
  ExperimentConfig& e = cfg.experiment;
  e.hidden_widths = {64, 64};
  e.schedule.epochs_per_round = 200;
  e.schedule.epoch_scale = 1.0;
  e.schedule.initial_labels = 10;
  e.schedule.labels_per_round = 1;
  e.acquisition.batch_size = 1;
  e.schedule.rounds = 20;
  e.schedule.round_budget_seconds = 0.0;
  e.ncp.sigma_x_sq = 0.5;
  cfg.data.source = "toy";
  return cfg;
}

struct ToyRun {
  ModelKind kind;
  ActiveLearningResult result;
};

struct ToyRuns {
  RunConfig cfg;
  Dataset ds;
  std::vector<ToyRun> runs;
  double seconds = 0.0;

  std::vector<const ToyRun*> of(ModelKind k) const {
    std::vector<const ToyRun*> out;
    for (const auto& r : runs) {
      if (r.kind == k) out.push_back(&r);
    }
    return out;
  }
};

ToyRuns run_toy(const std::vector<std::string>& overrides) {
  ToyRuns t;
  t.cfg = toy_preset(overrides);
  t.ds = load_data(t.cfg.data);
  const auto t0 = Clock::now();
  for (ModelKind kind : {ModelKind::kDet, ModelKind::kBbb, ModelKind::kBbbNcp, ModelKind::kOdcNcp}) {
    for (std::uint64_t seed = 0; seed < kToySeeds; ++seed) {
      ExperimentConfig e = t.cfg.experiment;
      e.kind = kind;
      e.seed = seed;
      t.runs.push_back({kind, run_active_learning(e, t.ds)});
    }
  }
  t.seconds = seconds_since(t0);
  return t;
}

std::vector<double> final_metric(const ToyRuns& t, ModelKind k, bool nlpd) {
  std::vector<double> out;
  for (const ToyRun* r : t.of(k)) out.push_back(nlpd ? r->result.records.back().nlpd : r->result.records.back().rmse);
  return out;
}

void criterion_toy_ordering(Gate& gate, const ToyRuns& t) {
  const double det_r = median(final_metric(t, ModelKind::kDet, false));
  const double bbb_r = median(final_metric(t, ModelKind::kBbb, false));
  const double ncp_r = median(final_metric(t, ModelKind::kBbbNcp, false));
  const double odc_r = median(final_metric(t, ModelKind::kOdcNcp, false));
  const double det_n = median(final_metric(t, ModelKind::kDet, true));
  const double bbb_n = median(final_metric(t, ModelKind::kBbb, true));
  const double ncp_n = median(final_metric(t, ModelKind::kBbbNcp, true));
  const double odc_n = median(final_metric(t, ModelKind::kOdcNcp, true));
  bool complete = true;
  for (const auto& r : t.runs) complete = complete && !r.result.aborted && r.result.records.size() == t.cfg.experiment.schedule.rounds;
  const bool rmse_ok = ncp_r < bbb_r && bbb_r < det_r;
  const double baseline_n = std::min(det_n, bbb_n);
  const bool nlpd_ok = ncp_n < baseline_n && odc_n < baseline_n;
  std::ostringstream d;
  d << "median rmse det " << fmt("%.3f", det_r) << " bbb " << fmt("%.3f", bbb_r) << " bbb_ncp "
    << fmt("%.3f", ncp_r) << " odc_ncp " << fmt("%.3f", odc_r) << "; median nlpd det " << fmt("%.3f", det_n)
    << " bbb " << fmt("%.3f", bbb_n) << " bbb_ncp " << fmt("%.3f", ncp_n) << " odc_ncp " << fmt("%.3f", odc_n);
  gate.report(3, complete && rmse_ok && nlpd_ok && t.seconds < kToySeconds, "toy active-learning ordering", d.str(),
              t.seconds);
}

// Mean epistemic std outside the bands over mean epistemic std inside, pooled over seeds.
double gap_ratio(const ToyRuns& t, ModelKind k) {
  double in_sum = 0.0;
  double out_sum = 0.0;
  std::size_t in_n = 0;
  std::size_t out_n = 0;
  for (const ToyRun* r : t.of(k)) {
    const auto& s = r->result.standardizer;
    for (std::size_t row : t.ds.splits.test) {
      Vector x(t.ds.features.row(row).begin(), t.ds.features.row(row).end());
      const double raw = x[0];
      s.transform_features(x);
      const double sd = std::sqrt(predict(r->result.model, x).epistemic_variance);
      if (t.cfg.data.toy.band_a.contains(raw) || t.cfg.data.toy.band_b.contains(raw)) {
        in_sum += sd;
        ++in_n;
      } else {
        out_sum += sd;
        ++out_n;
      }
    }
  }
  return (out_sum / out_n) / (in_sum / in_n);
}

void criterion_gap(Gate& gate, const ToyRuns& t) {
  const auto t0 = Clock::now();
  const double ncp = gap_ratio(t, ModelKind::kBbbNcp);
  const double bbb = gap_ratio(t, ModelKind::kBbb);
  const bool pass = ncp >= kGapRatio && bbb < ncp;
  gate.report(4, pass, "out-of-band epistemic uncertainty",
              "outside/inside epistemic std: bbb_ncp " + fmt("%.3f", ncp) + ", bbb " + fmt("%.3f", bbb),
              seconds_since(t0));
}

void criterion_odc(Gate& gate, const ToyRuns& t) {
  const auto t0 = Clock::now();
  const double scale = kOdcNoiseSigmas * std::sqrt(t.cfg.experiment.ncp.sigma_x_sq);
  RngStream rng = make_rng(505, 0);
  double train_sum = 0.0;
  double noised_sum = 0.0;
  std::size_t train_n = 0;
  std::size_t noised_n = 0;
  for (const ToyRun* r : t.of(ModelKind::kOdcNcp)) {
    const auto& s = r->result.standardizer;
    for (std::size_t row : r->result.final_splits.visible) {
      Vector x(t.ds.features.row(row).begin(), t.ds.features.row(row).end());
      s.transform_features(x);
      train_sum += *predict(r->result.model, x).ood_probability;
      ++train_n;
      // Same noise family as training (standardized input space), scaled up to 3 sigma_x.
      for (std::size_t k = 0; k < kOdcDrawsPerInput; ++k) {
        Vector xs = x;
        for (double& v : xs) v += scale * rng.normal();
        noised_sum += *predict(r->result.model, xs).ood_probability;
        ++noised_n;
      }
    }
  }
  const double train_pi = train_sum / train_n;
  const double noised_pi = noised_sum / noised_n;
  gate.report(5, train_pi < kOdcTrainMax && noised_pi > kOdcNoisedMin, "ODC classifier separation",
              "mean pi: training inputs " + fmt("%.3f", train_pi) + ", noised at 3 sigma_x " + fmt("%.3f", noised_pi),
              seconds_since(t0));
}

void criterion_sweep(Gate& gate, const std::vector<std::string>& overrides, std::size_t& pool_reads) {
  const auto t0 = Clock::now();
  RunConfig cfg = toy_preset(overrides);
  cfg.experiment.kind = ModelKind::kBbbNcp;
  const Dataset ds = load_data(cfg.data);
  SweepGrid grid;
  grid.kinds = {NoiseKind::kGaussian, NoiseKind::kUniform};
  grid.sigma_x_sq = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<std::uint64_t> seeds(kSweepSeeds);
  std::iota(seeds.begin(), seeds.end(), 0);
  const std::vector<ModelKind> baselines = {ModelKind::kBbb};
  const SweepResult res = run_sweep(cfg.experiment, grid, seeds, ds, baselines, 1);
  pool_reads += res.pool_reads;

  bool complete = res.baselines.size() == 1 && res.baselines[0].errors.empty();
  const double bbb = aggregate(res.baselines[0].final_nlpd).mean;
  std::size_t wins = 0;
  for (const auto& c : res.cells) {
    complete = complete && c.errors.empty();
    wins += aggregate(c.final_nlpd).mean < bbb;
  }
  const double frac = static_cast<double>(wins) / res.cells.size();
  gate.report(6, complete && frac >= kSweepWinFraction, "noise robustness sweep",
              std::to_string(wins) + "/" + std::to_string(res.cells.size()) + " cells beat bbb (mean nlpd " +
                  fmt("%.3f", bbb) + ")",
              seconds_since(t0));
}

// ---------------------------------------------------------------- C7

void criterion_tabular(Gate& gate, const fs::path& scratch, std::size_t& pool_reads) {
  const auto t0 = Clock::now();
  RngStream gen = make_rng(707, 0);
  const Dataset synthetic = generate_tabular(kTabularRows, gen);
  const fs::path csv = scratch / "tabular.csv";
  write_csv(csv, synthetic);
  Dataset ds = load_csv(csv, CsvSchema{"delay", {"carrier", "weekday"}});
  split_tail(ds, 0.1);

  ExperimentConfig cfg;
  cfg.kind = ModelKind::kBbbNcp;
  cfg.hidden_widths = {50, 50};
  cfg.batch_size = 10;
  cfg.learning_rate = 1e-4;
  cfg.ncp.sigma_x_sq = 0.1;
  cfg.seed = 0;
  const ActiveLearningResult untrained = run_passive(cfg, ds, 0);
  const ActiveLearningResult trained = run_passive(cfg, ds, kTabularEpochs);
  pool_reads += untrained.label_access.pool_reads + trained.label_access.pool_reads;

  bool finite = true;
  for (const auto* run : {&untrained, &trained}) {
    for (const auto& r : run->records) {
      finite = finite && std::isfinite(r.rmse) && std::isfinite(r.nlpd) && std::isfinite(r.train_nll);
    }
  }
  const double before = untrained.records.back().nlpd;
  const double after = trained.records.back().nlpd;
  const double secs = seconds_since(t0);
  gate.report(7, ds.rows() == kTabularRows && ds.dims() == 8 && finite && after < before && secs < kTabularSeconds,
              "tabular CSV pipeline",
              std::to_string(ds.rows()) + " rows x " + std::to_string(ds.dims()) + " features; test nlpd " +
                  fmt("%.3f", before) + " untrained -> " + fmt("%.3f", after) + " after " +
                  std::to_string(kTabularEpochs) + " epochs",
              secs);
}

// ---------------------------------------------------------------- C8

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void criterion_determinism(Gate& gate, const fs::path& scratch) {
  const auto t0 = Clock::now();
  std::ostringstream sink;
  cli::CommandSpec first;
  first.subcommand = "active-learn";
  first.config_path = NCP_SOURCE_DIR "/configs/toy-active.cfg";
  first.output_dir = (scratch / "run_a").string();
  first.overrides = {"schedule.rounds = 4", "seed = 3"};
  const int rc_a = cli::run_command(first, sink, sink);

  cli::CommandSpec again;
  again.subcommand = "active-learn";
  again.manifest_path = (scratch / "run_a" / "manifest.json").string();
  again.output_dir = (scratch / "run_b").string();
  const int rc_b = cli::run_command(again, sink, sink);
  again.output_dir = (scratch / "run_c").string();
  const int rc_c = cli::run_command(again, sink, sink);

  const std::string a = slurp(scratch / "run_a" / "metrics.jsonl");
  const std::string b = slurp(scratch / "run_b" / "metrics.jsonl");
  const std::string c = slurp(scratch / "run_c" / "metrics.jsonl");
  const bool pass = rc_a == 0 && rc_b == 0 && rc_c == 0 && !a.empty() && a == b && b == c;
  gate.report(8, pass, "bit-identical reruns from a manifest",
              "3 runs, metrics.jsonl " + std::to_string(a.size()) + " bytes, " + (pass ? "identical" : "differ"),
              seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::vector<std::string> overrides;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else if (arg == "--set" && i + 1 < argc) {
      overrides.emplace_back(argv[++i]);
    } else {
      std::cerr << "usage: ncp_acceptance [--only 1,3,...] [--set key=value]...\n";
      return 2;
    }
  }
  const auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

  const fs::path scratch = fs::temp_directory_path() / ("ncp_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(scratch);
  Gate gate;
  std::size_t pool_reads = 0;
  std::size_t guarded_runs = 0;
  try {
    if (wanted(1)) criterion_gradients(gate);
    if (wanted(2)) criterion_monte_carlo(gate);
    if (wanted(3) || wanted(4) || wanted(5) || wanted(9)) {
      const ToyRuns toy = run_toy(overrides);
      for (const auto& r : toy.runs) pool_reads += r.result.label_access.pool_reads;
      guarded_runs += toy.runs.size();
      if (wanted(3)) criterion_toy_ordering(gate, toy);
      if (wanted(4)) criterion_gap(gate, toy);
      if (wanted(5)) criterion_odc(gate, toy);
    }
    if (wanted(6)) {
      criterion_sweep(gate, overrides, pool_reads);
      guarded_runs += 21 * kSweepSeeds;
    }
    if (wanted(7)) {
      criterion_tabular(gate, scratch, pool_reads);
      guarded_runs += 2;
    }
    if (wanted(8)) criterion_determinism(gate, scratch);
    if (wanted(9)) {
      gate.report(9, pool_reads == 0, "no pool-label leakage",
                  std::to_string(pool_reads) + " pool-label reads across " + std::to_string(guarded_runs) + " runs",
                  0.0);
    }
  } catch (const std::exception& e) {
    std::printf("FAIL  acceptance aborted: %s\n", e.what());
    ++gate.failures;
  }
  fs::remove_all(scratch);
  std::printf("%s: %d failing criteria\n", gate.failures ? "FAILED" : "PASSED", gate.failures);
  return gate.failures ? 1 : 0;
}
