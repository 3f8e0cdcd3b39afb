#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ncp/acquisition.hpp"
#include "ncp/data.hpp"
#include "ncp/math.hpp"
#include "ncp/models.hpp"
#include "ncp/priors.hpp"
#include "ncp/rng.hpp"

namespace ncp {

struct Schedule {
  std::size_t initial_labels = 10;
  std::size_t labels_per_round = 1;
  std::size_t epochs_per_round = 200;
  std::size_t rounds = 20;
  /// Multiplies epochs_per_round; 5.0 with the desk default recovers 1000 epochs per round.
  double epoch_scale = 1.0;
  /// Extra evaluations every this many epochs inside a round; 0 evaluates once per round.
  std::size_t eval_every_epochs = 0;
  /// Wall-clock limit per round in seconds; 0 disables the guard.
  double round_budget_seconds = 0.0;

  std::size_t scaled_epochs() const;
};

struct ExperimentConfig {
  ModelKind kind = ModelKind::kBbbNcp;
  std::vector<std::size_t> hidden_widths = {64, 64};
  double learning_rate = 3e-3;
  std::size_t batch_size = 10;
  double leaky_slope = kDefaultLeakySlope;
  double variance_floor = kDefaultVarianceFloor;
  double posterior_log_std = kDefaultPosteriorLogStd;
  WeightPrior weight_prior;
  AdamHyper adam;
  NcpConfig ncp;
  AcquisitionConfig acquisition;
  Schedule schedule;
  std::uint64_t seed = 0;
  /// Write measured wall-clock seconds into metrics; off keeps metrics byte-reproducible.
  bool record_wall_clock = false;

  /// Throws InvalidArgument when a count is zero or a rate is nonpositive.
  void validate() const;
  AdamHyper adam_hyper() const;
};

/// RNG stream ids derived from the experiment seed.
enum StreamId : std::uint64_t {
  kStreamInit = 1,
  kStreamSplit = 2,
  kStreamTrain = 3,
  kStreamAcquire = 4,
};

struct MetricsRecord {
  std::size_t round = 0;
  std::size_t epochs = 0;
  std::size_t n_visible = 0;
  double rmse = 0.0;
  double nlpd = 0.0;
  double train_nll = 0.0;
  double seconds = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

/// Gatekeeper for label values during active learning. Pool labels may only be
/// read through acquire(); any other read of a pool row is counted as a leak.
class LabelOracle {
public:
  explicit LabelOracle(const Dataset& source);

  /// Label of a test or visible row.
  double read(std::size_t row);
  /// Moves rows from the pool to the visible set and returns their labels.
  std::vector<double> acquire(std::span<const std::size_t> rows);

  std::size_t reads() const { return reads_; }
  std::size_t pool_reads() const { return pool_reads_; }
  const std::set<std::size_t>& rows_read() const { return rows_read_; }
  const std::set<std::size_t>& visible() const { return visible_; }

private:
  const Dataset* source_;
  std::set<std::size_t> pool_;
  std::set<std::size_t> visible_;
  std::set<std::size_t> test_;
  std::set<std::size_t> rows_read_;
  std::size_t reads_ = 0;
  std::size_t pool_reads_ = 0;
};

struct TrainState {
  Model model;
  AdamState network_opt;
  AdamState posterior_opt;
};

TrainState make_train_state(const ExperimentConfig& cfg, std::size_t input_dim, RngStream& rng);

struct EvalResult {
  double rmse = 0.0;
  double nlpd = 0.0;
};

/// RMSE of the predictive mean and mean NLPD over `split`. `ds` holds
/// standardized features and targets; with a standardizer both metrics are
/// reported in original target units.
EvalResult evaluate(const Model& model, const NcpConfig& ncp, const Dataset& ds, std::span<const std::size_t> split,
                    const Standardizer* standardizer = nullptr);

/// Shuffled minibatch training over ds.splits.visible. NCP kinds draw a fresh
/// perturbed copy of every minibatch; Bayesian kinds draw one weight sample per step.
void train_epochs(TrainState& state, const Dataset& ds, std::size_t epochs, const ExperimentConfig& cfg,
                  RngStream& rng);

/// Loss of the configured kind on one batch, for callers that need the value without training.
LossResult model_loss(const Model& model, const ExperimentConfig& cfg, const Batch& batch,
                      std::span<const ColumnSpec> columns, std::size_t dataset_size, RngStream& rng);

struct LabelAccessStats {
  std::size_t reads = 0;
  std::size_t pool_reads = 0;
  std::set<std::size_t> rows_read;
};

struct ActiveLearningResult {
  std::vector<MetricsRecord> records;
  /// Set when the round budget guard stopped the run early.
  bool aborted = false;
  std::string abort_reason;
  Model model;
  Standardizer standardizer;
  Splits final_splits;
  /// Rows acquired after the initial draw, in acquisition order.
  std::vector<std::size_t> acquired;
  std::vector<std::size_t> initial_pool;
  LabelAccessStats label_access;
};

/// Full active-learning protocol on a raw (unstandardized) dataset whose
/// splits define the test rows and the acquirable pool.
ActiveLearningResult run_active_learning(const ExperimentConfig& cfg, const Dataset& ds);

/// Passive training on every train row: same metrics layout, one record per
/// `schedule.eval_every_epochs` epochs (or a single final record).
ActiveLearningResult run_passive(const ExperimentConfig& cfg, const Dataset& ds, std::size_t epochs);

struct SweepGrid {
  std::vector<NoiseKind> kinds = {NoiseKind::kGaussian, NoiseKind::kUniform};
  std::vector<double> sigma_x_sq = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
};

struct SweepCell {
  NoiseKind noise = NoiseKind::kGaussian;
  double sigma_x_sq = 0.0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_rmse;
  std::vector<double> final_nlpd;
  std::vector<std::string> errors;
};

struct BaselineCell {
  ModelKind kind = ModelKind::kBbb;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_rmse;
  std::vector<double> final_nlpd;
  std::vector<std::string> errors;
};

struct SweepResult {
  std::vector<std::uint64_t> seeds;
  std::vector<SweepCell> cells;
  std::vector<BaselineCell> baselines;
  std::size_t runs = 0;
  /// Pool-label reads outside acquisition, summed over every run.
  std::size_t pool_reads = 0;
};

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;
  std::size_t n = 0;
};
/// Mean and sample standard deviation (n - 1 denominator; 0 for a single value).
Aggregate aggregate(std::span<const double> values);

/// Runs `base` for every (noise kind, sigma_x^2, seed) and each baseline kind
/// for every seed, on up to `jobs` threads. Per-run failures are recorded in
/// the cell, never thrown.
SweepResult run_sweep(const ExperimentConfig& base, const SweepGrid& grid, std::span<const std::uint64_t> seeds,
                      const Dataset& ds, std::span<const ModelKind> baselines = {}, std::size_t jobs = 1);

struct PlotRow {
  double x = 0.0;
  double mean = 0.0;
  double epistemic_std = 0.0;
  double aleatoric_std = 0.0;
  double predictive_std = 0.0;
  /// pi(x) for ODC, empty otherwise.
  std::optional<double> ood_probability;
};

/// Decomposed predictions over raw 1-D inputs, in original target units.
std::vector<PlotRow> plot_data(const Model& model, const NcpConfig& ncp, const Standardizer& standardizer,
                               std::span<const double> xs);

void write_metrics_jsonl(std::ostream& out, std::span<const MetricsRecord> records);
void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records);
void write_sweep_csv(std::ostream& out, const SweepResult& result);
void write_baselines_csv(std::ostream& out, const SweepResult& result);
void write_plot_csv(std::ostream& out, std::span<const PlotRow> rows);

}  // namespace ncp
