#include "ncp/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "ncp/errors.hpp"

namespace ncp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string number(double v) { return format_double(v); }

std::string json_number(double v) { return std::isfinite(v) ? number(v) : "null"; }

}  // namespace

std::size_t Schedule::scaled_epochs() const {
  return static_cast<std::size_t>(std::llround(static_cast<double>(epochs_per_round) * epoch_scale));
}

void ExperimentConfig::validate() const {
  if (hidden_widths.empty()) throw InvalidArgument("config: at least one hidden layer is required");
  for (auto w : hidden_widths) {
    if (w == 0) throw InvalidArgument("config: hidden widths must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw InvalidArgument("config: learning rate must be > 0");
  if (batch_size == 0) throw InvalidArgument("config: batch size must be >= 1");
  if (!(variance_floor > 0.0)) throw InvalidArgument("config: variance floor must be > 0");
  if (!(weight_prior.variance > 0.0)) throw InvalidArgument("config: weight prior variance must be > 0");
  if (schedule.initial_labels == 0 || schedule.labels_per_round == 0 || schedule.rounds == 0 ||
      schedule.epochs_per_round == 0) {
    throw InvalidArgument("config: schedule counts must be >= 1");
  }
  if (!(schedule.epoch_scale > 0.0)) throw InvalidArgument("config: epoch scale must be > 0");
  if (schedule.round_budget_seconds < 0.0) throw InvalidArgument("config: round budget must be >= 0");
  ncp.validate();
  acquisition.validate();
  if (acquisition.batch_size != schedule.labels_per_round) {
    throw InvalidArgument("config: acquisition batch size must equal labels per round");
  }
}

AdamHyper ExperimentConfig::adam_hyper() const {
  AdamHyper h = adam;
  h.learning_rate = learning_rate;
  return h;
}

LabelOracle::LabelOracle(const Dataset& source)
    : source_(&source),
      pool_(source.splits.pool.begin(), source.splits.pool.end()),
      visible_(source.splits.visible.begin(), source.splits.visible.end()),
      test_(source.splits.test.begin(), source.splits.test.end()) {}

double LabelOracle::read(std::size_t row) {
  ++reads_;
  rows_read_.insert(row);
  if (pool_.count(row)) ++pool_reads_;
  return source_->targets.at(row);
}

std::vector<double> LabelOracle::acquire(std::span<const std::size_t> rows) {
  std::vector<double> out;
  out.reserve(rows.size());
  for (auto r : rows) {
    if (pool_.erase(r) == 0) throw InvalidArgument("label oracle: row " + std::to_string(r) + " is not in the pool");
    visible_.insert(r);
    out.push_back(read(r));
  }
  return out;
}

TrainState make_train_state(const ExperimentConfig& cfg, std::size_t input_dim, RngStream& rng) {
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), cfg.hidden_widths.begin(), cfg.hidden_widths.end());
  TrainState st;
  st.model = make_model(cfg.kind, widths, rng, cfg.leaky_slope, cfg.variance_floor, cfg.posterior_log_std);
  st.network_opt = AdamState::zeros(st.model.network.values().size(), cfg.adam_hyper());
  if (st.model.posterior) st.posterior_opt = AdamState::zeros(st.model.posterior->values().size(), cfg.adam_hyper());
  return st;
}

EvalResult evaluate(const Model& model, const NcpConfig& ncp, const Dataset& ds, std::span<const std::size_t> split,
                    const Standardizer* standardizer) {
  if (split.empty()) throw InvalidArgument("evaluate: empty split");
  double sq = 0.0;
  double nll = 0.0;
  for (auto i : split) {
    const Prediction pred = predict(model, ds.features.row(i));
    Gaussian1D dist = predictive_distribution(pred, ncp);
    double y = ds.targets.at(i);
    if (standardizer) {
      dist = {standardizer->inverse_target(dist.mean), standardizer->inverse_variance(dist.variance)};
      y = standardizer->inverse_target(y);
    }
    sq += (dist.mean - y) * (dist.mean - y);
    nll -= normal_log_pdf(y, dist);
  }
  const double n = static_cast<double>(split.size());
  return {std::sqrt(sq / n), nll / n};
}

LossResult model_loss(const Model& model, const ExperimentConfig& cfg, const Batch& batch,
                      std::span<const ColumnSpec> columns, std::size_t dataset_size, RngStream& rng) {
  switch (model.kind) {
    case ModelKind::kDet:
      return det_loss(model.network, batch, model.variance_floor);
    case ModelKind::kBbb:
      return bbb_loss(model.network, *model.posterior, cfg.weight_prior, batch, dataset_size, rng,
                      model.variance_floor);
    case ModelKind::kBbbNcp: {
      const PerturbedBatch perturbed = perturb_inputs(batch.x, batch.y, cfg.ncp, columns, rng);
      return bbb_ncp_loss(model.network, *model.posterior, batch, perturbed, cfg.ncp, rng, model.variance_floor);
    }
    case ModelKind::kOdcNcp: {
      const PerturbedBatch perturbed = perturb_inputs(batch.x, batch.y, cfg.ncp, columns, rng);
      return odc_ncp_loss(model.network, batch, perturbed, cfg.ncp, model.variance_floor);
    }
  }
  throw InvalidArgument("model_loss: unknown model kind");
}

void train_epochs(TrainState& state, const Dataset& ds, std::size_t epochs, const ExperimentConfig& cfg,
                  RngStream& rng) {
  if (ds.splits.visible.empty()) throw InvalidArgument("train_epochs: visible set is empty");
  std::vector<std::size_t> order(ds.splits.visible);
  const std::size_t n = order.size();
  const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);
  Batch batch;
  for (std::size_t e = 0; e < epochs; ++e) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      batch.x = ds.features.select_rows(rows);
      batch.y.resize(rows.size());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        batch.y[k] = ds.targets[rows[k]];
        if (!std::isfinite(batch.y[k])) {
          throw NumericalError("train_epochs: row " + std::to_string(rows[k]) + " has no usable label");
        }
      }
      const LossResult loss = model_loss(state.model, cfg, batch, ds.columns, n, rng);
      if (!std::isfinite(loss.value)) throw NumericalError("train_epochs: non-finite loss");
      adam_step(state.model.network.values(), loss.grad_network, state.network_opt);
      if (state.model.posterior) adam_step(state.model.posterior->values(), loss.grad_posterior, state.posterior_opt);
    }
  }
}

namespace {

/// Standardized working copy: features of every row transformed, targets NaN
/// except for rows whose labels were obtained from the oracle.
struct WorkingSet {
  Dataset data;
  Standardizer standardizer;
};

WorkingSet make_working_set(const Dataset& ds, LabelOracle& oracle, std::span<const std::size_t> initial) {
  const std::vector<double> labels = oracle.acquire(initial);
  WorkingSet ws;
  ws.data = ds;
  ws.data.splits.visible.assign(initial.begin(), initial.end());
  std::vector<std::size_t> rest;
  for (auto i : ds.splits.pool) {
    if (std::find(initial.begin(), initial.end(), i) == initial.end()) rest.push_back(i);
  }
  ws.data.splits.pool = std::move(rest);

  // Inputs of pool rows are observable; only their labels are hidden.
  ws.standardizer = fit_standardizer(ds, ds.train_indices(), labels);
  std::fill(ws.data.targets.begin(), ws.data.targets.end(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t r = 0; r < ws.data.rows(); ++r) ws.standardizer.transform_features(ws.data.features.row(r));
  for (std::size_t k = 0; k < initial.size(); ++k) {
    ws.data.targets[initial[k]] = ws.standardizer.transform_target(labels[k]);
  }
  for (auto t : ds.splits.test) ws.data.targets[t] = ws.standardizer.transform_target(oracle.read(t));
  return ws;
}

MetricsRecord measure(const TrainState& st, const ExperimentConfig& cfg, const WorkingSet& ws, std::size_t round,
                      std::size_t epochs, std::size_t n_visible) {
  MetricsRecord rec;
  rec.round = round;
  rec.epochs = epochs;
  rec.n_visible = n_visible;
  if (!ws.data.splits.test.empty()) {
    const EvalResult test = evaluate(st.model, cfg.ncp, ws.data, ws.data.splits.test, &ws.standardizer);
    rec.rmse = test.rmse;
    rec.nlpd = test.nlpd;
  } else {
    rec.rmse = rec.nlpd = std::numeric_limits<double>::quiet_NaN();
  }
  rec.train_nll = evaluate(st.model, cfg.ncp, ws.data, ws.data.splits.visible, &ws.standardizer).nlpd;
  return rec;
}

void fill_access(ActiveLearningResult& result, const LabelOracle& oracle) {
  result.label_access.reads = oracle.reads();
  result.label_access.pool_reads = oracle.pool_reads();
  result.label_access.rows_read = oracle.rows_read();
}

/// Trains `epochs` epochs, emitting intermediate records every `eval_every` epochs.
void train_with_cadence(TrainState& st, const WorkingSet& ws, std::size_t epochs, const ExperimentConfig& cfg,
                        RngStream& rng, std::size_t round, std::size_t& epochs_total,
                        std::vector<MetricsRecord>& records) {
  const std::size_t every = cfg.schedule.eval_every_epochs;
  if (every == 0) {
    train_epochs(st, ws.data, epochs, cfg, rng);
    epochs_total += epochs;
    return;
  }
  std::size_t done = 0;
  while (done < epochs) {
    const std::size_t chunk = std::min(every, epochs - done);
    train_epochs(st, ws.data, chunk, cfg, rng);
    done += chunk;
    epochs_total += chunk;
    if (done < epochs) records.push_back(measure(st, cfg, ws, round, epochs_total, ws.data.splits.visible.size()));
  }
}

}  // namespace

ActiveLearningResult run_active_learning(const ExperimentConfig& cfg, const Dataset& ds) {
  cfg.validate();
  ds.validate();
  const Schedule& sched = cfg.schedule;
  const std::size_t needed = sched.initial_labels + sched.rounds * sched.labels_per_round;
  if (ds.splits.pool.size() < needed) {
    throw InvalidArgument("active learning: schedule needs " + std::to_string(needed) + " pool rows, pool has " +
                          std::to_string(ds.splits.pool.size()));
  }

  ActiveLearningResult result;
  result.initial_pool = ds.splits.pool;
  LabelOracle oracle(ds);
  RngStream split_rng = make_rng(cfg.seed, kStreamSplit);
  RngStream init_rng = make_rng(cfg.seed, kStreamInit);
  RngStream train_rng = make_rng(cfg.seed, kStreamTrain);
  RngStream acquire_rng = make_rng(cfg.seed, kStreamAcquire);

  std::vector<std::size_t> initial;
  for (auto k : sample_uniform(ds.splits.pool.size(), sched.initial_labels, split_rng)) {
    initial.push_back(ds.splits.pool[k]);
  }
  WorkingSet ws = make_working_set(ds, oracle, initial);
  ws.data.splits.seed = cfg.seed;
  TrainState st = make_train_state(cfg, ds.dims(), init_rng);

  std::size_t epochs_total = 0;
  std::vector<double> log_weights;
  for (std::size_t round = 1; round <= sched.rounds; ++round) {
    const auto start = Clock::now();
    train_with_cadence(st, ws, sched.scaled_epochs(), cfg, train_rng, round, epochs_total, result.records);
    MetricsRecord rec = measure(st, cfg, ws, round, epochs_total, 0);

    const auto& pool = ws.data.splits.pool;
    log_weights.resize(pool.size());
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const Prediction pred = predict(st.model, ws.data.features.row(pool[k]));
      log_weights[k] = log_information_gain_weight(pred, cfg.kind, cfg.acquisition.temperature, cfg.ncp.sigma_y_sq);
    }
    std::vector<std::size_t> rows;
    for (auto k : sample_acquisition_log(log_weights, cfg.acquisition, acquire_rng)) rows.push_back(pool[k]);
    const std::vector<double> labels = oracle.acquire(rows);
    for (std::size_t k = 0; k < rows.size(); ++k) ws.data.targets[rows[k]] = ws.standardizer.transform_target(labels[k]);
    ws.data.acquire(rows);
    result.acquired.insert(result.acquired.end(), rows.begin(), rows.end());

    const double elapsed = seconds_since(start);
    rec.n_visible = ws.data.splits.visible.size();
    rec.seconds = cfg.record_wall_clock ? elapsed : 0.0;
    result.records.push_back(rec);
    if (sched.round_budget_seconds > 0.0 && elapsed > sched.round_budget_seconds) {
      result.aborted = true;
      result.abort_reason = "round " + std::to_string(round) + " took " + number(elapsed) + " s, budget " +
                            number(sched.round_budget_seconds) + " s";
      break;
    }
  }

  result.model = std::move(st.model);
  result.standardizer = ws.standardizer;
  result.final_splits = ws.data.splits;
  fill_access(result, oracle);
  return result;
}

ActiveLearningResult run_passive(const ExperimentConfig& cfg, const Dataset& ds, std::size_t epochs) {
  cfg.validate();
  ds.validate();
  if (ds.splits.pool.empty() && ds.splits.visible.empty()) throw InvalidArgument("passive training: no train rows");

  ActiveLearningResult result;
  result.initial_pool = ds.splits.pool;
  LabelOracle oracle(ds);
  RngStream init_rng = make_rng(cfg.seed, kStreamInit);
  RngStream train_rng = make_rng(cfg.seed, kStreamTrain);

  const std::vector<std::size_t> all = ds.train_indices();
  Dataset base = ds;
  base.splits.pool = all;
  base.splits.visible.clear();
  WorkingSet ws = make_working_set(base, oracle, all);
  ws.data.splits.seed = cfg.seed;
  TrainState st = make_train_state(cfg, ds.dims(), init_rng);

  const std::size_t every = cfg.schedule.eval_every_epochs == 0 ? epochs : cfg.schedule.eval_every_epochs;
  std::size_t done = 0;
  std::size_t round = 0;
  if (epochs == 0) result.records.push_back(measure(st, cfg, ws, 0, 0, all.size()));
  while (done < epochs) {
    const auto start = Clock::now();
    const std::size_t chunk = std::min(every, epochs - done);
    train_epochs(st, ws.data, chunk, cfg, train_rng);
    done += chunk;
    MetricsRecord rec = measure(st, cfg, ws, ++round, done, all.size());
    const double elapsed = seconds_since(start);
    rec.seconds = cfg.record_wall_clock ? elapsed : 0.0;
    result.records.push_back(rec);
    if (cfg.schedule.round_budget_seconds > 0.0 && elapsed > cfg.schedule.round_budget_seconds) {
      result.aborted = true;
      result.abort_reason = "evaluation block " + std::to_string(round) + " exceeded its budget";
      break;
    }
  }
  result.model = std::move(st.model);
  result.standardizer = ws.standardizer;
  result.final_splits = ws.data.splits;
  fill_access(result, oracle);
  return result;
}

Aggregate aggregate(std::span<const double> values) {
  Aggregate a;
  a.n = values.size();
  if (values.empty()) {
    a.mean = a.std = std::numeric_limits<double>::quiet_NaN();
    return a;
  }
  a.mean = mean(values);
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - a.mean) * (v - a.mean);
    a.std = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return a;
}

SweepResult run_sweep(const ExperimentConfig& base, const SweepGrid& grid, std::span<const std::uint64_t> seeds,
                      const Dataset& ds, std::span<const ModelKind> baselines, std::size_t jobs) {
  if (grid.kinds.empty() || grid.sigma_x_sq.empty()) throw InvalidArgument("sweep: grid is empty");
  if (seeds.empty()) throw InvalidArgument("sweep: seed list is empty");

  SweepResult result;
  result.seeds.assign(seeds.begin(), seeds.end());
  for (auto kind : grid.kinds) {
    for (double s2 : grid.sigma_x_sq) {
      SweepCell cell;
      cell.noise = kind;
      cell.sigma_x_sq = s2;
      cell.seeds = result.seeds;
      result.cells.push_back(std::move(cell));
    }
  }
  for (auto kind : baselines) {
    BaselineCell cell;
    cell.kind = kind;
    cell.seeds = result.seeds;
    result.baselines.push_back(std::move(cell));
  }

  struct Task {
    ExperimentConfig cfg;
    std::size_t slot;
    bool baseline;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    for (auto seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.ncp.noise = result.cells[c].noise;
      cfg.ncp.sigma_x_sq = result.cells[c].sigma_x_sq;
      cfg.seed = seed;
      tasks.push_back({cfg, c, false});
    }
  }
  for (std::size_t b = 0; b < result.baselines.size(); ++b) {
    for (auto seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.kind = result.baselines[b].kind;
      cfg.seed = seed;
      tasks.push_back({cfg, b, true});
    }
  }

  struct Outcome {
    double rmse = 0.0;
    double nlpd = 0.0;
    std::size_t pool_reads = 0;
    std::string error;
  };
  std::vector<Outcome> outcomes(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      try {
        const ActiveLearningResult run = run_active_learning(tasks[t].cfg, ds);
        outcomes[t].pool_reads = run.label_access.pool_reads;
        if (run.aborted) {
          outcomes[t].error = "aborted: " + run.abort_reason;
        } else {
          outcomes[t].rmse = run.records.back().rmse;
          outcomes[t].nlpd = run.records.back().nlpd;
        }
      } catch (const std::exception& e) {
        outcomes[t].error = e.what();
      }
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, tasks.size());
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    result.pool_reads += outcomes[t].pool_reads;
    auto record = [&](auto& cell) {
      if (outcomes[t].error.empty()) {
        cell.final_rmse.push_back(outcomes[t].rmse);
        cell.final_nlpd.push_back(outcomes[t].nlpd);
      } else {
        cell.errors.push_back("seed " + std::to_string(tasks[t].cfg.seed) + ": " + outcomes[t].error);
      }
    };
    if (tasks[t].baseline) {
      record(result.baselines[tasks[t].slot]);
    } else {
      record(result.cells[tasks[t].slot]);
    }
  }
  result.runs = tasks.size();
  return result;
}

std::vector<PlotRow> plot_data(const Model& model, const NcpConfig& ncp, const Standardizer& standardizer,
                               std::span<const double> xs) {
  if (model.network.layout().input_dim() != 1) throw InvalidArgument("plot_data: model input is not 1-D");
  std::vector<PlotRow> rows;
  rows.reserve(xs.size());
  const double scale = standardizer.target_scale();
  for (double x : xs) {
    double z = x;
    standardizer.transform_features(std::span<double>(&z, 1));
    const Prediction pred = predict(model, std::span<const double>(&z, 1));
    const Gaussian1D dist = predictive_distribution(pred, ncp);
    PlotRow row;
    row.x = x;
    row.mean = standardizer.inverse_target(dist.mean);
    row.epistemic_std = std::sqrt(pred.epistemic_variance) * scale;
    row.aleatoric_std = std::sqrt(pred.aleatoric_variance) * scale;
    row.predictive_std = std::sqrt(dist.variance) * scale;
    row.ood_probability = pred.ood_probability;
    rows.push_back(row);
  }
  return rows;
}

void write_metrics_jsonl(std::ostream& out, std::span<const MetricsRecord> records) {
  for (const auto& r : records) {
    out << "{\"round\":" << r.round << ",\"epochs\":" << r.epochs << ",\"n_visible\":" << r.n_visible
        << ",\"rmse\":" << json_number(r.rmse) << ",\"nlpd\":" << json_number(r.nlpd)
        << ",\"train_nll\":" << json_number(r.train_nll) << ",\"seconds\":" << json_number(r.seconds) << "}\n";
  }
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsRecord> records) {
  out << "round,epochs,n_visible,rmse,nlpd,train_nll,seconds\n";
  for (const auto& r : records) {
    out << r.round << ',' << r.epochs << ',' << r.n_visible << ',' << number(r.rmse) << ',' << number(r.nlpd) << ','
        << number(r.train_nll) << ',' << number(r.seconds) << '\n';
  }
}

namespace {

std::string seed_list(std::span<const std::uint64_t> seeds) {
  std::string out;
  for (std::size_t i = 0; i < seeds.size(); ++i) out += (i ? " " : "") + std::to_string(seeds[i]);
  return out;
}

void write_aggregates(std::ostream& out, std::span<const double> rmse, std::span<const double> nlpd,
                      std::span<const std::uint64_t> seeds, std::size_t errors) {
  const Aggregate r = aggregate(rmse);
  const Aggregate n = aggregate(nlpd);
  out << seed_list(seeds) << ',' << r.n << ',' << errors << ',' << number(r.mean) << ',' << number(r.std) << ','
      << number(n.mean) << ',' << number(n.std) << '\n';
}

}  // namespace

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
  out << "noise_kind,sigma_x_sq,seeds,n_ok,n_failed,rmse_mean,rmse_std,nlpd_mean,nlpd_std\n";
  for (const auto& cell : result.cells) {
    out << to_string(cell.noise) << ',' << number(cell.sigma_x_sq) << ',';
    write_aggregates(out, cell.final_rmse, cell.final_nlpd, cell.seeds, cell.errors.size());
  }
}

void write_baselines_csv(std::ostream& out, const SweepResult& result) {
  out << "model,seeds,n_ok,n_failed,rmse_mean,rmse_std,nlpd_mean,nlpd_std\n";
  for (const auto& cell : result.baselines) {
    out << to_string(cell.kind) << ',';
    write_aggregates(out, cell.final_rmse, cell.final_nlpd, cell.seeds, cell.errors.size());
  }
}

void write_plot_csv(std::ostream& out, std::span<const PlotRow> rows) {
  out << "x,mean,epistemic_std,aleatoric_std,predictive_std,lower_2std,upper_2std,ood_probability\n";
  for (const auto& r : rows) {
    out << number(r.x) << ',' << number(r.mean) << ',' << number(r.epistemic_std) << ',' << number(r.aleatoric_std)
        << ',' << number(r.predictive_std) << ',' << number(r.mean - 2.0 * r.predictive_std) << ','
        << number(r.mean + 2.0 * r.predictive_std) << ',' << (r.ood_probability ? number(*r.ood_probability) : "")
        << '\n';
  }
}

}  // namespace ncp
