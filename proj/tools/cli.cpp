#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string_view>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ncp/config.hpp"
#include "ncp/data.hpp"
#include "ncp/errors.hpp"
#include "ncp/harness.hpp"
#include "ncp/models.hpp"

namespace ncp::cli {
namespace fs = std::filesystem;
namespace {

constexpr const char* kSubcommands[] = {"train", "active-learn", "sweep", "eval", "gen-toy"};

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

/// Config text plus overrides, or the snapshot stored in a manifest.
RunConfig load_config(const CommandSpec& spec) {
  std::string text;
  if (!spec.manifest_path.empty()) {
    try {
      const auto j = nlohmann::json::parse(read_file(spec.manifest_path));
      text = j.at("config").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("manifest '" + spec.manifest_path + "': " + e.what());
    }
  } else if (!spec.config_path.empty()) {
    text = read_file(spec.config_path);
  }
  std::vector<std::string> overrides = spec.overrides;
  if (spec.seed) overrides.push_back("seed = " + std::to_string(*spec.seed));
  RunConfig cfg = parse_config(text, overrides);
  try {
    cfg.experiment.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

void write_manifest(const fs::path& dir, const CommandSpec& spec, const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["artifact"] = "ncp";
  j["version"] = NCP_VERSION;
  j["subcommand"] = spec.subcommand;
  j["seed"] = cfg.experiment.seed;
  j["data_seed"] = cfg.data.seed;
  j["config"] = format_config(cfg);
  auto out = open_output(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

std::vector<double> plot_grid(const RunConfig& cfg, const Dataset& ds) {
  double lo = cfg.data.toy.test_range.lo;
  double hi = cfg.data.toy.test_range.hi;
  if (cfg.data.source != "toy") {
    lo = hi = ds.features(0, 0);
    for (std::size_t r = 0; r < ds.rows(); ++r) {
      lo = std::min(lo, ds.features(r, 0));
      hi = std::max(hi, ds.features(r, 0));
    }
  }
  constexpr std::size_t kPoints = 400;
  std::vector<double> xs(kPoints);
  for (std::size_t i = 0; i < kPoints; ++i) xs[i] = lo + (hi - lo) * static_cast<double>(i) / (kPoints - 1);
  return xs;
}

void write_run_outputs(const fs::path& dir, const RunConfig& cfg, const Dataset& ds,
                       const ActiveLearningResult& result) {
  {
    auto out = open_output(dir / "metrics.jsonl");
    write_metrics_jsonl(out, result.records);
  }
  {
    auto out = open_output(dir / "metrics.csv");
    write_metrics_csv(out, result.records);
  }
  {
    auto out = open_output(dir / "checkpoint.json");
    write_checkpoint(out, Checkpoint{result.model, cfg.experiment.ncp, result.standardizer});
  }
  {
    auto out = open_output(dir / "splits.json");
    out << splits_to_json(result.final_splits) << '\n';
  }
  if (ds.dims() == 1) {
    const auto rows = plot_data(result.model, cfg.experiment.ncp, result.standardizer, plot_grid(cfg, ds));
    auto out = open_output(dir / ("plotdata_" + std::string(to_string(result.model.kind)) + ".csv"));
    write_plot_csv(out, rows);
  }
}

int finish_run(const ActiveLearningResult& result, std::ostream& out, std::ostream& err) {
  if (result.aborted) {
    err << "ncp: runtime budget exceeded (" << result.abort_reason << "); partial results written\n";
    return kBudget;
  }
  if (!result.records.empty()) {
    const auto& last = result.records.back();
    out << "final: n_visible=" << last.n_visible << " rmse=" << last.rmse << " nlpd=" << last.nlpd << '\n';
  }
  return kOk;
}

int run_checked(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  const fs::path dir = spec.output_dir;
  fs::create_directories(dir);
  const RunConfig cfg = load_config(spec);
  for (const auto& w : cfg.warnings) err << "ncp: warning: " << w << '\n';

  if (spec.subcommand == "gen-toy") {
    if (cfg.data.source != "toy") throw ConfigError("gen-toy requires data.source = toy");
    RunConfig toy_cfg = cfg;
    if (spec.seed) toy_cfg.data.seed = *spec.seed;
    const Dataset ds = load_data(toy_cfg.data);
    write_csv(dir / "toy.csv", ds);
    auto splits = open_output(dir / "splits.json");
    splits << splits_to_json(ds.splits) << '\n';
    write_manifest(dir, spec, toy_cfg);
    out << "wrote " << ds.rows() << " rows to " << (dir / "toy.csv").string() << '\n';
    return kOk;
  }

  if (spec.subcommand == "eval") {
    if (spec.checkpoint_path.empty()) throw ConfigError("eval requires --checkpoint");
    std::ifstream in(spec.checkpoint_path);
    if (!in) throw ParseError("cannot read checkpoint '" + spec.checkpoint_path + "'");
    const Checkpoint ckpt = read_checkpoint(in);
    if (!ckpt.standardizer) throw ParseError("checkpoint has no standardizer");
    const Dataset raw = load_data(cfg.data);
    if (raw.splits.test.empty()) throw SchemaError("dataset has no test rows");
    const Dataset ds = apply_standardizer(raw, *ckpt.standardizer);
    const EvalResult res = evaluate(ckpt.model, ckpt.ncp, ds, ds.splits.test, &*ckpt.standardizer);
    nlohmann::ordered_json j;
    j["checkpoint"] = spec.checkpoint_path;
    j["n_test"] = ds.splits.test.size();
    j["rmse"] = res.rmse;
    j["nlpd"] = res.nlpd;
    auto o = open_output(dir / "eval.json");
    o << j.dump(2) << '\n';
    write_manifest(dir, spec, cfg);
    out << "eval: rmse=" << res.rmse << " nlpd=" << res.nlpd << '\n';
    return kOk;
  }

  const Dataset ds = load_data(cfg.data);
  write_manifest(dir, spec, cfg);

  if (spec.subcommand == "train") {
    const ActiveLearningResult result = run_passive(cfg.experiment, ds, cfg.train_epochs);
    write_run_outputs(dir, cfg, ds, result);
    return finish_run(result, out, err);
  }
  if (spec.subcommand == "active-learn") {
    const ActiveLearningResult result = run_active_learning(cfg.experiment, ds);
    write_run_outputs(dir, cfg, ds, result);
    return finish_run(result, out, err);
  }
  if (spec.subcommand == "sweep") {
    const SweepResult result =
        run_sweep(cfg.experiment, cfg.sweep.grid, cfg.sweep.seeds, ds, cfg.sweep.baselines, spec.jobs);
    {
      auto o = open_output(dir / "sweep.csv");
      write_sweep_csv(o, result);
    }
    {
      auto o = open_output(dir / "sweep_baselines.csv");
      write_baselines_csv(o, result);
    }
    std::size_t failures = 0;
    bool budget = false;
    for (const auto& c : result.cells) {
      failures += c.errors.size();
      for (const auto& e : c.errors) budget = budget || e.find("aborted") != std::string::npos;
    }
    for (const auto& c : result.baselines) failures += c.errors.size();
    out << "sweep: " << result.runs << " runs, " << result.cells.size() << " cells, " << failures << " failed\n";
    if (budget) {
      err << "ncp: runtime budget exceeded in at least one sweep run; partial results written\n";
      return kBudget;
    }
    return kOk;
  }
  throw std::runtime_error("unknown subcommand '" + spec.subcommand + "'");
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

}  // namespace

int run_command(const CommandSpec& spec, std::ostream& out, std::ostream& err) {
  bool known = false;
  for (const char* s : kSubcommands) known = known || spec.subcommand == s;
  if (!known) {
    err << "ncp: unknown subcommand '" << spec.subcommand
        << "'\nusage: ncp {train|active-learn|sweep|eval|gen-toy} [--config FILE] [--out DIR] [--seed N] "
           "[--set key=value]... [--manifest FILE] [--checkpoint FILE] [--jobs N]\n";
    return kOther;
  }
  try {
    return run_checked(spec, out, err);
  } catch (const ConfigError& e) {
    err << "ncp: config error: " << one_line(e.what()) << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    err << "ncp: data error: " << one_line(e.what()) << '\n';
    return kData;
  } catch (const SchemaError& e) {
    err << "ncp: data error: " << one_line(e.what()) << '\n';
    return kData;
  } catch (const BudgetExceeded& e) {
    err << "ncp: runtime budget exceeded: " << one_line(e.what()) << '\n';
    return kBudget;
  } catch (const std::exception& e) {
    err << "ncp: error: " << one_line(e.what()) << '\n';
    return kOther;
  }
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Noise contrastive priors: training, active learning and sweeps"};
  app.require_subcommand(1);
  CommandSpec spec;
  std::uint64_t seed = 0;

  for (const char* name : kSubcommands) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("-c,--config", spec.config_path, "Config file (dotted.key = value lines)");
    sub->add_option("-o,--out", spec.output_dir, "Output directory");
    sub->add_option("--seed", seed, "Seed override");
    sub->add_option("--set", spec.overrides, "Config override key=value (repeatable)");
    sub->add_option("--manifest", spec.manifest_path, "Re-run the configuration stored in a manifest.json");
    if (std::string(name) == "eval") sub->add_option("--checkpoint", spec.checkpoint_path, "Checkpoint to evaluate");
    if (std::string(name) == "sweep") sub->add_option("--jobs", spec.jobs, "Concurrent sweep runs");
  }

  if (argc > 1 && argv[1][0] != '-' &&
      std::find(std::begin(kSubcommands), std::end(kSubcommands), std::string_view(argv[1])) == std::end(kSubcommands)) {
    err << "ncp: unknown subcommand '" << argv[1] << "'\n" << app.help();
    return kOther;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "ncp: " << e.what() << '\n' << app.help();
    return kOther;
  }
  for (auto* sub : app.get_subcommands()) spec.subcommand = sub->get_name();
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) spec.seed = seed;
  }
  return run_command(spec, out, err);
}

}  // namespace ncp::cli
