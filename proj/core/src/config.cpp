#include "ncp/config.hpp"

#include <charconv>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>

#include "ncp/errors.hpp"

namespace ncp {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  if (trim(v).empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto comma = v.find(',', start);
    out.push_back(trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Thrown by value parsers; converted to ConfigError with location by the caller.
struct BadValue {
  std::string what;
};

double to_double(const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) throw BadValue{"expected a number, got '" + v + "'"};
  return out;
}

std::uint64_t to_u64(const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    throw BadValue{"expected a nonnegative integer, got '" + v + "'"};
  }
  return out;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw BadValue{"expected true or false, got '" + v + "'"};
}

Interval to_interval(const std::string& v) {
  const auto parts = split_list(v);
  if (parts.size() != 2) throw BadValue{"expected 'lo, hi', got '" + v + "'"};
  return {to_double(parts[0]), to_double(parts[1])};
}

template <typename T, typename F>
std::vector<T> to_list(const std::string& v, F convert) {
  std::vector<T> out;
  for (const auto& item : split_list(v)) out.push_back(convert(item));
  return out;
}

std::string num(double v) { return format_double(v); }

template <typename T, typename F>
std::string join(const std::vector<T>& items, F format) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += format(items[i]);
  }
  return out;
}

template <typename E, typename F>
E enum_value(const std::string& v, F parse) {
  try {
    return parse(v);
  } catch (const InvalidArgument& e) {
    throw BadValue{e.what()};
  }
}

struct Key {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Key>& keys() {
  using R = RunConfig;
  using S = const std::string&;
  auto str = [](const std::string& s) { return s; };
  static const std::vector<Key> table = {
      {"model.kind", [](R& c, S v) { c.experiment.kind = enum_value<ModelKind>(v, parse_model_kind); },
       [](const R& c) { return std::string(to_string(c.experiment.kind)); }},
      {"model.widths",
       [](R& c, S v) { c.experiment.hidden_widths = to_list<std::size_t>(v, [](S s) { return to_u64(s); }); },
       [](const R& c) { return join(c.experiment.hidden_widths, [](std::size_t w) { return std::to_string(w); }); }},
      {"model.leaky_slope", [](R& c, S v) { c.experiment.leaky_slope = to_double(v); },
       [](const R& c) { return num(c.experiment.leaky_slope); }},
      {"model.variance_floor", [](R& c, S v) { c.experiment.variance_floor = to_double(v); },
       [](const R& c) { return num(c.experiment.variance_floor); }},
      {"model.posterior_log_std", [](R& c, S v) { c.experiment.posterior_log_std = to_double(v); },
       [](const R& c) { return num(c.experiment.posterior_log_std); }},
      {"prior.sigma_w_sq", [](R& c, S v) { c.experiment.weight_prior.variance = to_double(v); },
       [](const R& c) { return num(c.experiment.weight_prior.variance); }},
      {"train.learning_rate", [](R& c, S v) { c.experiment.learning_rate = to_double(v); },
       [](const R& c) { return num(c.experiment.learning_rate); }},
      {"train.batch_size", [](R& c, S v) { c.experiment.batch_size = to_u64(v); },
       [](const R& c) { return std::to_string(c.experiment.batch_size); }},
      {"train.adam_beta1", [](R& c, S v) { c.experiment.adam.beta1 = to_double(v); },
       [](const R& c) { return num(c.experiment.adam.beta1); }},
      {"train.adam_beta2", [](R& c, S v) { c.experiment.adam.beta2 = to_double(v); },
       [](const R& c) { return num(c.experiment.adam.beta2); }},
      {"train.adam_epsilon", [](R& c, S v) { c.experiment.adam.epsilon = to_double(v); },
       [](const R& c) { return num(c.experiment.adam.epsilon); }},
      {"train.epochs", [](R& c, S v) { c.train_epochs = to_u64(v); },
       [](const R& c) { return std::to_string(c.train_epochs); }},
      {"ncp.noise", [](R& c, S v) { c.experiment.ncp.noise = enum_value<NoiseKind>(v, parse_noise_kind); },
       [](const R& c) { return std::string(to_string(c.experiment.ncp.noise)); }},
      {"ncp.sigma_x_sq", [](R& c, S v) { c.experiment.ncp.sigma_x_sq = to_double(v); },
       [](const R& c) { return num(c.experiment.ncp.sigma_x_sq); }},
      {"ncp.flip_probability", [](R& c, S v) { c.experiment.ncp.flip_probability = to_double(v); },
       [](const R& c) { return num(c.experiment.ncp.flip_probability); }},
      {"ncp.sigma_y_sq", [](R& c, S v) { c.experiment.ncp.sigma_y_sq = to_double(v); },
       [](const R& c) { return num(c.experiment.ncp.sigma_y_sq); }},
      {"ncp.sigma_mu_sq", [](R& c, S v) { c.experiment.ncp.sigma_mu_sq = to_double(v); },
       [](const R& c) { return num(c.experiment.ncp.sigma_mu_sq); }},
      {"ncp.mean_rule",
       [](R& c, S v) {
         if (v == "label") {
           c.experiment.ncp.mean_rule = MeanRule::kLabelPassthrough;
         } else if (v == "constant") {
           c.experiment.ncp.mean_rule = MeanRule::kConstant;
         } else {
           throw BadValue{"expected label or constant, got '" + v + "'"};
         }
       },
       [](const R& c) {
         return std::string(c.experiment.ncp.mean_rule == MeanRule::kLabelPassthrough ? "label" : "constant");
       }},
      {"ncp.mu_y", [](R& c, S v) { c.experiment.ncp.mu_y = to_double(v); },
       [](const R& c) { return num(c.experiment.ncp.mu_y); }},
      {"ncp.gamma", [](R& c, S v) { c.experiment.ncp.gamma = to_double(v); },
       [](const R& c) { return num(c.experiment.ncp.gamma); }},
      {"ncp.kl_direction",
       [](R& c, S v) {
         if (v == "forward") {
           c.experiment.ncp.kl_direction = KlDirection::kForward;
         } else if (v == "reverse") {
           c.experiment.ncp.kl_direction = KlDirection::kReverse;
         } else {
           throw BadValue{"expected forward or reverse, got '" + v + "'"};
         }
       },
       [](const R& c) {
         return std::string(c.experiment.ncp.kl_direction == KlDirection::kForward ? "forward" : "reverse");
       }},
      {"acquire.temperature", [](R& c, S v) { c.experiment.acquisition.temperature = to_double(v); },
       [](const R& c) { return num(c.experiment.acquisition.temperature); }},
      {"schedule.initial", [](R& c, S v) { c.experiment.schedule.initial_labels = to_u64(v); },
       [](const R& c) { return std::to_string(c.experiment.schedule.initial_labels); }},
      {"schedule.per_round",
       [](R& c, S v) {
         c.experiment.schedule.labels_per_round = to_u64(v);
         c.experiment.acquisition.batch_size = c.experiment.schedule.labels_per_round;
       },
       [](const R& c) { return std::to_string(c.experiment.schedule.labels_per_round); }},
      {"schedule.epochs_per_round", [](R& c, S v) { c.experiment.schedule.epochs_per_round = to_u64(v); },
       [](const R& c) { return std::to_string(c.experiment.schedule.epochs_per_round); }},
      {"schedule.rounds", [](R& c, S v) { c.experiment.schedule.rounds = to_u64(v); },
       [](const R& c) { return std::to_string(c.experiment.schedule.rounds); }},
      {"schedule.epoch_scale", [](R& c, S v) { c.experiment.schedule.epoch_scale = to_double(v); },
       [](const R& c) { return num(c.experiment.schedule.epoch_scale); }},
      {"schedule.eval_every", [](R& c, S v) { c.experiment.schedule.eval_every_epochs = to_u64(v); },
       [](const R& c) { return std::to_string(c.experiment.schedule.eval_every_epochs); }},
      {"schedule.round_budget_seconds", [](R& c, S v) { c.experiment.schedule.round_budget_seconds = to_double(v); },
       [](const R& c) { return num(c.experiment.schedule.round_budget_seconds); }},
      {"seed", [](R& c, S v) { c.experiment.seed = to_u64(v); },
       [](const R& c) { return std::to_string(c.experiment.seed); }},
      {"report.wall_clock", [](R& c, S v) { c.experiment.record_wall_clock = to_bool(v); },
       [](const R& c) { return std::string(c.experiment.record_wall_clock ? "true" : "false"); }},
      {"data.source",
       [](R& c, S v) {
         if (v != "toy" && v != "csv") throw BadValue{"expected toy or csv, got '" + v + "'"};
         c.data.source = v;
       },
       [](const R& c) { return c.data.source; }},
      {"data.path", [](R& c, S v) { c.data.path = v; }, [](const R& c) { return c.data.path; }},
      {"data.target", [](R& c, S v) { c.data.target = v; }, [](const R& c) { return c.data.target; }},
      {"data.categorical", [str](R& c, S v) { c.data.categorical = to_list<std::string>(v, str); },
       [str](const R& c) { return join(c.data.categorical, str); }},
      {"data.test_fraction", [](R& c, S v) { c.data.test_fraction = to_double(v); },
       [](const R& c) { return num(c.data.test_fraction); }},
      {"data.seed", [](R& c, S v) { c.data.seed = to_u64(v); }, [](const R& c) { return std::to_string(c.data.seed); }},
      {"toy.band_a", [](R& c, S v) { c.data.toy.band_a = to_interval(v); },
       [](const R& c) { return num(c.data.toy.band_a.lo) + ", " + num(c.data.toy.band_a.hi); }},
      {"toy.band_b", [](R& c, S v) { c.data.toy.band_b = to_interval(v); },
       [](const R& c) { return num(c.data.toy.band_b.lo) + ", " + num(c.data.toy.band_b.hi); }},
      {"toy.n_per_band", [](R& c, S v) { c.data.toy.n_per_band = to_u64(v); },
       [](const R& c) { return std::to_string(c.data.toy.n_per_band); }},
      {"toy.test_range", [](R& c, S v) { c.data.toy.test_range = to_interval(v); },
       [](const R& c) { return num(c.data.toy.test_range.lo) + ", " + num(c.data.toy.test_range.hi); }},
      {"toy.test_points", [](R& c, S v) { c.data.toy.test_points = to_u64(v); },
       [](const R& c) { return std::to_string(c.data.toy.test_points); }},
      {"toy.exclude_bands_from_test", [](R& c, S v) { c.data.toy.exclude_bands_from_test = to_bool(v); },
       [](const R& c) { return std::string(c.data.toy.exclude_bands_from_test ? "true" : "false"); }},
      {"toy.slope", [](R& c, S v) { c.data.toy.slope = to_double(v); },
       [](const R& c) { return num(c.data.toy.slope); }},
      {"toy.frequency", [](R& c, S v) { c.data.toy.frequency = to_double(v); },
       [](const R& c) { return num(c.data.toy.frequency); }},
      {"toy.noise_base", [](R& c, S v) { c.data.toy.noise_base = to_double(v); },
       [](const R& c) { return num(c.data.toy.noise_base); }},
      {"toy.noise_slope", [](R& c, S v) { c.data.toy.noise_slope = to_double(v); },
       [](const R& c) { return num(c.data.toy.noise_slope); }},
      {"toy.noise_origin", [](R& c, S v) { c.data.toy.noise_origin = to_double(v); },
       [](const R& c) { return num(c.data.toy.noise_origin); }},
      {"sweep.kinds",
       [](R& c, S v) { c.sweep.grid.kinds = to_list<NoiseKind>(v, [](S s) { return enum_value<NoiseKind>(s, parse_noise_kind); }); },
       [](const R& c) { return join(c.sweep.grid.kinds, [](NoiseKind k) { return std::string(to_string(k)); }); }},
      {"sweep.sigma_x_sq", [](R& c, S v) { c.sweep.grid.sigma_x_sq = to_list<double>(v, to_double); },
       [](const R& c) { return join(c.sweep.grid.sigma_x_sq, num); }},
      {"sweep.seeds", [](R& c, S v) { c.sweep.seeds = to_list<std::uint64_t>(v, to_u64); },
       [](const R& c) { return join(c.sweep.seeds, [](std::uint64_t s) { return std::to_string(s); }); }},
      {"sweep.baselines",
       [](R& c, S v) { c.sweep.baselines = to_list<ModelKind>(v, [](S s) { return enum_value<ModelKind>(s, parse_model_kind); }); },
       [](const R& c) { return join(c.sweep.baselines, [](ModelKind k) { return std::string(to_string(k)); }); }},
  };
  return table;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (k.name == name) return &k;
  }
  return nullptr;
}

void apply_line(RunConfig& cfg, std::string_view raw, const std::string& where,
                std::map<std::string, std::string>& seen) {
  std::string line(raw);
  if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
  line = trim(line);
  if (line.empty()) return;
  const auto eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
  const std::string key = trim(std::string_view(line).substr(0, eq));
  const std::string value = trim(std::string_view(line).substr(eq + 1));
  const Key* k = find_key(key);
  if (!k) throw ConfigError(where + ": unknown key '" + key + "'");
  if (auto it = seen.find(key); it != seen.end()) {
    cfg.warnings.push_back(where + ": duplicate key '" + key + "' overrides " + it->second);
  }
  seen[key] = where;
  try {
    k->set(cfg, value);
  } catch (const BadValue& e) {
    throw ConfigError(where + ": key '" + key + "': " + e.what);
  }
}

}  // namespace

RunConfig parse_config(std::string_view text, std::span<const std::string> overrides) {
  RunConfig cfg;
  std::map<std::string, std::string> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto nl = text.find('\n', start);
    const auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    ++line_no;
    apply_line(cfg, line, "line " + std::to_string(line_no), seen);
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  // Overrides replace file keys silently; only repeats among themselves warn.
  std::map<std::string, std::string> overridden;
  for (std::size_t i = 0; i < overrides.size(); ++i) {
    apply_line(cfg, overrides[i], "override '" + overrides[i] + "'", overridden);
  }
  return cfg;
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : keys()) out.push_back(k.name);
  return out;
}

Dataset load_data(const DataConfig& data) {
  if (data.source == "toy") {
    RngStream rng = make_rng(data.seed, 0);
    return generate_toy(data.toy, rng);
  }
  if (data.path.empty()) throw ConfigError("data.path is required when data.source = csv");
  Dataset ds = load_csv(data.path, CsvSchema{data.target, data.categorical});
  split_tail(ds, data.test_fraction);
  return ds;
}

}  // namespace ncp
