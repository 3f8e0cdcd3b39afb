#include "ncp/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ncp/errors.hpp"

namespace ncp {

std::vector<std::size_t> Dataset::train_indices() const {
  std::vector<std::size_t> out(splits.visible);
  out.insert(out.end(), splits.pool.begin(), splits.pool.end());
  std::sort(out.begin(), out.end());
  return out;
}

void Dataset::acquire(std::span<const std::size_t> pool_indices) {
  std::set<std::size_t> requested;
  for (auto i : pool_indices) {
    if (!requested.insert(i).second) throw InvalidArgument("acquire: repeated index " + std::to_string(i));
  }
  std::vector<std::size_t> remaining;
  remaining.reserve(splits.pool.size());
  std::size_t moved = 0;
  for (auto i : splits.pool) {
    if (requested.count(i)) {
      ++moved;
    } else {
      remaining.push_back(i);
    }
  }
  if (moved != requested.size()) throw InvalidArgument("acquire: index not in pool");
  splits.pool = std::move(remaining);
  splits.visible.insert(splits.visible.end(), pool_indices.begin(), pool_indices.end());
}

void Dataset::validate() const {
  if (targets.size() != features.rows()) throw InvalidArgument("dataset: target length differs from row count");
  if (columns.size() != features.cols()) throw InvalidArgument("dataset: schema width differs from feature width");
  std::vector<int> owner(rows(), -1);
  auto mark = [&](const std::vector<std::size_t>& idx, int tag, const char* name) {
    for (auto i : idx) {
      if (i >= rows()) throw InvalidArgument(std::string("dataset: ") + name + " index out of range");
      if (owner[i] != -1) throw InvalidArgument(std::string("dataset: ") + name + " overlaps another split");
      owner[i] = tag;
    }
  };
  mark(splits.test, 0, "test");
  mark(splits.visible, 1, "visible");
  mark(splits.pool, 2, "pool");
}

double ToyConfig::mean_function(double x) const { return slope * x + std::sin(frequency * x); }

double ToyConfig::noise_std(double x) const {
  return noise_base + noise_slope * std::max(x - noise_origin, 0.0);
}

Dataset generate_toy(const ToyConfig& cfg, RngStream& rng) {
  for (const auto& band : {cfg.band_a, cfg.band_b}) {
    if (!(band.hi > band.lo)) throw InvalidArgument("generate_toy: empty band interval");
  }
  if (cfg.band_a.hi >= cfg.band_b.lo && cfg.band_b.hi >= cfg.band_a.lo) {
    throw InvalidArgument("generate_toy: bands overlap");
  }
  if (cfg.n_per_band == 0 || cfg.test_points == 0) throw InvalidArgument("generate_toy: counts must be >= 1");
  if (!(cfg.test_range.hi > cfg.test_range.lo)) throw InvalidArgument("generate_toy: empty test range");

  std::vector<double> xs;
  for (const auto& band : {cfg.band_a, cfg.band_b}) {
    for (std::size_t i = 0; i < cfg.n_per_band; ++i) xs.push_back(rng.uniform(band.lo, band.hi));
  }
  const std::size_t n_train = xs.size();
  for (std::size_t i = 0; i < cfg.test_points; ++i) {
    const double t = cfg.test_points == 1 ? 0.5 : static_cast<double>(i) / (cfg.test_points - 1);
    const double x = cfg.test_range.lo + t * (cfg.test_range.hi - cfg.test_range.lo);
    if (cfg.exclude_bands_from_test && (cfg.band_a.contains(x) || cfg.band_b.contains(x))) continue;
    xs.push_back(x);
  }

  Dataset ds;
  ds.features = Matrix(xs.size(), 1);
  ds.targets.resize(xs.size());
  ds.columns = {ColumnSpec{"x", ColumnKind::kContinuous, {}}};
  ds.target_name = "y";
  ds.target_position = 1;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ds.features(i, 0) = xs[i];
    ds.targets[i] = cfg.mean_function(xs[i]) + cfg.noise_std(xs[i]) * rng.normal();
  }
  for (std::size_t i = 0; i < n_train; ++i) ds.splits.pool.push_back(i);
  for (std::size_t i = n_train; i < xs.size(); ++i) ds.splits.test.push_back(i);
  ds.splits.seed = rng.seed();
  return ds;
}

Dataset generate_tabular(std::size_t n_rows, RngStream& rng) {
  static const std::vector<std::string> carriers = {"AA", "DL", "UA", "WN", "B6"};
  static const std::vector<std::string> weekdays = {"Mon", "Tue", "Wed", "Thu", "Fri", "Sat", "Sun"};
  static const double carrier_effect[] = {4.0, -2.0, 6.0, -5.0, 1.0};
  static const double weekday_effect[] = {1.0, -1.0, 0.0, 2.0, 5.0, -3.0, -4.0};

  Dataset ds;
  ds.features = Matrix(n_rows, 8);
  ds.targets.resize(n_rows);
  for (int c = 1; c <= 6; ++c) ds.columns.push_back({"x" + std::to_string(c), ColumnKind::kContinuous, {}});
  ds.columns.push_back({"carrier", ColumnKind::kCategorical, carriers});
  ds.columns.push_back({"weekday", ColumnKind::kCategorical, weekdays});
  ds.target_name = "delay";
  ds.target_position = 8;

  for (std::size_t r = 0; r < n_rows; ++r) {
    const double distance = rng.normal();
    const double hour = rng.uniform(0.0, 24.0);
    const double load = rng.uniform();
    const double age = rng.normal(5.0, 2.0);
    const double wind = rng.uniform(-1.0, 1.0);
    const double weather = rng.normal();
    const auto carrier = rng.index(carriers.size());
    const auto weekday = rng.index(weekdays.size());
    const double row[] = {distance, hour, load, age, wind, weather,
                          static_cast<double>(carrier), static_cast<double>(weekday)};
    std::copy(std::begin(row), std::end(row), ds.features.row(r).begin());
    const double signal = 8.0 * std::sin(hour * std::numbers::pi / 12.0) + 5.0 * distance +
                          6.0 * load * load - 0.5 * age + 3.0 * wind * weather +
                          carrier_effect[carrier] + weekday_effect[weekday];
    const double noise = 2.0 + 4.0 * std::abs(weather) + 3.0 * load;
    ds.targets[r] = 10.0 + signal + noise * rng.normal();
  }
  for (std::size_t r = 0; r < n_rows; ++r) ds.splits.pool.push_back(r);
  ds.splits.seed = rng.seed();
  return ds;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

Dataset read_csv(std::istream& in, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw ParseError("csv: empty file (no header row)");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = split_fields(line);
  for (auto& h : header) h = trim(h);

  const auto target_it = std::find(header.begin(), header.end(), schema.target);
  if (target_it == header.end()) throw SchemaError("csv: missing target column '" + schema.target + "'");
  for (const auto& c : schema.categorical) {
    if (std::find(header.begin(), header.end(), c) == header.end()) {
      throw SchemaError("csv: declared categorical column '" + c + "' not in header");
    }
    if (c == schema.target) throw SchemaError("csv: target column cannot be categorical");
  }
  const auto target_pos = static_cast<std::size_t>(target_it - header.begin());

  Dataset ds;
  ds.target_name = schema.target;
  ds.target_position = target_pos;
  std::vector<std::size_t> feature_pos;
  std::vector<std::map<std::string, std::size_t>> dictionaries;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == target_pos) continue;
    const bool categorical =
        std::find(schema.categorical.begin(), schema.categorical.end(), header[c]) != schema.categorical.end();
    ds.columns.push_back({header[c], categorical ? ColumnKind::kCategorical : ColumnKind::kContinuous, {}});
    feature_pos.push_back(c);
  }
  dictionaries.resize(ds.columns.size());

  std::vector<double> values;
  std::vector<double> targets;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("csv: row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                       " fields, header has " + std::to_string(header.size()));
    }
    auto parse_number = [&](std::size_t c) {
      const std::string cell = trim(fields[c]);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError("csv: row " + std::to_string(row) + ", column '" + header[c] +
                         "': cannot parse '" + cell + "' as a number");
      }
      return v;
    };
    for (std::size_t j = 0; j < feature_pos.size(); ++j) {
      const std::size_t c = feature_pos[j];
      if (ds.columns[j].kind == ColumnKind::kCategorical) {
        const std::string cell = trim(fields[c]);
        auto [it, inserted] = dictionaries[j].try_emplace(cell, ds.columns[j].categories.size());
        if (inserted) ds.columns[j].categories.push_back(cell);
        values.push_back(static_cast<double>(it->second));
      } else {
        values.push_back(parse_number(c));
      }
    }
    targets.push_back(parse_number(target_pos));
  }
  if (row == 0) throw ParseError("csv: no data rows");

  ds.features = Matrix(row, feature_pos.size());
  std::copy(values.begin(), values.end(), ds.features.data().begin());
  ds.targets = std::move(targets);
  for (std::size_t r = 0; r < row; ++r) ds.splits.pool.push_back(r);
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError("csv: cannot open '" + path.string() + "'");
  return read_csv(in, schema);
}

void write_csv(std::ostream& out, const Dataset& ds) {
  const std::size_t width = ds.dims() + 1;
  const std::size_t target_pos = std::min(ds.target_position, ds.dims());
  for (std::size_t c = 0; c < width; ++c) {
    if (c) out << ',';
    out << (c == target_pos ? ds.target_name : ds.columns[c < target_pos ? c : c - 1].name);
  }
  out << '\n';
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      if (c) out << ',';
      if (c == target_pos) {
        out << format_double(ds.targets[r]);
        continue;
      }
      const std::size_t j = c < target_pos ? c : c - 1;
      const double v = ds.features(r, j);
      if (ds.columns[j].kind == ColumnKind::kCategorical) {
        out << ds.columns[j].categories.at(static_cast<std::size_t>(v));
      } else {
        out << format_double(v);
      }
    }
    out << '\n';
  }
}

void write_csv(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream out(path);
  if (!out) throw ParseError("csv: cannot write '" + path.string() + "'");
  write_csv(out, ds);
}

void split_tail(Dataset& ds, double test_fraction) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw InvalidArgument("split_tail: fraction outside [0, 1)");
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(ds.rows())));
  ds.splits = Splits{};
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    (r + n_test >= ds.rows() ? ds.splits.test : ds.splits.pool).push_back(r);
  }
}

Standardizer::Standardizer(Vector feature_mean, Vector feature_scale, std::vector<ColumnKind> kinds,
                           double target_mean, double target_scale)
    : feature_mean_(std::move(feature_mean)),
      feature_scale_(std::move(feature_scale)),
      kinds_(std::move(kinds)),
      target_mean_(target_mean),
      target_scale_(std::max(target_scale, kMinScale)) {
  for (auto& s : feature_scale_) s = std::max(s, kMinScale);
}

void Standardizer::transform_features(std::span<double> row) const {
  if (row.size() != feature_mean_.size()) throw InvalidArgument("standardizer: row width mismatch");
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (kinds_[j] == ColumnKind::kContinuous) row[j] = (row[j] - feature_mean_[j]) / feature_scale_[j];
  }
}

Standardizer fit_standardizer(const Dataset& ds, std::span<const std::size_t> feature_fit,
                              std::span<const double> target_values) {
  if (feature_fit.empty() || target_values.empty()) throw InvalidArgument("standardize: empty fit set");
  const std::size_t d = ds.dims();
  Vector mu(d, 0.0);
  Vector scale(d, 1.0);
  std::vector<ColumnKind> kinds(d);
  Vector column(feature_fit.size());
  for (std::size_t j = 0; j < d; ++j) {
    kinds[j] = ds.columns[j].kind;
    if (kinds[j] != ColumnKind::kContinuous) {
      mu[j] = 0.0;
      scale[j] = 1.0;
      continue;
    }
    for (std::size_t k = 0; k < feature_fit.size(); ++k) column[k] = ds.features(feature_fit[k], j);
    mu[j] = mean(column);
    scale[j] = stddev(column);
  }
  return Standardizer(std::move(mu), std::move(scale), std::move(kinds), mean(target_values),
                      stddev(target_values));
}

Dataset apply_standardizer(const Dataset& ds, const Standardizer& s) {
  Dataset out = ds;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    s.transform_features(out.features.row(r));
    out.targets[r] = s.transform_target(out.targets[r]);
  }
  return out;
}

std::pair<Dataset, Standardizer> standardize(const Dataset& ds, std::span<const std::size_t> fit_on) {
  Vector y;
  y.reserve(fit_on.size());
  for (auto i : fit_on) y.push_back(ds.targets.at(i));
  Standardizer s = fit_standardizer(ds, fit_on, y);
  return {apply_standardizer(ds, s), s};
}

std::string splits_to_json(const Splits& splits) {
  nlohmann::json j;
  j["test"] = splits.test;
  j["visible"] = splits.visible;
  j["pool"] = splits.pool;
  j["seed"] = splits.seed ? nlohmann::json(*splits.seed) : nlohmann::json(nullptr);
  return j.dump();
}

Splits splits_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Splits s;
    s.test = j.at("test").get<std::vector<std::size_t>>();
    s.visible = j.at("visible").get<std::vector<std::size_t>>();
    s.pool = j.at("pool").get<std::vector<std::size_t>>();
    if (!j.at("seed").is_null()) s.seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("splits json: ") + e.what());
  }
}

}  // namespace ncp
