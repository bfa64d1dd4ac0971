#include "qemc/campaign.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "qemc/common.hpp"

namespace qemc::campaign {

namespace {

bool is_integer_text(std::string_view s) {
  if (!s.empty() && s.front() == '-') s.remove_prefix(1);
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_float_text(const std::string& s) {
  if (s == "nan" || s == "inf" || s == "-inf") return true;
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string join(const Row& row) {
  std::string out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += row[i];
  }
  return out;
}

void write_atomically(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Keys every experiment accepts.
json common_defaults(const std::string& name) {
  return json{{"experiment", name}, {"base_seed", 1}, {"jobs", 0}, {"out", ""}};
}

void check_type(const std::string& key, const json& reference, const json& value) {
  auto fail = [&](const std::string& what) {
    throw ConfigError("config key '" + key + "': " + what);
  };
  if (reference.is_number_integer()) {
    if (!value.is_number_integer()) fail("expected an integer");
  } else if (reference.is_number()) {
    if (!value.is_number()) fail("expected a number");
  } else if (reference.is_string()) {
    if (!value.is_string()) fail("expected a string");
  } else if (reference.is_boolean()) {
    if (!value.is_boolean()) fail("expected a boolean");
  } else if (reference.is_array()) {
    if (!value.is_array()) fail("expected an array");
    if (!reference.empty()) {
      for (const auto& item : value) check_type(key + "[]", reference.front(), item);
    }
  } else if (reference.is_object()) {
    if (!value.is_object()) fail("expected an object");
    for (const auto& [sub, item] : value.items()) {
      if (reference.empty()) {
        // Free-form map of numbers.
        if (!item.is_number()) fail("entry '" + sub + "' must be a number");
      } else if (!reference.contains(sub)) {
        fail("unknown key '" + sub + "'");
      } else {
        check_type(key + "." + sub, reference.at(sub), item);
      }
    }
  }
}

void merge_into(json& target, const json& source, const json& reference) {
  for (const auto& [key, value] : source.items()) {
    if (!reference.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    check_type(key, reference.at(key), value);
    if (value.is_object() && !reference.at(key).empty()) {
      merge_into(target[key], value, reference.at(key));
    } else {
      target[key] = value;
    }
  }
}

struct Manifest {
  json doc;
  std::mutex mutex;
  fs::path path;

  void save() { write_atomically(path, doc.dump(2) + "\n"); }
};

json fragment_to_json(const std::string& id, const Fragment& fragment) {
  json tables = json::object();
  for (const auto& [name, rows] : fragment) tables[name] = rows;
  return json{{"cell", id}, {"tables", tables}};
}

std::string cell_file_name(const std::string& id) {
  std::string out;
  for (char c : id) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out + ".json";
}

}  // namespace

// ---------------------------------------------------------------------------
// CSV

CsvSchema::CsvSchema(std::string name, std::vector<Column> columns)
    : name_(std::move(name)), columns_(std::move(columns)) {
  columns_.push_back({"base_seed", ColumnType::kInt});
  columns_.push_back({"instance_seed", ColumnType::kSeed});
  columns_.push_back({"code_version", ColumnType::kString});
  columns_.push_back({"config_hash", ColumnType::kString});
}

std::size_t CsvSchema::index_of(std::string_view column) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == column) return i;
  }
  throw std::out_of_range("table " + name_ + " has no column " + std::string(column));
}

void CsvSchema::validate(const Row& row) const {
  if (row.size() != columns_.size()) {
    throw std::runtime_error("table " + name_ + ": expected " + std::to_string(columns_.size()) +
                             " fields, got " + std::to_string(row.size()));
  }
  for (std::size_t i = 0; i < row.size(); ++i) {
    const std::string& f = row[i];
    bool ok = true;
    switch (columns_[i].type) {
      case ColumnType::kInt: ok = is_integer_text(f); break;
      case ColumnType::kFloat: ok = is_float_text(f); break;
      case ColumnType::kSeed: ok = f == kEnsembleSeed || is_integer_text(f); break;
      case ColumnType::kString:
        ok = f.find_first_of(",\n\r\"") == std::string::npos;
        break;
    }
    if (!ok) {
      throw std::runtime_error("table " + name_ + ": bad value '" + f + "' in column " +
                               columns_[i].name);
    }
  }
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

double parse_double(const std::string& field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  if (!is_float_text(field)) throw std::runtime_error("not a number: '" + field + "'");
  return std::strtod(field.c_str(), nullptr);
}

void write_csv(const fs::path& path, const CsvSchema& schema, const std::vector<Row>& rows) {
  std::string content;
  Row header;
  for (const auto& c : schema.columns()) header.push_back(c.name);
  content += join(header) + "\n";
  for (const auto& row : rows) {
    schema.validate(row);
    content += join(row) + "\n";
  }
  write_atomically(path, content);
}

std::vector<Row> read_csv(const fs::path& path, const CsvSchema& schema) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": empty file");
  Row header;
  for (const auto& c : schema.columns()) header.push_back(c.name);
  if (split(line) != header) throw std::runtime_error(path.string() + ": header mismatch");
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    Row row = split(line);
    schema.validate(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rows

RowBuilder& RowBuilder::add(double value) {
  fields_.push_back(format_double(value));
  return *this;
}
RowBuilder& RowBuilder::add(int value) {
  fields_.push_back(std::to_string(value));
  return *this;
}
RowBuilder& RowBuilder::add(long long value) {
  fields_.push_back(std::to_string(value));
  return *this;
}
RowBuilder& RowBuilder::add(std::uint64_t value) {
  fields_.push_back(std::to_string(value));
  return *this;
}
RowBuilder& RowBuilder::add(std::string value) {
  fields_.push_back(std::move(value));
  return *this;
}

Row RowBuilder::finish(const Provenance& prov, std::string instance_seed) const {
  Row row = fields_;
  row.push_back(std::to_string(prov.base_seed));
  row.push_back(std::move(instance_seed));
  row.push_back(prov.code_version);
  row.push_back(prov.config_hash);
  return row;
}

Row RowBuilder::finish(const Provenance& prov, std::uint64_t instance_seed) const {
  return finish(prov, std::to_string(instance_seed));
}

double TableView::number(std::size_t row, std::string_view column) const {
  return parse_double((*rows_)[row][schema_->index_of(column)]);
}

long long TableView::integer(std::size_t row, std::string_view column) const {
  return std::stoll((*rows_)[row][schema_->index_of(column)]);
}

const std::string& TableView::text(std::size_t row, std::string_view column) const {
  return (*rows_)[row][schema_->index_of(column)];
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 15];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

std::vector<double> range_values(const json& triple) {
  if (!triple.is_array() || triple.size() != 3) {
    throw ConfigError("range must be [start, stop, step]");
  }
  const double start = triple[0].get<double>();
  const double stop = triple[1].get<double>();
  const double step = triple[2].get<double>();
  if (!(step > 0.0) || stop < start) throw ConfigError("range needs step > 0 and stop >= start");
  const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = std::round((start + static_cast<double>(k) * step) * 1e12) / 1e12;
  }
  return out;
}

std::string config_hash(const json& effective) {
  json copy = effective;
  copy.erase("out");
  copy.erase("jobs");
  return sha256_hex(copy.dump());
}

json resolve_config(const Experiment& experiment, const json& user, const RunOptions& options) {
  json reference = common_defaults(experiment.name);
  reference.update(experiment.defaults);
  json config = reference;
  if (options.quick) merge_into(config, experiment.quick, reference);
  if (!user.is_null()) {
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    if (user.contains("experiment") && user.at("experiment") != experiment.name) {
      throw ConfigError("config is for experiment '" + user.at("experiment").dump() +
                        "', not '" + experiment.name + "'");
    }
    merge_into(config, user, reference);
  }
  if (options.seed) config["base_seed"] = *options.seed;
  if (options.jobs) config["jobs"] = *options.jobs;
  if (options.out) config["out"] = options.out->string();

  if (config.at("out").get<std::string>().empty()) {
    throw ConfigError("no output directory (set --out or \"out\")");
  }
  if (config.at("jobs").get<int>() < 0) throw ConfigError("jobs must be >= 0");
  if (config.contains("instances") && config.at("instances").get<int>() < 1) {
    throw ConfigError("instances must be >= 1");
  }
  if (config.contains("n_values")) {
    if (config.at("n_values").empty()) throw ConfigError("n_values must not be empty");
    for (const auto& n : config.at("n_values")) {
      if (n.get<int>() < 2 || n.get<int>() > 10) throw ConfigError("n_values must lie in [2, 10]");
    }
  }
  if (experiment.validate) experiment.validate(config);
  return config;
}

// ---------------------------------------------------------------------------
// Fits

LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("linear_fit: need two or more paired points");
  }
  const double count = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / count;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw std::invalid_argument("linear_fit: x values are all equal");
  LinearFit fit;
  fit.points = x.size();
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  fit.slope_stderr = x.size() > 2 ? std::sqrt(ssr / (count - 2.0) / sxx) : 0.0;
  return fit;
}

ScalingFit fit_scaling(const std::map<int, std::vector<double>>& gaps_by_n) {
  ScalingFit fit;
  std::vector<double> xs, ys;
  for (const auto& [n, gaps] : gaps_by_n) {
    if (gaps.empty()) {
      fit.excluded.push_back(n);
      continue;
    }
    const double count = static_cast<double>(gaps.size());
    const double mean = std::accumulate(gaps.begin(), gaps.end(), 0.0) / count;
    double ss = 0.0;
    for (double g : gaps) ss += (g - mean) * (g - mean);
    if (!(mean > 0.0)) {
      fit.excluded.push_back(n);
      continue;
    }
    fit.sizes.push_back(n);
    fit.mean.push_back(mean);
    fit.stddev.push_back(gaps.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0);
    xs.push_back(n);
    ys.push_back(std::log2(mean));
  }
  if (xs.size() < 4) throw std::invalid_argument("fit_scaling: fewer than four usable sizes");
  const LinearFit lf = linear_fit(xs, ys);
  fit.k = -lf.slope;
  fit.k_stderr = lf.slope_stderr;
  fit.prefactor = std::exp2(lf.intercept);
  fit.r2 = lf.r2;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fit.residuals.push_back(ys[i] - (lf.intercept + lf.slope * xs[i]));
  }
  return fit;
}

std::optional<double> hitting_time(std::span<const double> ts, std::span<const double> values,
                                   double threshold) {
  if (ts.size() != values.size()) throw std::invalid_argument("hitting_time: size mismatch");
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (values[i] >= threshold) return ts[i];
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Engine

const Experiment& find_experiment(std::string_view name) {
  for (const auto& e : experiments()) {
    if (e.name == name) return e;
  }
  throw ConfigError("unknown experiment '" + std::string(name) + "'");
}

CampaignOutcome run_campaign(const Experiment& experiment, const json& config) {
  const fs::path out = config.at("out").get<std::string>();
  const fs::path cell_dir = out / "cells";
  fs::create_directories(cell_dir);

  const Provenance prov{config.at("base_seed").get<std::uint64_t>(), std::string(code_version()),
                        config_hash(config)};

  Manifest manifest;
  manifest.path = out / "manifest.json";
  if (fs::exists(manifest.path)) {
    manifest.doc = json::parse(read_file(manifest.path));
    if (manifest.doc.value("config_hash", "") != prov.config_hash ||
        manifest.doc.value("experiment", "") != experiment.name) {
      throw ConfigError("output directory " + out.string() +
                        " holds a different campaign (config hash mismatch)");
    }
  } else {
    manifest.doc = json{{"experiment", experiment.name},
                        {"config_hash", prov.config_hash},
                        {"code_version", prov.code_version},
                        {"cells", json::object()}};
  }
  manifest.doc["started"] = utc_timestamp();
  manifest.save();
  write_atomically(out / "config.json", config.dump(2) + "\n");

  std::map<std::string, const CsvSchema*> schemas;
  for (const auto& s : experiment.cell_tables) schemas[s.name()] = &s;

  const std::vector<Cell> cells = experiment.cells(config, prov);
  std::set<std::string> ids;
  for (const auto& c : cells) {
    if (!ids.insert(c.id).second) throw std::logic_error("duplicate cell id " + c.id);
  }

  CampaignOutcome outcome;
  outcome.cells = cells.size();
  std::vector<std::size_t> pending;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& entry = manifest.doc["cells"].value(cells[i].id, json::object());
    if (entry.value("status", "") == "done" && fs::exists(cell_dir / cell_file_name(cells[i].id))) {
      ++outcome.skipped;
    } else {
      pending.push_back(i);
    }
  }
  if (outcome.skipped) spdlog::info("resuming: {} of {} cells already complete", outcome.skipped, cells.size());

  int jobs = config.at("jobs").get<int>();
  if (jobs == 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  jobs = std::min<int>(jobs, static_cast<int>(std::max<std::size_t>(pending.size(), 1)));

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<bool> numerical{false};
  auto worker = [&] {
    for (std::size_t k = next++; k < pending.size(); k = next++) {
      const Cell& cell = cells[pending[k]];
      json entry;
      try {
        const auto started = std::chrono::steady_clock::now();
        Fragment fragment = cell.run();
        for (const auto& [table, rows] : fragment) {
          const auto it = schemas.find(table);
          if (it == schemas.end()) throw std::logic_error("cell wrote unknown table " + table);
          for (const auto& row : rows) it->second->validate(row);
        }
        write_atomically(cell_dir / cell_file_name(cell.id),
                         fragment_to_json(cell.id, fragment).dump() + "\n");
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        spdlog::info("cell {} done in {:.2f} s", cell.id, secs);
        entry = json{{"status", "done"}};
      } catch (const NumericalError& e) {
        spdlog::error("cell {} failed (numerical): {}", cell.id, e.what());
        entry = json{{"status", "failed"}, {"kind", "numerical"}, {"error", e.what()}};
        ++failed;
        numerical = true;
      } catch (const std::exception& e) {
        spdlog::error("cell {} failed: {}", cell.id, e.what());
        entry = json{{"status", "failed"}, {"kind", "error"}, {"error", e.what()}};
        ++failed;
      }
      std::lock_guard lock(manifest.mutex);
      manifest.doc["cells"][cell.id] = entry;
      manifest.save();
    }
  };
  {
    std::vector<std::jthread> threads;
    for (int j = 1; j < jobs; ++j) threads.emplace_back(worker);
    worker();
  }
  outcome.failed = failed;
  outcome.numerical_failure = numerical;

  // Assemble in canonical cell order from the on-disk fragments so resumed
  // and uninterrupted runs read identical inputs.
  Tables tables;
  for (const auto& s : experiment.cell_tables) tables[s.name()];
  std::size_t done = 0;
  for (const auto& cell : cells) {
    if (manifest.doc["cells"].value(cell.id, json::object()).value("status", "") != "done") continue;
    ++done;
    const json frag = json::parse(read_file(cell_dir / cell_file_name(cell.id)));
    for (const auto& [table, rows] : frag.at("tables").items()) {
      auto& dest = tables[table];
      for (const auto& row : rows) dest.push_back(row.get<Row>());
    }
  }
  for (const auto& s : experiment.cell_tables) {
    write_csv(out / (s.name() + ".csv"), s, tables[s.name()]);
    read_csv(out / (s.name() + ".csv"), s);
  }

  if (done > 0 && experiment.aggregate) {
    try {
      experiment.aggregate(config, prov, tables, out);
    } catch (const NumericalError& e) {
      spdlog::error("aggregation failed (numerical): {}", e.what());
      outcome.numerical_failure = true;
      ++outcome.failed;
    } catch (const std::exception& e) {
      spdlog::error("aggregation incomplete: {}", e.what());
      ++outcome.failed;
    }
  }

  manifest.doc["finished"] = utc_timestamp();
  manifest.doc["failed_cells"] = outcome.failed;
  manifest.save();

  if (outcome.failed == 0) {
    outcome.exit_code = kExitOk;
  } else if (done == 0 && outcome.numerical_failure) {
    outcome.exit_code = kExitNumerical;
  } else {
    outcome.exit_code = kExitPartial;
  }
  spdlog::info("{}: {} cells, {} resumed, {} failed", experiment.name, outcome.cells,
               outcome.skipped, outcome.failed);
  return outcome;
}

int run_command(std::string_view name, const RunOptions& options) {
  try {
    const Experiment& experiment = find_experiment(name);
    json user;
    if (options.config_path) {
      try {
        user = json::parse(read_file(*options.config_path));
      } catch (const json::parse_error& e) {
        throw ConfigError("cannot parse " + options.config_path->string() + ": " + e.what());
      } catch (const std::runtime_error& e) {
        throw ConfigError(e.what());
      }
    }
    const json config = resolve_config(experiment, user, options);
    return run_campaign(experiment, config).exit_code;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const NumericalError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kExitNumerical;
  } catch (const json::exception& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    spdlog::error("invalid parameter: {}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    spdlog::error("error: {}", e.what());
    return kExitNumerical;
  }
}

}  // namespace qemc::campaign
