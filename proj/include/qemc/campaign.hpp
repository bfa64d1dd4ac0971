#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace qemc::campaign {

using nlohmann::json;
namespace fs = std::filesystem;

/// Invalid or inconsistent campaign configuration (exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2, kExitPartial = 3 };

// ---------------------------------------------------------------------------
// CSV

enum class ColumnType { kInt, kFloat, kString, kSeed };

struct Column {
  std::string name;
  ColumnType type;
};

using Row = std::vector<std::string>;

/// Column layout of one CSV table. Every table ends with the provenance
/// columns base_seed, instance_seed, code_version, config_hash.
class CsvSchema {
 public:
  CsvSchema(std::string name, std::vector<Column> columns);

  const std::string& name() const { return name_; }
  const std::vector<Column>& columns() const { return columns_; }
  std::size_t index_of(std::string_view column) const;
  /// Throws std::runtime_error on a wrong field count or unparseable field.
  void validate(const Row& row) const;

 private:
  std::string name_;
  std::vector<Column> columns_;
};

/// Shortest round-trip decimal form ("%.17g"); "nan", "inf", "-inf" for
/// non-finite values.
std::string format_double(double value);
double parse_double(const std::string& field);

void write_csv(const fs::path& path, const CsvSchema& schema, const std::vector<Row>& rows);
std::vector<Row> read_csv(const fs::path& path, const CsvSchema& schema);

// ---------------------------------------------------------------------------
// Provenance and row assembly

struct Provenance {
  std::uint64_t base_seed = 0;
  std::string code_version;
  std::string config_hash;
};

/// Sentinel instance_seed for rows aggregated over an ensemble.
inline constexpr std::string_view kEnsembleSeed = "*";

class RowBuilder {
 public:
  RowBuilder& add(double value);
  RowBuilder& add(int value);
  RowBuilder& add(long long value);
  RowBuilder& add(std::uint64_t value);
  RowBuilder& add(std::string value);
  /// Appends the four provenance fields and returns the row.
  Row finish(const Provenance& prov, std::string instance_seed) const;
  Row finish(const Provenance& prov, std::uint64_t instance_seed) const;

 private:
  Row fields_;
};

/// Read access to rows of one schema by column name.
class TableView {
 public:
  TableView(const CsvSchema& schema, const std::vector<Row>& rows) : schema_(&schema), rows_(&rows) {}
  std::size_t size() const { return rows_->size(); }
  double number(std::size_t row, std::string_view column) const;
  long long integer(std::size_t row, std::string_view column) const;
  const std::string& text(std::size_t row, std::string_view column) const;

 private:
  const CsvSchema* schema_;
  const std::vector<Row>* rows_;
};

std::string sha256_hex(std::string_view data);

// ---------------------------------------------------------------------------
// Configuration

struct RunOptions {
  std::optional<fs::path> config_path;
  std::optional<fs::path> out;
  bool quick = false;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
};

/// Inclusive arithmetic range [start, stop] in steps of `step`, snapped to
/// 1e-12 so decimal grids print cleanly.
std::vector<double> range_values(const json& triple);

/// Hash of the effective configuration without the keys that cannot change
/// results (out, jobs).
std::string config_hash(const json& effective);

// ---------------------------------------------------------------------------
// Fits

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  double r2 = 0.0;
  std::size_t points = 0;
};

LinearFit linear_fit(std::span<const double> x, std::span<const double> y);

struct ScalingFit {
  std::vector<int> sizes;
  std::vector<double> mean;
  std::vector<double> stddev;
  /// delta ~ prefactor * 2^{-k n}.
  double k = 0.0;
  double k_stderr = 0.0;
  double prefactor = 0.0;
  double r2 = 0.0;
  std::vector<double> residuals;
  /// Sizes dropped because their mean gap was not positive.
  std::vector<int> excluded;
};

/// Least squares of log2(mean gap) against n. Needs at least four usable
/// sizes; throws std::invalid_argument otherwise.
ScalingFit fit_scaling(const std::map<int, std::vector<double>>& gaps_by_n);

/// First grid time whose value reaches `threshold`.
std::optional<double> hitting_time(std::span<const double> ts, std::span<const double> values,
                                   double threshold);

// ---------------------------------------------------------------------------
// Campaign engine

/// Rows produced by one cell, keyed by table name.
using Fragment = std::map<std::string, std::vector<Row>>;

struct Cell {
  std::string id;
  std::function<Fragment()> run;
};

/// Per-table rows of all completed cells, concatenated in cell order.
using Tables = std::map<std::string, std::vector<Row>>;

struct Experiment {
  std::string name;
  json defaults;
  /// Overrides applied by --quick.
  json quick;
  std::vector<CsvSchema> cell_tables;
  /// Semantic checks beyond key and type validation; throws ConfigError.
  std::function<void(const json& config)> validate;
  std::function<std::vector<Cell>(const json& config, const Provenance& prov)> cells;
  /// Derived tables and reports from the assembled cell tables.
  std::function<void(const json& config, const Provenance& prov, const Tables& tables,
                     const fs::path& out)>
      aggregate;
};

const std::vector<Experiment>& experiments();
const Experiment& find_experiment(std::string_view name);

/// Default configuration merged with --quick overrides, the user document and
/// command-line flags. Unknown keys and type mismatches raise ConfigError.
json resolve_config(const Experiment& experiment, const json& user, const RunOptions& options);

struct CampaignOutcome {
  std::size_t cells = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
  bool numerical_failure = false;
  int exit_code = kExitOk;
};

/// Runs (or resumes) a campaign into the configured output directory.
CampaignOutcome run_campaign(const Experiment& experiment, const json& config);

/// Full command: load config, resolve, run. Returns the process exit code.
int run_command(std::string_view experiment, const RunOptions& options);

}  // namespace qemc::campaign
