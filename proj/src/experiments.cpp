// Experiment definitions for the campaign runner. Each experiment lists its
// defaults, quick overrides, per-cell tables, cell decomposition, and the
// aggregation that turns assembled cell rows into summary tables.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "qemc/campaign.hpp"
#include "qemc/chain.hpp"
#include "qemc/instances.hpp"
#include "qemc/mps.hpp"
#include "qemc/phase.hpp"
#include "qemc/rng.hpp"
#include "qemc/schedopt.hpp"
#include "qemc/schedule.hpp"
#include "qemc/unitary.hpp"

namespace qemc::campaign {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::uint64_t kRandomizedStream = 0x52414e44;

using C = ColumnType;

std::vector<int> ints(const json& j) { return j.get<std::vector<int>>(); }
std::vector<double> doubles(const json& j) { return j.get<std::vector<double>>(); }
std::uint64_t base_seed(const json& cfg) { return cfg.at("base_seed").get<std::uint64_t>(); }
std::uint64_t instance_seed(const json& cfg, int k) { return base_seed(cfg) + static_cast<std::uint64_t>(k); }

std::string cell_id(std::initializer_list<std::string> parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "_") + p;
  return out;
}

struct Stats {
  double mean = kNaN;
  double std = 0.0;
  double stderr_ = 0.0;
  std::size_t count = 0;
};

Stats stats_of(const std::vector<double>& v) {
  Stats s;
  s.count = v.size();
  if (v.empty()) return s;
  const double n = static_cast<double>(v.size());
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / (n - 1.0));
    s.stderr_ = s.std / std::sqrt(n);
  }
  return s;
}

void write_json(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::trunc);
  out << doc.dump(2) << "\n";
}

// Keys of a double-valued grid as exact decimal strings, so grouping never
// depends on floating-point equality.
std::string key_of(double v) { return format_double(v); }

void require_range(const json& cfg, const char* key) {
  const auto values = range_values(cfg.at(key));
  if (values.empty()) throw ConfigError(std::string(key) + " is empty");
}

void require_gamma(double gamma, const char* key) {
  if (gamma < 0.0 || gamma > kMaxGamma) {
    throw ConfigError(std::string(key) + " must lie in [0, 1.05]");
  }
}

// ---------------------------------------------------------------------------
// Proposal strategies shared by scaling, tempsweep, chain-run.

const std::set<std::string> kStrategies = {"local", "uniform", "exact", "trotter", "randomized", "mps"};

std::vector<std::string> expand_strategies(const json& cfg) {
  std::vector<std::string> out;
  for (const auto& s : cfg.at("strategies").get<std::vector<std::string>>()) {
    if (s == "mps") {
      for (int chi : ints(cfg.at("chi_values"))) out.push_back("mps_chi" + std::to_string(chi));
    } else {
      out.push_back(s);
    }
  }
  return out;
}

void validate_strategies(const json& cfg) {
  for (const auto& s : cfg.at("strategies").get<std::vector<std::string>>()) {
    if (!kStrategies.count(s)) throw ConfigError("unknown strategy '" + s + "'");
  }
  if (cfg.contains("chi_values")) {
    for (int chi : ints(cfg.at("chi_values"))) {
      if (chi < 1) throw ConfigError("chi_values must be positive");
    }
  }
  require_gamma(cfg.at("gamma").get<double>(), "gamma");
  if (!(cfg.at("t").get<double>() > 0.0)) throw ConfigError("t must be positive");
  if (!(cfg.at("dt").get<double>() > 0.0)) throw ConfigError("dt must be positive");
}

RandomizedStrategy randomized_of(const json& cfg) {
  const json& r = cfg.at("randomized");
  return RandomizedStrategy{r.at("gamma_min").get<double>(), r.at("gamma_max").get<double>(),
                            r.at("t_min").get<double>(), r.at("t_max").get<double>(),
                            r.at("draws").get<int>()};
}

TrotterOrder order_of(const json& cfg) {
  return cfg.value("order", std::string("second")) == "first" ? TrotterOrder::kFirst
                                                              : TrotterOrder::kSecond;
}

ProposalMatrix strategy_proposal(const std::string& strategy, const IsingInstance& inst,
                                 const json& cfg, std::uint64_t seed) {
  const int n = inst.n();
  const double gamma = cfg.at("gamma").get<double>();
  const double t = cfg.at("t").get<double>();
  const double dt = cfg.at("dt").get<double>();
  if (strategy == "local") return local_proposal(n);
  if (strategy == "uniform") return uniform_proposal(n);
  if (strategy == "exact") return exact_unitary_proposal(inst, gamma, t);
  if (strategy == "trotter") return trotter_unitary_proposal(inst, gamma, t, dt, order_of(cfg));
  if (strategy == "randomized") {
    Rng rng(derive_seed(seed, kRandomizedStream));
    return randomized_expected_proposal(inst, rng, randomized_of(cfg)).q;
  }
  if (strategy.rfind("mps_chi", 0) == 0) {
    const int chi = std::stoi(strategy.substr(7));
    return mps_proposal_matrix(inst, gamma, t, dt, chi).q;
  }
  throw ConfigError("unknown strategy '" + strategy + "'");
}

GapResult strategy_gap(const ProposalMatrix& q, const IsingInstance& inst, double temperature,
                       const json& cfg) {
  const bool hastings = !q.symmetric() && cfg.value("hastings", true);
  return proposal_gap(q, energy_table(inst), temperature, hastings);
}

json strategy_defaults() {
  return json{{"gamma", 0.45},
              {"t", 12.0},
              {"dt", 0.8},
              {"order", "second"},
              {"hastings", true},
              {"chi_values", {2, 4, 8}},
              {"randomized",
               {{"gamma_min", 0.25}, {"gamma_max", 0.6}, {"t_min", 2.0}, {"t_max", 20.0}, {"draws", 32}}}};
}

// ---------------------------------------------------------------------------
// gridsearch

Experiment gridsearch() {
  Experiment e;
  e.name = "gridsearch";
  e.defaults = {{"n_values", {9}},
                {"instances", 100},
                {"temperature", 1.0},
                {"gamma_range", {0.0, 1.0, 0.02}},
                {"t_range", {0.0, 30.0, 1.0}},
                {"avg_t_range", {12.0, 30.0}}};
  e.quick = {{"n_values", {4, 5}}, {"instances", 20}};
  e.cell_tables = {CsvSchema("grid", {{"n", C::kInt}, {"gamma", C::kFloat}, {"t", C::kFloat}, {"delta", C::kFloat}})};
  e.validate = [](const json& cfg) {
    require_range(cfg, "gamma_range");
    require_range(cfg, "t_range");
    for (double g : range_values(cfg.at("gamma_range"))) require_gamma(g, "gamma_range");
    if (cfg.at("avg_t_range").size() != 2) throw ConfigError("avg_t_range must be [lo, hi]");
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (int n : ints(cfg.at("n_values"))) {
      for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
        cells.push_back({cell_id({"n" + std::to_string(n), "i" + std::to_string(k)}), [=, &cfg] {
                           const std::uint64_t seed = instance_seed(cfg, k);
                           const IsingInstance inst = generate_instance(n, seed);
                           const RealVector energies = energy_table(inst);
                           const double temp = cfg.at("temperature").get<double>();
                           Fragment f;
                           for (double gamma : range_values(cfg.at("gamma_range"))) {
                             const SpectralPropagator prop(build_hamiltonian(inst, gamma));
                             for (double t : range_values(cfg.at("t_range"))) {
                               const double delta = proposal_gap(prop.proposal(t), energies, temp).delta;
                               f["grid"].push_back(RowBuilder().add(n).add(gamma).add(t).add(delta).finish(prov, seed));
                             }
                           }
                           return f;
                         }});
      }
    }
    return cells;
  };
  e.aggregate = [](const json& cfg, const Provenance& prov, const Tables& tables, const fs::path& out) {
    const CsvSchema grid_schema = CsvSchema("grid", {{"n", C::kInt}, {"gamma", C::kFloat}, {"t", C::kFloat}, {"delta", C::kFloat}});
    const TableView grid(grid_schema, tables.at("grid"));
    const double lo = cfg.at("avg_t_range")[0].get<double>();
    const double hi = cfg.at("avg_t_range")[1].get<double>();

    // (n, gamma, t) -> deltas; (n, seed, gamma) -> deltas in the averaging window.
    std::map<std::tuple<int, double, double>, std::vector<double>> cellwise;
    std::map<std::pair<int, double>, std::vector<double>> window;
    std::map<std::tuple<int, std::string, double>, std::vector<double>> per_instance;
    for (std::size_t r = 0; r < grid.size(); ++r) {
      const int n = static_cast<int>(grid.integer(r, "n"));
      const double g = grid.number(r, "gamma");
      const double t = grid.number(r, "t");
      const double d = grid.number(r, "delta");
      cellwise[{n, g, t}].push_back(d);
      if (t >= lo - 1e-12 && t <= hi + 1e-12) {
        window[{n, g}].push_back(d);
        per_instance[{n, grid.text(r, "instance_seed"), g}].push_back(d);
      }
    }
    const CsvSchema mean_schema("grid_mean", {{"n", C::kInt}, {"gamma", C::kFloat}, {"t", C::kFloat},
                                              {"delta_mean", C::kFloat}, {"delta_std", C::kFloat}, {"instances", C::kInt}});
    std::vector<Row> mean_rows;
    for (const auto& [key, v] : cellwise) {
      const Stats s = stats_of(v);
      mean_rows.push_back(RowBuilder().add(std::get<0>(key)).add(std::get<1>(key)).add(std::get<2>(key))
                              .add(s.mean).add(s.std).add(static_cast<int>(s.count)).finish(prov, std::string(kEnsembleSeed)));
    }
    write_csv(out / "grid_mean.csv", mean_schema, mean_rows);

    const CsvSchema avg_schema("delta_avg", {{"n", C::kInt}, {"gamma", C::kFloat}, {"delta_avg", C::kFloat}, {"delta_avg_stderr", C::kFloat}});
    std::vector<Row> avg_rows;
    std::map<int, std::pair<double, double>> best;  // n -> (gamma, delta_avg)
    for (const auto& [key, v] : window) {
      const Stats s = stats_of(v);
      avg_rows.push_back(RowBuilder().add(key.first).add(key.second).add(s.mean).add(s.stderr_).finish(prov, std::string(kEnsembleSeed)));
      auto it = best.find(key.first);
      if (it == best.end() || s.mean > it->second.second) best[key.first] = {key.second, s.mean};
    }
    write_csv(out / "delta_avg.csv", avg_schema, avg_rows);

    // Per-instance optimum of the window average.
    std::map<std::pair<int, std::string>, std::pair<double, double>> inst_best;
    for (const auto& [key, v] : per_instance) {
      const double m = stats_of(v).mean;
      const auto ik = std::make_pair(std::get<0>(key), std::get<1>(key));
      auto it = inst_best.find(ik);
      if (it == inst_best.end() || m > it->second.second) inst_best[ik] = {std::get<2>(key), m};
    }
    std::map<int, std::vector<double>> inst_opt;
    for (const auto& [key, v] : inst_best) inst_opt[key.first].push_back(v.first);

    const CsvSchema opt_schema("gamma_opt", {{"n", C::kInt}, {"gamma_opt", C::kFloat}, {"delta_avg_max", C::kFloat},
                                             {"gamma_opt_instance_mean", C::kFloat}, {"gamma_opt_instance_std", C::kFloat}});
    std::vector<Row> opt_rows;
    json report = json::object();
    for (const auto& [n, b] : best) {
      const Stats s = stats_of(inst_opt[n]);
      opt_rows.push_back(RowBuilder().add(n).add(b.first).add(b.second).add(s.mean).add(s.std).finish(prov, std::string(kEnsembleSeed)));
      report["gamma_opt"][std::to_string(n)] = b.first;
    }
    write_csv(out / "gamma_opt.csv", opt_schema, opt_rows);
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// scaling

CsvSchema gaps_schema() {
  return CsvSchema("gaps", {{"strategy", C::kString}, {"n", C::kInt}, {"delta", C::kFloat}, {"lambda2", C::kFloat}});
}

void write_fits(const fs::path& out, const Provenance& prov,
                const std::map<std::string, std::map<int, std::vector<double>>>& by_label,
                json& report) {
  const CsvSchema summary_schema("gap_summary", {{"strategy", C::kString}, {"n", C::kInt}, {"delta_mean", C::kFloat},
                                                 {"delta_std", C::kFloat}, {"delta_stderr", C::kFloat}, {"instances", C::kInt}});
  const CsvSchema fit_schema("fits", {{"strategy", C::kString}, {"k", C::kFloat}, {"k_stderr", C::kFloat}, {"prefactor", C::kFloat},
                                      {"r2", C::kFloat}, {"sizes", C::kString}, {"excluded", C::kString}});
  std::vector<Row> summary, fits;
  for (const auto& [label, by_n] : by_label) {
    for (const auto& [n, v] : by_n) {
      const Stats s = stats_of(v);
      summary.push_back(RowBuilder().add(label).add(n).add(s.mean).add(s.std).add(s.stderr_)
                            .add(static_cast<int>(s.count)).finish(prov, std::string(kEnsembleSeed)));
    }
    try {
      const ScalingFit fit = fit_scaling(by_n);
      std::string sizes, excluded;
      for (int n : fit.sizes) sizes += (sizes.empty() ? "" : ";") + std::to_string(n);
      for (int n : fit.excluded) excluded += (excluded.empty() ? "" : ";") + std::to_string(n);
      fits.push_back(RowBuilder().add(label).add(fit.k).add(fit.k_stderr).add(fit.prefactor).add(fit.r2)
                         .add(sizes).add(excluded).finish(prov, std::string(kEnsembleSeed)));
      report["fits"][label] = {{"k", fit.k}, {"k_stderr", fit.k_stderr}, {"prefactor", fit.prefactor}, {"r2", fit.r2}};
    } catch (const std::invalid_argument& err) {
      spdlog::warn("no scaling fit for {}: {}", label, err.what());
    }
  }
  write_csv(out / "gap_summary.csv", summary_schema, summary);
  write_csv(out / "fits.csv", fit_schema, fits);
}

Experiment scaling() {
  Experiment e;
  e.name = "scaling";
  e.defaults = strategy_defaults();
  e.defaults.update({{"n_values", {3, 4, 5, 6, 7, 8, 9}},
                     {"instances", 100},
                     {"temperature", 1.0},
                     {"strategies", {"local", "uniform", "exact", "trotter", "randomized", "mps"}}});
  e.quick = {{"n_values", {3, 4, 5, 6, 7}}, {"instances", 20}};
  e.cell_tables = {gaps_schema()};
  e.validate = validate_strategies;
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (const auto& strategy : expand_strategies(cfg)) {
      for (int n : ints(cfg.at("n_values"))) {
        for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
          cells.push_back({cell_id({strategy, "n" + std::to_string(n), "i" + std::to_string(k)}), [=, &cfg] {
                             const std::uint64_t seed = instance_seed(cfg, k);
                             const IsingInstance inst = generate_instance(n, seed);
                             const ProposalMatrix q = strategy_proposal(strategy, inst, cfg, seed);
                             const double temp = cfg.at("temperature").get<double>();
                             const GapResult g = strategy_gap(q, inst, temp, cfg);
                             Fragment f;
                             f["gaps"].push_back(RowBuilder().add(strategy).add(n).add(g.delta).add(g.lambda2_abs).finish(prov, seed));
                             if (!q.symmetric()) {
                               // Plain Metropolis rule on the truncated proposal, reported alongside.
                               const GapResult raw = proposal_gap(q, energy_table(inst), temp, false);
                               f["gaps"].push_back(RowBuilder().add(strategy + "_uncorrected").add(n).add(raw.delta)
                                                       .add(raw.lambda2_abs).finish(prov, seed));
                             }
                             return f;
                           }});
        }
      }
    }
    return cells;
  };
  e.aggregate = [](const json&, const Provenance& prov, const Tables& tables, const fs::path& out) {
    const CsvSchema schema = gaps_schema();
    const TableView gaps(schema, tables.at("gaps"));
    std::map<std::string, std::map<int, std::vector<double>>> by_label;
    for (std::size_t r = 0; r < gaps.size(); ++r) {
      by_label[gaps.text(r, "strategy")][static_cast<int>(gaps.integer(r, "n"))].push_back(gaps.number(r, "delta"));
    }
    json report = json::object();
    write_fits(out, prov, by_label, report);
    if (report.contains("fits") && report["fits"].contains("exact")) {
      const double kq = report["fits"]["exact"]["k"].get<double>();
      for (const char* classical : {"local", "uniform"}) {
        if (report["fits"].contains(classical)) {
          report["speedup"][classical] = report["fits"][classical]["k"].get<double>() / kq;
        }
      }
    }
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// hittime

double hitting_gamma(const json& cfg, int n) {
  const std::string key = std::to_string(n);
  if (cfg.at("gammas").contains(key)) return cfg.at("gammas").at(key).get<double>();
  const std::string path = cfg.at("gamma_opt_csv").get<std::string>();
  if (!path.empty()) {
    const CsvSchema schema("gamma_opt", {{"n", C::kInt}, {"gamma_opt", C::kFloat}, {"delta_avg_max", C::kFloat},
                                         {"gamma_opt_instance_mean", C::kFloat}, {"gamma_opt_instance_std", C::kFloat}});
    const auto rows = read_csv(path, schema);
    const TableView view(schema, rows);
    for (std::size_t r = 0; r < view.size(); ++r) {
      if (view.integer(r, "n") == n) return view.number(r, "gamma_opt");
    }
  }
  return cfg.at("gamma").get<double>();
}

Experiment hittime() {
  Experiment e;
  e.name = "hittime";
  e.defaults = {{"n_values", {3, 4, 5, 6, 7, 8, 9}},
                {"instances", 100},
                {"temperature", 1.0},
                {"gamma", 0.42},
                {"gammas", json::object()},
                {"gamma_opt_csv", ""},
                {"threshold", 0.01},
                {"t_step", 0.5},
                {"t_max", 60.0}};
  e.quick = {{"n_values", {3, 4, 5, 6, 7}}, {"instances", 20}};
  e.cell_tables = {CsvSchema("gap_vs_t", {{"n", C::kInt}, {"gamma", C::kFloat}, {"t", C::kFloat}, {"delta", C::kFloat}})};
  e.validate = [](const json& cfg) {
    if (!(cfg.at("t_step").get<double>() > 0.0) || cfg.at("t_max").get<double>() < cfg.at("t_step").get<double>()) {
      throw ConfigError("need 0 < t_step <= t_max");
    }
    for (int n : ints(cfg.at("n_values"))) require_gamma(hitting_gamma(cfg, n), "gamma");
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (int n : ints(cfg.at("n_values"))) {
      const double gamma = hitting_gamma(cfg, n);
      for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
        cells.push_back({cell_id({"n" + std::to_string(n), "i" + std::to_string(k)}), [=, &cfg] {
                           const std::uint64_t seed = instance_seed(cfg, k);
                           const IsingInstance inst = generate_instance(n, seed);
                           const RealVector energies = energy_table(inst);
                           const SpectralPropagator prop(build_hamiltonian(inst, gamma));
                           const double step = cfg.at("t_step").get<double>();
                           Fragment f;
                           for (double t : range_values(json{step, cfg.at("t_max").get<double>(), step})) {
                             const double d = proposal_gap(prop.proposal(t), energies, cfg.at("temperature").get<double>()).delta;
                             f["gap_vs_t"].push_back(RowBuilder().add(n).add(gamma).add(t).add(d).finish(prov, seed));
                           }
                           return f;
                         }});
      }
    }
    return cells;
  };
  e.aggregate = [](const json& cfg, const Provenance& prov, const Tables& tables, const fs::path& out) {
    const CsvSchema schema("gap_vs_t", {{"n", C::kInt}, {"gamma", C::kFloat}, {"t", C::kFloat}, {"delta", C::kFloat}});
    const TableView view(schema, tables.at("gap_vs_t"));
    std::map<int, std::map<double, std::vector<double>>> by;
    std::map<int, double> gammas;
    for (std::size_t r = 0; r < view.size(); ++r) {
      const int n = static_cast<int>(view.integer(r, "n"));
      by[n][view.number(r, "t")].push_back(view.number(r, "delta"));
      gammas[n] = view.number(r, "gamma");
    }
    const CsvSchema mean_schema("mean_gap_vs_t", {{"n", C::kInt}, {"t", C::kFloat}, {"delta_mean", C::kFloat}, {"delta_stderr", C::kFloat}});
    const CsvSchema hit_schema("hitting_time", {{"n", C::kInt}, {"gamma", C::kFloat}, {"t_hit", C::kFloat}, {"crossed", C::kInt}});
    std::vector<Row> mean_rows, hit_rows;
    std::vector<double> xs, ys;
    const double threshold = cfg.at("threshold").get<double>();
    json report = json::object();
    for (const auto& [n, series] : by) {
      std::vector<double> ts, means;
      for (const auto& [t, v] : series) {
        const Stats s = stats_of(v);
        ts.push_back(t);
        means.push_back(s.mean);
        mean_rows.push_back(RowBuilder().add(n).add(t).add(s.mean).add(s.stderr_).finish(prov, std::string(kEnsembleSeed)));
      }
      const auto hit = hitting_time(ts, means, threshold);
      hit_rows.push_back(RowBuilder().add(n).add(gammas[n]).add(hit.value_or(kNaN)).add(hit ? 1 : 0).finish(prov, std::string(kEnsembleSeed)));
      report["t_hit"][std::to_string(n)] = hit ? json(*hit) : json(nullptr);
      if (hit) {
        xs.push_back(n);
        ys.push_back(*hit);
      } else {
        spdlog::warn("n={}: threshold {} never reached for t <= {}", n, threshold, cfg.at("t_max").get<double>());
      }
    }
    write_csv(out / "mean_gap_vs_t.csv", mean_schema, mean_rows);
    write_csv(out / "hitting_time.csv", hit_schema, hit_rows);
    if (xs.size() >= 2) {
      const LinearFit fit = linear_fit(xs, ys);
      bool monotone = true;
      for (std::size_t i = 1; i < ys.size(); ++i) monotone = monotone && ys[i] >= ys[i - 1];
      report["fit"] = {{"slope", fit.slope}, {"intercept", fit.intercept}, {"r2", fit.r2}, {"points", fit.points}};
      report["monotone"] = monotone;
    }
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// trotter

Experiment trotter() {
  Experiment e;
  e.name = "trotter";
  e.defaults = {{"n_values", {3, 4, 5, 6, 7, 8, 9}}, {"instances", 100}, {"temperature", 1.0}, {"gamma", 0.45},
                {"t", 12.0}, {"dt_range", {0.1, 2.0, 0.1}}, {"order", "second"}};
  e.quick = {{"n_values", {3, 4, 5, 6, 7}}, {"instances", 20}};
  e.cell_tables = {CsvSchema("trotter", {{"n", C::kInt}, {"dt", C::kFloat}, {"steps", C::kInt}, {"delta", C::kFloat}, {"f", C::kFloat}}),
                   CsvSchema("continuous", {{"n", C::kInt}, {"delta", C::kFloat}})};
  e.validate = [](const json& cfg) {
    require_range(cfg, "dt_range");
    require_gamma(cfg.at("gamma").get<double>(), "gamma");
    if (!(cfg.at("t").get<double>() > 0.0)) throw ConfigError("t must be positive");
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (int n : ints(cfg.at("n_values"))) {
      for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
        cells.push_back({cell_id({"n" + std::to_string(n), "i" + std::to_string(k)}), [=, &cfg] {
                           const std::uint64_t seed = instance_seed(cfg, k);
                           const IsingInstance inst = generate_instance(n, seed);
                           const RealVector energies = energy_table(inst);
                           const double gamma = cfg.at("gamma").get<double>();
                           const double t = cfg.at("t").get<double>();
                           const double temp = cfg.at("temperature").get<double>();
                           Fragment f;
                           const double exact = proposal_gap(exact_unitary_proposal(inst, gamma, t), energies, temp).delta;
                           f["continuous"].push_back(RowBuilder().add(n).add(exact).finish(prov, seed));
                           for (double dt : range_values(cfg.at("dt_range"))) {
                             const int steps = trotter_steps(t, dt);
                             const double d = proposal_gap(trotter_unitary_proposal(inst, gamma, t, dt, order_of(cfg)), energies, temp).delta;
                             f["trotter"].push_back(RowBuilder().add(n).add(dt).add(steps).add(d).add(trotter_objective(d, dt, t)).finish(prov, seed));
                           }
                           return f;
                         }});
      }
    }
    return cells;
  };
  e.aggregate = [](const json&, const Provenance& prov, const Tables& tables, const fs::path& out) {
    const CsvSchema ts("trotter", {{"n", C::kInt}, {"dt", C::kFloat}, {"steps", C::kInt}, {"delta", C::kFloat}, {"f", C::kFloat}});
    const CsvSchema cs("continuous", {{"n", C::kInt}, {"delta", C::kFloat}});
    const TableView tv(ts, tables.at("trotter"));
    const TableView cv(cs, tables.at("continuous"));
    std::map<int, std::map<double, std::vector<double>>> deltas, fs_;
    std::map<int, std::vector<double>> continuous;
    for (std::size_t r = 0; r < tv.size(); ++r) {
      const int n = static_cast<int>(tv.integer(r, "n"));
      deltas[n][tv.number(r, "dt")].push_back(tv.number(r, "delta"));
      fs_[n][tv.number(r, "dt")].push_back(tv.number(r, "f"));
    }
    for (std::size_t r = 0; r < cv.size(); ++r) continuous[static_cast<int>(cv.integer(r, "n"))].push_back(cv.number(r, "delta"));

    const CsvSchema sum_schema("trotter_summary", {{"n", C::kInt}, {"dt", C::kFloat}, {"delta_mean", C::kFloat},
                                                   {"delta_stderr", C::kFloat}, {"f_mean", C::kFloat}});
    const CsvSchema opt_schema("trotter_opt", {{"n", C::kInt}, {"dt_opt", C::kFloat}, {"f_max", C::kFloat},
                                               {"delta_continuous", C::kFloat}, {"delta_continuous_stderr", C::kFloat}});
    std::vector<Row> sum_rows, opt_rows;
    json report = json::object();
    for (const auto& [n, series] : deltas) {
      double best_dt = kNaN, best_f = -1.0;
      for (const auto& [dt, v] : series) {
        const Stats s = stats_of(v);
        const double f = stats_of(fs_[n][dt]).mean;
        sum_rows.push_back(RowBuilder().add(n).add(dt).add(s.mean).add(s.stderr_).add(f).finish(prov, std::string(kEnsembleSeed)));
        if (f > best_f) {
          best_f = f;
          best_dt = dt;
        }
      }
      const Stats c = stats_of(continuous[n]);
      opt_rows.push_back(RowBuilder().add(n).add(best_dt).add(best_f).add(c.mean).add(c.stderr_).finish(prov, std::string(kEnsembleSeed)));
      report["dt_opt"][std::to_string(n)] = best_dt;
    }
    write_csv(out / "trotter_summary.csv", sum_schema, sum_rows);
    write_csv(out / "trotter_opt.csv", opt_schema, opt_rows);
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// phi

CsvSchema phi_schema() {
  return CsvSchema("phi", {{"chi", C::kInt}, {"n", C::kInt}, {"pairs", C::kInt}, {"unresolved", C::kInt}, {"mean", C::kFloat},
                           {"sigma", C::kFloat}, {"sum", C::kFloat}, {"sum_sq", C::kFloat}, {"underflow", C::kInt},
                           {"overflow", C::kInt}, {"max_norm_loss", C::kFloat}, {"max_truncation", C::kFloat}});
}

CsvSchema phi_hist_schema(const std::string& name) {
  return CsvSchema(name, {{"chi", C::kInt}, {"n", C::kInt}, {"bin", C::kInt}, {"lo", C::kFloat}, {"hi", C::kFloat}, {"count", C::kInt}});
}

Experiment phi() {
  Experiment e;
  e.name = "phi";
  e.defaults = {{"n_values", {3, 4, 5, 6, 7, 8}}, {"chi_values", {2, 4, 8}}, {"instances", 100}, {"gamma", 0.45},
                {"t", 12.0}, {"dt", 0.8}, {"bins", 64}, {"hist_range", {-8.0, 8.0}}};
  e.quick = {{"n_values", {3, 4, 5, 6, 7}}, {"instances", 20}};
  e.cell_tables = {phi_schema(), phi_hist_schema("phi_hist_instance")};
  e.validate = [](const json& cfg) {
    require_gamma(cfg.at("gamma").get<double>(), "gamma");
    if (cfg.at("bins").get<int>() < 1) throw ConfigError("bins must be positive");
    if (cfg.at("hist_range").size() != 2 || !(cfg.at("hist_range")[1].get<double>() > cfg.at("hist_range")[0].get<double>())) {
      throw ConfigError("hist_range must be [lo, hi] with hi > lo");
    }
    for (int chi : ints(cfg.at("chi_values"))) {
      if (chi < 1) throw ConfigError("chi_values must be positive");
    }
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (int chi : ints(cfg.at("chi_values"))) {
      for (int n : ints(cfg.at("n_values"))) {
        for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
          cells.push_back({cell_id({"chi" + std::to_string(chi), "n" + std::to_string(n), "i" + std::to_string(k)}), [=, &cfg] {
                             const std::uint64_t seed = instance_seed(cfg, k);
                             const IsingInstance inst = generate_instance(n, seed);
                             const MpsProposal mp = mps_proposal_matrix(inst, cfg.at("gamma").get<double>(), cfg.at("t").get<double>(),
                                                                        cfg.at("dt").get<double>(), chi);
                             const double lo = cfg.at("hist_range")[0].get<double>();
                             const double hi = cfg.at("hist_range")[1].get<double>();
                             const int bins = cfg.at("bins").get<int>();
                             const PhiStats ps = phi_statistics(mp.q, kPhiFloor, bins, lo, hi);
                             double sum = 0.0, sum_sq = 0.0;
                             for (double v : ps.log2_ratios) {
                               sum += v;
                               sum_sq += v * v;
                             }
                             const double max_loss = *std::max_element(mp.norm_loss.begin(), mp.norm_loss.end());
                             Fragment f;
                             f["phi"].push_back(RowBuilder().add(chi).add(n).add(static_cast<std::uint64_t>(ps.log2_ratios.size()))
                                                    .add(static_cast<std::uint64_t>(ps.unresolved)).add(ps.mean).add(ps.sigma)
                                                    .add(sum).add(sum_sq).add(static_cast<std::uint64_t>(ps.histogram.underflow))
                                                    .add(static_cast<std::uint64_t>(ps.histogram.overflow)).add(max_loss)
                                                    .add(mp.max_truncation_weight).finish(prov, seed));
                             const double width = (hi - lo) / bins;
                             for (int b = 0; b < bins; ++b) {
                               f["phi_hist_instance"].push_back(RowBuilder().add(chi).add(n).add(b).add(lo + b * width).add(lo + (b + 1) * width)
                                                                    .add(static_cast<std::uint64_t>(ps.histogram.counts[b])).finish(prov, seed));
                             }
                             return f;
                           }});
        }
      }
    }
    return cells;
  };
  e.aggregate = [](const json&, const Provenance& prov, const Tables& tables, const fs::path& out) {
    const CsvSchema ps = phi_schema();
    const CsvSchema hs = phi_hist_schema("phi_hist_instance");
    const TableView pv(ps, tables.at("phi"));
    const TableView hv(hs, tables.at("phi_hist_instance"));
    struct Acc {
      double pairs = 0, unresolved = 0, sum = 0, sum_sq = 0;
      std::vector<double> sigmas;
    };
    std::map<std::pair<int, int>, Acc> acc;
    for (std::size_t r = 0; r < pv.size(); ++r) {
      auto& a = acc[{static_cast<int>(pv.integer(r, "chi")), static_cast<int>(pv.integer(r, "n"))}];
      a.pairs += static_cast<double>(pv.integer(r, "pairs"));
      a.unresolved += static_cast<double>(pv.integer(r, "unresolved"));
      a.sum += pv.number(r, "sum");
      a.sum_sq += pv.number(r, "sum_sq");
      a.sigmas.push_back(pv.number(r, "sigma"));
    }
    const CsvSchema sig_schema("phi_sigma", {{"chi", C::kInt}, {"n", C::kInt}, {"sigma_pooled", C::kFloat}, {"sigma_mean", C::kFloat},
                                             {"sigma_stderr", C::kFloat}, {"pairs", C::kInt}, {"unresolved", C::kInt}});
    std::vector<Row> sig_rows;
    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_chi;
    json report = json::object();
    for (const auto& [key, a] : acc) {
      const double mean = a.pairs > 0 ? a.sum / a.pairs : kNaN;
      const double pooled = a.pairs > 0 ? std::sqrt(std::max(a.sum_sq / a.pairs - mean * mean, 0.0)) : kNaN;
      const Stats s = stats_of(a.sigmas);
      sig_rows.push_back(RowBuilder().add(key.first).add(key.second).add(pooled).add(s.mean).add(s.stderr_)
                             .add(static_cast<long long>(a.pairs)).add(static_cast<long long>(a.unresolved))
                             .finish(prov, std::string(kEnsembleSeed)));
      by_chi[key.first].first.push_back(key.second);
      by_chi[key.first].second.push_back(pooled);
      report["sigma"][std::to_string(key.first)][std::to_string(key.second)] = pooled;
    }
    write_csv(out / "phi_sigma.csv", sig_schema, sig_rows);

    const CsvSchema slope_schema("phi_slopes", {{"chi", C::kInt}, {"slope", C::kFloat}, {"intercept", C::kFloat}, {"r2", C::kFloat}});
    std::vector<Row> slope_rows;
    for (const auto& [chi, xy] : by_chi) {
      if (xy.first.size() < 2) continue;
      const LinearFit fit = linear_fit(xy.first, xy.second);
      slope_rows.push_back(RowBuilder().add(chi).add(fit.slope).add(fit.intercept).add(fit.r2).finish(prov, std::string(kEnsembleSeed)));
      report["slope"][std::to_string(chi)] = fit.slope;
    }
    write_csv(out / "phi_slopes.csv", slope_schema, slope_rows);

    std::map<std::tuple<int, int, int>, std::tuple<double, double, long long>> hist;
    for (std::size_t r = 0; r < hv.size(); ++r) {
      auto& h = hist[{static_cast<int>(hv.integer(r, "chi")), static_cast<int>(hv.integer(r, "n")), static_cast<int>(hv.integer(r, "bin"))}];
      std::get<0>(h) = hv.number(r, "lo");
      std::get<1>(h) = hv.number(r, "hi");
      std::get<2>(h) += hv.integer(r, "count");
    }
    std::vector<Row> hist_rows;
    for (const auto& [key, h] : hist) {
      hist_rows.push_back(RowBuilder().add(std::get<0>(key)).add(std::get<1>(key)).add(std::get<2>(key)).add(std::get<0>(h))
                              .add(std::get<1>(h)).add(std::get<2>(h)).finish(prov, std::string(kEnsembleSeed)));
    }
    write_csv(out / "phi_hist.csv", phi_hist_schema("phi_hist"), hist_rows);
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// tempsweep

Experiment tempsweep() {
  Experiment e;
  e.name = "tempsweep";
  e.defaults = strategy_defaults();
  e.defaults.update({{"n", 8},
                     {"instances", 100},
                     {"T_range", {0.2, 2.0, 0.2}},
                     {"strategies", {"local", "uniform", "exact", "trotter", "mps"}}});
  e.quick = {{"n", 5}, {"instances", 20}};
  e.cell_tables = {CsvSchema("tempsweep", {{"strategy", C::kString}, {"n", C::kInt}, {"T", C::kFloat}, {"delta", C::kFloat}})};
  e.validate = [](const json& cfg) {
    validate_strategies(cfg);
    require_range(cfg, "T_range");
    if (!(range_values(cfg.at("T_range")).front() > 0.0)) throw ConfigError("temperatures must be positive");
    const int n = cfg.at("n").get<int>();
    if (n < 3 || n > 10) throw ConfigError("n must lie in [3, 10]");
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    const int n = cfg.at("n").get<int>();
    for (const auto& strategy : expand_strategies(cfg)) {
      for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
        cells.push_back({cell_id({strategy, "i" + std::to_string(k)}), [=, &cfg] {
                           const std::uint64_t seed = instance_seed(cfg, k);
                           const IsingInstance inst = generate_instance(n, seed);
                           const ProposalMatrix q = strategy_proposal(strategy, inst, cfg, seed);
                           Fragment f;
                           for (double temp : range_values(cfg.at("T_range"))) {
                             const double d = strategy_gap(q, inst, temp, cfg).delta;
                             f["tempsweep"].push_back(RowBuilder().add(strategy).add(n).add(temp).add(d).finish(prov, seed));
                           }
                           return f;
                         }});
      }
    }
    return cells;
  };
  e.aggregate = [](const json&, const Provenance& prov, const Tables& tables, const fs::path& out) {
    const CsvSchema schema("tempsweep", {{"strategy", C::kString}, {"n", C::kInt}, {"T", C::kFloat}, {"delta", C::kFloat}});
    const TableView view(schema, tables.at("tempsweep"));
    std::map<std::string, std::map<double, std::vector<double>>> by;
    int n = 0;
    for (std::size_t r = 0; r < view.size(); ++r) {
      by[view.text(r, "strategy")][view.number(r, "T")].push_back(view.number(r, "delta"));
      n = static_cast<int>(view.integer(r, "n"));
    }
    const CsvSchema sum_schema("tempsweep_summary", {{"strategy", C::kString}, {"n", C::kInt}, {"T", C::kFloat},
                                                     {"delta_mean", C::kFloat}, {"delta_stderr", C::kFloat}});
    std::vector<Row> rows;
    json report = json::object();
    for (const auto& [strategy, series] : by) {
      double prev = -1.0;
      bool monotone = true;
      for (const auto& [temp, v] : series) {
        const Stats s = stats_of(v);
        rows.push_back(RowBuilder().add(strategy).add(n).add(temp).add(s.mean).add(s.stderr_).finish(prov, std::string(kEnsembleSeed)));
        monotone = monotone && s.mean >= prev;
        prev = s.mean;
      }
      report["monotone_in_T"][strategy] = monotone;
    }
    write_csv(out / "tempsweep_summary.csv", sum_schema, rows);
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// qaoa

std::vector<double> theta_values(const json& cfg) {
  const json& g = cfg.at("theta_grid");
  return ThetaGrid{g[0].get<double>(), g[1].get<double>(), static_cast<int>(g[2].get<double>()),
                   cfg.at("theta_spacing").get<std::string>() == "log"}
      .values();
}

Experiment qaoa() {
  Experiment e;
  e.name = "qaoa";
  e.defaults = {{"n_values", {3, 4, 5, 6, 7, 8, 9}}, {"instances", 100}, {"temperature", 1.0},
                {"p_values", {5, 20, 50}}, {"theta_grid", {0.005, 1.5, 121.0}}, {"theta_spacing", "log"},
                {"objective", "gap"},
                {"acceptance_steps", 4000}, {"fixed_gamma", 0.45}, {"fixed_t", 12.0}};
  e.quick = {{"n_values", {3, 4, 5, 6}}, {"instances", 10}};
  e.cell_tables = {CsvSchema("qaoa_scan", {{"n", C::kInt}, {"p", C::kInt}, {"theta", C::kFloat}, {"delta", C::kFloat}, {"acceptance_rate", C::kFloat}}),
                   CsvSchema("fixed", {{"n", C::kInt}, {"delta", C::kFloat}})};
  e.validate = [](const json& cfg) {
    const std::string obj = cfg.at("objective").get<std::string>();
    if (obj != "gap" && obj != "acceptance") throw ConfigError("objective must be 'gap' or 'acceptance'");
    if (cfg.at("theta_grid").size() != 3 || cfg.at("theta_grid")[2].get<double>() < 2) {
      throw ConfigError("theta_grid must be [start, stop, points >= 2]");
    }
    const std::string spacing = cfg.at("theta_spacing").get<std::string>();
    if (spacing != "linear" && spacing != "log") throw ConfigError("theta_spacing must be 'linear' or 'log'");
    if (spacing == "log" && !(cfg.at("theta_grid")[0].get<double>() > 0.0)) {
      throw ConfigError("log theta_spacing needs a positive start");
    }
    for (int p : ints(cfg.at("p_values"))) {
      if (p < 1) throw ConfigError("p_values must be positive");
    }
    require_gamma(cfg.at("fixed_gamma").get<double>(), "fixed_gamma");
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (int n : ints(cfg.at("n_values"))) {
      for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
        cells.push_back({cell_id({"n" + std::to_string(n), "i" + std::to_string(k)}), [=, &cfg] {
                           const std::uint64_t seed = instance_seed(cfg, k);
                           const IsingInstance inst = generate_instance(n, seed);
                           const RealVector energies = energy_table(inst);
                           const double temp = cfg.at("temperature").get<double>();
                           const bool acceptance = cfg.at("objective").get<std::string>() == "acceptance";
                           Fragment f;
                           for (int p : ints(cfg.at("p_values"))) {
                             for (double theta : theta_values(cfg)) {
                               const ProposalMatrix q = qaoa_proposal(inst, theta, p);
                               const double d = proposal_gap(q, energies, temp).delta;
                               double ar = kNaN;
                               if (acceptance) {
                                 MatrixSampler sampler(q);
                                 ar = run_chain(inst, sampler, temp, cfg.at("acceptance_steps").get<std::size_t>(),
                                                derive_seed(seed, static_cast<std::uint64_t>(p)))
                                          .acceptance_rate;
                               }
                               f["qaoa_scan"].push_back(RowBuilder().add(n).add(p).add(theta).add(d).add(ar).finish(prov, seed));
                             }
                           }
                           const double fixed = proposal_gap(exact_unitary_proposal(inst, cfg.at("fixed_gamma").get<double>(),
                                                                                    cfg.at("fixed_t").get<double>()),
                                                             energies, temp).delta;
                           f["fixed"].push_back(RowBuilder().add(n).add(fixed).finish(prov, seed));
                           return f;
                         }});
      }
    }
    return cells;
  };
  e.aggregate = [](const json& cfg, const Provenance& prov, const Tables& tables, const fs::path& out) {
    const CsvSchema ss("qaoa_scan", {{"n", C::kInt}, {"p", C::kInt}, {"theta", C::kFloat}, {"delta", C::kFloat}, {"acceptance_rate", C::kFloat}});
    const CsvSchema fs2("fixed", {{"n", C::kInt}, {"delta", C::kFloat}});
    const TableView sv(ss, tables.at("qaoa_scan"));
    const TableView fv(fs2, tables.at("fixed"));
    const bool acceptance = cfg.at("objective").get<std::string>() == "acceptance";
    std::map<std::pair<int, int>, std::map<double, std::pair<std::vector<double>, std::vector<double>>>> by;
    for (std::size_t r = 0; r < sv.size(); ++r) {
      auto& slot = by[{static_cast<int>(sv.integer(r, "n")), static_cast<int>(sv.integer(r, "p"))}][sv.number(r, "theta")];
      slot.first.push_back(sv.number(r, "delta"));
      slot.second.push_back(sv.number(r, "acceptance_rate"));
    }
    const CsvSchema best_schema("qaoa_best", {{"n", C::kInt}, {"p", C::kInt}, {"theta_best", C::kFloat}, {"objective", C::kFloat},
                                              {"delta_mean", C::kFloat}, {"delta_stderr", C::kFloat}, {"instances", C::kInt}});
    std::vector<Row> best_rows;
    std::map<std::string, std::map<int, std::vector<double>>> by_label;
    json report = json::object();
    for (const auto& [key, scan] : by) {
      const auto& [n, p] = key;
      double best_theta = kNaN, best_obj = acceptance ? 2.0 : -1.0;
      for (const auto& [theta, v] : scan) {
        const double obj = stats_of(acceptance ? v.second : v.first).mean;
        if (acceptance ? obj < best_obj : obj > best_obj) {
          best_obj = obj;
          best_theta = theta;
        }
      }
      const auto& gaps = scan.at(best_theta).first;
      const Stats s = stats_of(gaps);
      best_rows.push_back(RowBuilder().add(n).add(p).add(best_theta).add(best_obj).add(s.mean).add(s.stderr_)
                              .add(static_cast<int>(s.count)).finish(prov, std::string(kEnsembleSeed)));
      by_label["qaoa_p" + std::to_string(p)][n] = gaps;
      report["best"][std::to_string(n)][std::to_string(p)] = {{"theta", best_theta}, {"delta_mean", s.mean}, {"delta_stderr", s.stderr_}};
    }
    for (std::size_t r = 0; r < fv.size(); ++r) by_label["fixed"][static_cast<int>(fv.integer(r, "n"))].push_back(fv.number(r, "delta"));
    write_csv(out / "qaoa_best.csv", best_schema, best_rows);
    write_fits(out, prov, by_label, report);
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// schedule-bo

CsvSchema bo_history_schema() {
  return CsvSchema("bo_history", {{"n", C::kInt}, {"iteration", C::kInt}, {"theta_1", C::kFloat}, {"theta_2", C::kFloat},
                                  {"theta_3", C::kFloat}, {"theta_4", C::kFloat}, {"theta_5", C::kFloat},
                                  {"objective", C::kFloat}, {"incumbent", C::kFloat}});
}

Experiment schedule_bo() {
  Experiment e;
  e.name = "schedule-bo";
  e.defaults = {{"n_values", {3, 4, 5, 6, 7, 8, 9}}, {"instances", 20}, {"temperature", 1.0}, {"budget", 60},
                {"initial_design", 8}, {"tau", 10.0}, {"steps", 200}, {"kappa_initial", 2.5}, {"kappa_final", 0.5},
                {"candidates", 256}, {"fixed_gamma", 0.45}, {"fixed_t", 12.0}};
  e.quick = {{"n_values", {4, 5}}, {"instances", 10}, {"budget", 30}};
  e.cell_tables = {bo_history_schema(),
                   CsvSchema("bo_summary", {{"n", C::kInt}, {"optimized_gap", C::kFloat}, {"fixed_gap", C::kFloat}, {"fixed_gap_stderr", C::kFloat}})};
  e.validate = [](const json& cfg) {
    if (cfg.at("budget").get<int>() < cfg.at("initial_design").get<int>() || cfg.at("initial_design").get<int>() < 2) {
      throw ConfigError("need budget >= initial_design >= 2");
    }
    if (cfg.at("steps").get<int>() < 2 || cfg.at("steps").get<int>() % 2) throw ConfigError("steps must be even and >= 2");
    if (!(cfg.at("tau").get<double>() > 0.0)) throw ConfigError("tau must be positive");
    if (cfg.at("kappa_initial").get<double>() < 0 || cfg.at("kappa_final").get<double>() < 0) throw ConfigError("kappa must be >= 0");
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (int n : ints(cfg.at("n_values"))) {
      cells.push_back({cell_id({"n" + std::to_string(n)}), [=, &cfg] {
                         const auto ensemble = generate_ensemble(n, cfg.at("instances").get<int>(), base_seed(cfg));
                         const ScheduleObjectiveOptions opts{cfg.at("tau").get<double>(), cfg.at("steps").get<int>(),
                                                             cfg.at("temperature").get<double>()};
                         BoOptions bo{Schedule::kControlPoints, cfg.at("budget").get<int>(), cfg.at("initial_design").get<int>(),
                                      derive_seed(base_seed(cfg), static_cast<std::uint64_t>(n))};
                         AcquisitionConfig acq;
                         acq.kappa_initial = cfg.at("kappa_initial").get<double>();
                         acq.kappa_final = cfg.at("kappa_final").get<double>();
                         acq.candidates = cfg.at("candidates").get<int>();
                         const ScheduleOptimization result = optimize_schedule(ensemble, opts, bo, acq);
                         std::vector<double> fixed;
                         for (const auto& inst : ensemble) {
                           fixed.push_back(proposal_gap(exact_unitary_proposal(inst, cfg.at("fixed_gamma").get<double>(), cfg.at("fixed_t").get<double>()),
                                                        energy_table(inst), opts.temperature).delta);
                         }
                         const Stats fs3 = stats_of(fixed);
                         Fragment f;
                         for (const auto& rec : result.bo.history) {
                           RowBuilder b;
                           b.add(n).add(rec.iteration);
                           for (int d = 0; d < Schedule::kControlPoints; ++d) b.add(rec.theta(d));
                           f["bo_history"].push_back(b.add(rec.objective).add(rec.incumbent).finish(prov, std::string(kEnsembleSeed)));
                         }
                         f["bo_summary"].push_back(RowBuilder().add(n).add(result.gap).add(fs3.mean).add(fs3.stderr_).finish(prov, std::string(kEnsembleSeed)));
                         return f;
                       }});
    }
    return cells;
  };
  e.aggregate = [](const json& cfg, const Provenance&, const Tables& tables, const fs::path& out) {
    const CsvSchema hs = bo_history_schema();
    const TableView hv(hs, tables.at("bo_history"));
    std::map<int, std::pair<double, std::vector<double>>> best;
    for (std::size_t r = 0; r < hv.size(); ++r) {
      const int n = static_cast<int>(hv.integer(r, "n"));
      const double obj = hv.number(r, "objective");
      auto it = best.find(n);
      if (it == best.end() || obj > it->second.first) {
        std::vector<double> theta;
        for (int d = 1; d <= Schedule::kControlPoints; ++d) theta.push_back(hv.number(r, "theta_" + std::to_string(d)));
        best[n] = {obj, theta};
      }
    }
    json report = json::object();
    for (const auto& [n, b] : best) {
      const Schedule schedule(cfg.at("tau").get<double>(), b.second);
      write_json(out / ("best_schedule_n" + std::to_string(n) + ".json"), schedule.to_json());
      report["optimized_gap"][std::to_string(n)] = b.first;
    }
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// phase

CsvSchema phase_raw_schema() {
  return CsvSchema("phase_raw", {{"n", C::kInt}, {"gamma", C::kFloat}, {"T", C::kFloat}, {"q_ea", C::kFloat}, {"q2", C::kFloat}, {"q4", C::kFloat}});
}

Experiment phase() {
  Experiment e;
  e.name = "phase";
  e.defaults = {{"n_values", {4, 6, 8}},
                {"instances", 100},
                {"gamma_range", {0.0, 1.0, 0.02}},
                {"temperatures", {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0}},
                {"crossing_temperature", 0.05},
                {"projector_check", true}};
  e.quick = {{"n_values", {4, 6}}, {"instances", 20}, {"temperatures", {0.05, 0.5, 1.0}}};
  e.cell_tables = {phase_raw_schema()};
  e.validate = [](const json& cfg) {
    require_range(cfg, "gamma_range");
    const auto temps = doubles(cfg.at("temperatures"));
    if (temps.empty()) throw ConfigError("temperatures must not be empty");
    for (double t : temps) {
      if (!(t > 0.0)) throw ConfigError("temperatures must be positive (T = 0 comes from projector_check)");
    }
    const double tc = cfg.at("crossing_temperature").get<double>();
    if (std::find(temps.begin(), temps.end(), tc) == temps.end()) {
      throw ConfigError("crossing_temperature must be one of temperatures");
    }
    if (cfg.at("n_values").size() < 2) spdlog::warn("one size only: no Binder crossing will be reported");
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (int n : ints(cfg.at("n_values"))) {
      for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
        cells.push_back({cell_id({"n" + std::to_string(n), "i" + std::to_string(k)}), [=, &cfg] {
                           const std::uint64_t seed = instance_seed(cfg, k);
                           const IsingInstance inst = generate_instance(n, seed);
                           const RealVector energies = energy_table(inst);
                           const double alpha = scale_factor_alpha(inst);
                           std::vector<double> temps;
                           if (cfg.at("projector_check").get<bool>()) temps.push_back(0.0);
                           for (double t : doubles(cfg.at("temperatures"))) temps.push_back(t);
                           Fragment f;
                           for (double gamma : range_values(cfg.at("gamma_range"))) {
                             Eigen::SelfAdjointEigenSolver<RealMatrix> solver(assemble_hamiltonian(energies, alpha, gamma).dense());
                             if (solver.info() != Eigen::Success) throw NumericalError("phase: eigensolver failed");
                             for (double temp : temps) {
                               const GibbsState rho(solver.eigenvalues(), solver.eigenvectors(), temp);
                               const InstanceMoments m = moments_from_populations(rho.diagonal(), n);
                               f["phase_raw"].push_back(RowBuilder().add(n).add(gamma).add(temp).add(m.q_ea).add(m.q2).add(m.q4).finish(prov, seed));
                             }
                           }
                           return f;
                         }});
      }
    }
    return cells;
  };
  e.aggregate = [](const json& cfg, const Provenance& prov, const Tables& tables, const fs::path& out) {
    const CsvSchema rs = phase_raw_schema();
    const TableView rv(rs, tables.at("phase_raw"));
    std::map<std::tuple<int, double, double>, std::vector<InstanceMoments>> by;
    for (std::size_t r = 0; r < rv.size(); ++r) {
      by[{static_cast<int>(rv.integer(r, "n")), rv.number(r, "gamma"), rv.number(r, "T")}].push_back(
          InstanceMoments{rv.number(r, "q_ea"), rv.number(r, "q2"), rv.number(r, "q4")});
    }
    const CsvSchema ps("phase", {{"n", C::kInt}, {"gamma", C::kFloat}, {"T", C::kFloat}, {"q_mean", C::kFloat}, {"q_stderr", C::kFloat},
                                 {"g_mean", C::kFloat}, {"g_stderr", C::kFloat}, {"instances_used", C::kInt}});
    std::vector<Row> rows;
    std::map<double, std::map<int, Curve>> curves;  // T -> n -> g(gamma)
    for (const auto& [key, moments] : by) {
      const auto& [n, gamma, temp] = key;
      std::vector<double> qs;
      for (const auto& m : moments) qs.push_back(m.q_ea);
      const Stats q = stats_of(qs);
      const BinderResult g = binder_from_moments(moments);
      rows.push_back(RowBuilder().add(n).add(gamma).add(temp).add(q.mean).add(q.stderr_).add(g.g).add(g.stderr_).add(g.used)
                         .finish(prov, std::string(kEnsembleSeed)));
      curves[temp][n].gammas.push_back(gamma);
      curves[temp][n].values.push_back(g.g);
    }
    write_csv(out / "phase.csv", ps, rows);

    const CsvSchema cs("binder_crossing", {{"T", C::kFloat}, {"n_a", C::kInt}, {"n_b", C::kInt}, {"gamma", C::kFloat}});
    std::vector<Row> crossing_rows;
    json report = json::object();
    const double tc = cfg.at("crossing_temperature").get<double>();
    for (const auto& [temp, by_n] : curves) {
      if (by_n.size() < 2) continue;
      const auto c = find_crossing(by_n);
      if (!c) continue;
      for (const auto& p : c->pairs) {
        crossing_rows.push_back(RowBuilder().add(temp).add(p.n_a).add(p.n_b).add(p.gamma).finish(prov, std::string(kEnsembleSeed)));
      }
      const json entry = {{"T", temp}, {"gamma_c", c->gamma_c}, {"uncertainty", c->uncertainty}};
      if (temp == tc) report["crossing"] = entry;
      if (temp == 0.0) report["projector_crossing"] = entry;
    }
    write_csv(out / "binder_crossing.csv", cs, crossing_rows);
    write_json(out / "report.json", report);
  };
  return e;
}

// ---------------------------------------------------------------------------
// thresholds

Experiment thresholds() {
  Experiment e;
  e.name = "thresholds";
  e.defaults = {{"k_c", 0.94}, {"k_q", 0.264}, {"k_qi", 0.264}, {"alphas", {4.0, 3.0, 2.0}},
                {"classical_updates_log10", 18.0}, {"month_days", 30.0}, {"runtime_ratios", {1e3, 1e6, 1e9}},
                {"mps_steps", 15}, {"mps_chi", 4}, {"cost_sizes", {3, 4, 5, 6, 7, 8, 9}}, {"scaling_csv", ""}};
  e.quick = json::object();
  e.cell_tables = {CsvSchema("samples_budget", {{"alpha", C::kFloat}, {"samples_log10", C::kFloat}, {"samples", C::kFloat}, {"seconds_per_step", C::kFloat}}),
                   CsvSchema("thresholds", {{"label", C::kString}, {"k_c", C::kFloat}, {"k_q", C::kFloat}, {"runtime_ratio", C::kFloat},
                                            {"n_threshold", C::kFloat}, {"iterations", C::kInt}, {"converged", C::kInt}}),
                   CsvSchema("cost_table", {{"proposal", C::kString}, {"n", C::kInt}, {"chi", C::kInt}, {"m", C::kInt}, {"memory", C::kFloat}, {"time", C::kFloat}}),
                   CsvSchema("swap_counts", {{"n", C::kInt}, {"direct", C::kInt}, {"closed_form", C::kFloat}, {"printed_form", C::kFloat}})};
  e.validate = [](const json& cfg) {
    for (double a : doubles(cfg.at("alphas"))) {
      if (!(a > 0.0)) throw ConfigError("alphas must be positive");
    }
    for (int n : ints(cfg.at("cost_sizes"))) {
      if (n < 2) throw ConfigError("cost_sizes must be >= 2");
    }
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    return std::vector<Cell>{{"report", [&cfg, prov] {
      double k_c = cfg.at("k_c").get<double>();
      double k_q = cfg.at("k_q").get<double>();
      double k_qi = cfg.at("k_qi").get<double>();
      const int chi = cfg.at("mps_chi").get<int>();
      const int m = cfg.at("mps_steps").get<int>();
      const std::string scaling_csv = cfg.at("scaling_csv").get<std::string>();
      if (!scaling_csv.empty()) {
        // Exponents from a scaling campaign: classical = slower of local/uniform.
        const CsvSchema fit_schema("fits", {{"strategy", C::kString}, {"k", C::kFloat}, {"k_stderr", C::kFloat}, {"prefactor", C::kFloat},
                                            {"r2", C::kFloat}, {"sizes", C::kString}, {"excluded", C::kString}});
        const auto rows = read_csv(scaling_csv, fit_schema);
        const TableView v(fit_schema, rows);
        std::map<std::string, double> k;
        for (std::size_t r = 0; r < v.size(); ++r) k[v.text(r, "strategy")] = v.number(r, "k");
        if (k.count("local") && k.count("uniform")) k_c = std::min(k["local"], k["uniform"]);
        if (k.count("exact")) k_q = k["exact"];
        if (k.count("mps_chi" + std::to_string(chi))) k_qi = k["mps_chi" + std::to_string(chi)];
      }
      const std::string ens(kEnsembleSeed);
      Fragment f;
      const double month = cfg.at("month_days").get<double>() * 86400.0;
      for (double a : doubles(cfg.at("alphas"))) {
        const double lg = cfg.at("classical_updates_log10").get<double>() / a;
        const double samples = std::pow(10.0, lg);
        f["samples_budget"].push_back(RowBuilder().add(a).add(lg).add(samples).add(month / samples).finish(prov, ens));
      }
      for (double ratio : doubles(cfg.at("runtime_ratios"))) {
        const ThresholdResult t = threshold_size(k_c, k_q, ratio);
        f["thresholds"].push_back(RowBuilder().add(std::string("quantum")).add(k_c).add(k_q).add(ratio).add(t.n_threshold)
                                      .add(t.iterations).add(t.converged ? 1 : 0).finish(prov, ens));
      }
      const ThresholdResult qi = quantum_inspired_threshold(k_c, k_qi, m, chi);
      f["thresholds"].push_back(RowBuilder().add(std::string("quantum_inspired")).add(k_c).add(k_qi).add(kNaN).add(qi.n_threshold)
                                    .add(qi.iterations).add(qi.converged ? 1 : 0).finish(prov, ens));
      for (int n : ints(cfg.at("cost_sizes"))) {
        for (CostProposal p : {CostProposal::kLocal, CostProposal::kUniform, CostProposal::kMps}) {
          const CostEstimate c = cost_model(p, n, chi, m);
          f["cost_table"].push_back(RowBuilder().add(std::string(to_string(p))).add(n).add(chi).add(m).add(c.memory).add(c.time).finish(prov, ens));
        }
        f["swap_counts"].push_back(RowBuilder().add(n).add(static_cast<long long>(swap_count(n))).add(swap_count_closed_form(n))
                                       .add(swap_count_printed_form(n)).finish(prov, ens));
      }
      return f;
    }}};
  };
  e.aggregate = [](const json&, const Provenance&, const Tables& tables, const fs::path& out) {
    const CsvSchema bs("samples_budget", {{"alpha", C::kFloat}, {"samples_log10", C::kFloat}, {"samples", C::kFloat}, {"seconds_per_step", C::kFloat}});
    const CsvSchema ts("thresholds", {{"label", C::kString}, {"k_c", C::kFloat}, {"k_q", C::kFloat}, {"runtime_ratio", C::kFloat},
                                      {"n_threshold", C::kFloat}, {"iterations", C::kInt}, {"converged", C::kInt}});
    const TableView bv(bs, tables.at("samples_budget"));
    const TableView tv(ts, tables.at("thresholds"));
    json report = json::object();
    std::string text = "Sampling budget per month\n";
    for (std::size_t r = 0; r < bv.size(); ++r) {
      report["samples_budget"].push_back({{"alpha", bv.number(r, "alpha")}, {"samples", bv.number(r, "samples")},
                                          {"seconds_per_step", bv.number(r, "seconds_per_step")}});
      char line[160];
      std::snprintf(line, sizeof line, "  alpha=%g: 10^%.2f samples, one step every %.4g s\n", bv.number(r, "alpha"),
                    bv.number(r, "samples_log10"), bv.number(r, "seconds_per_step"));
      text += line;
    }
    text += "Crossover sizes\n";
    for (std::size_t r = 0; r < tv.size(); ++r) {
      report["thresholds"].push_back({{"label", tv.text(r, "label")}, {"k_c", tv.number(r, "k_c")}, {"k_q", tv.number(r, "k_q")},
                                      {"runtime_ratio", tv.number(r, "runtime_ratio")}, {"n_threshold", tv.number(r, "n_threshold")},
                                      {"converged", tv.integer(r, "converged") == 1}});
      char line[200];
      std::snprintf(line, sizeof line, "  %s: k_c=%.4g k=%.4g ratio=%.4g -> n > %.4g\n", tv.text(r, "label").c_str(),
                    tv.number(r, "k_c"), tv.number(r, "k_q"), tv.number(r, "runtime_ratio"), tv.number(r, "n_threshold"));
      text += line;
    }
    write_json(out / "thresholds.json", report);
    std::ofstream(out / "thresholds.txt", std::ios::trunc) << text;
  };
  return e;
}

// ---------------------------------------------------------------------------
// chain-run

Experiment chain_run() {
  Experiment e;
  e.name = "chain-run";
  e.defaults = strategy_defaults();
  e.defaults.update({{"n_values", {6}}, {"instances", 1}, {"temperature", 1.0}, {"strategy", "exact"}, {"chi", 4},
                     {"steps", 10000}, {"initial", 0}});
  e.defaults.erase("chi_values");
  e.quick = {{"steps", 2000}};
  e.cell_tables = {CsvSchema("trace", {{"n", C::kInt}, {"step", C::kInt}, {"state", C::kInt}, {"energy", C::kFloat}, {"accepted", C::kInt}}),
                   CsvSchema("chain_summary", {{"n", C::kInt}, {"strategy", C::kString}, {"steps", C::kInt}, {"acceptance_rate", C::kFloat},
                                               {"tv_distance", C::kFloat}, {"delta", C::kFloat}})};
  e.validate = [](const json& cfg) {
    const std::string s = cfg.at("strategy").get<std::string>();
    if (!kStrategies.count(s)) throw ConfigError("unknown strategy '" + s + "'");
    if (cfg.at("steps").get<int>() < 1) throw ConfigError("steps must be positive");
    if (cfg.at("chi").get<int>() < 1) throw ConfigError("chi must be positive");
    require_gamma(cfg.at("gamma").get<double>(), "gamma");
    for (int n : ints(cfg.at("n_values"))) {
      if (cfg.at("initial").get<std::uint64_t>() >= dimension_of(n)) throw ConfigError("initial state out of range");
    }
  };
  e.cells = [](const json& cfg, const Provenance& prov) {
    std::vector<Cell> cells;
    for (int n : ints(cfg.at("n_values"))) {
      for (int k = 0; k < cfg.at("instances").get<int>(); ++k) {
        cells.push_back({cell_id({"n" + std::to_string(n), "i" + std::to_string(k)}), [=, &cfg] {
                           const std::uint64_t seed = instance_seed(cfg, k);
                           const IsingInstance inst = generate_instance(n, seed);
                           const double temp = cfg.at("temperature").get<double>();
                           std::string strategy = cfg.at("strategy").get<std::string>();
                           if (strategy == "mps") strategy = "mps_chi" + std::to_string(cfg.at("chi").get<int>());
                           const ProposalMatrix q = strategy_proposal(strategy, inst, cfg, seed);
                           std::unique_ptr<ProposalSampler> sampler;
                           if (strategy == "local") {
                             sampler = std::make_unique<LocalSampler>(n);
                           } else if (strategy == "uniform") {
                             sampler = std::make_unique<UniformSampler>(n);
                           } else {
                             sampler = std::make_unique<MatrixSampler>(q);
                           }
                           const auto steps = cfg.at("steps").get<std::size_t>();
                           const ChainTrace trace = run_chain(inst, *sampler, temp, steps, derive_seed(seed, 1),
                                                              cfg.at("initial").get<StateIndex>());
                           const RealVector energies = energy_table(inst);
                           const BoltzmannTarget target = boltzmann_from_energies(energies, temp);
                           RealVector hist = RealVector::Zero(energies.size());
                           Fragment f;
                           for (std::size_t s = 0; s < trace.states.size(); ++s) {
                             const StateIndex st = trace.states[s];
                             hist(st) += 1.0;
                             f["trace"].push_back(RowBuilder().add(n).add(static_cast<std::uint64_t>(s + 1)).add(static_cast<std::uint64_t>(st))
                                                      .add(energies(st)).add(trace.accepted[s] ? 1 : 0).finish(prov, seed));
                           }
                           hist /= static_cast<double>(trace.states.size());
                           const double tv = 0.5 * (hist - target.probabilities).cwiseAbs().sum();
                           const double delta = strategy_gap(q, inst, temp, cfg).delta;
                           f["chain_summary"].push_back(RowBuilder().add(n).add(strategy).add(static_cast<std::uint64_t>(steps))
                                                            .add(trace.acceptance_rate).add(tv).add(delta).finish(prov, seed));
                           return f;
                         }});
      }
    }
    return cells;
  };
  return e;
}

}  // namespace

const std::vector<Experiment>& experiments() {
  static const std::vector<Experiment> all = {gridsearch(), scaling(), hittime(), trotter(), phi(), tempsweep(),
                                              qaoa(), schedule_bo(), phase(), thresholds(), chain_run()};
  return all;
}

}  // namespace qemc::campaign
