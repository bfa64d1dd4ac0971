#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "qemc/campaign.hpp"

using namespace qemc::campaign;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qemc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("scaling fit") {
  std::map<int, std::vector<double>> gaps;
  for (int n = 3; n <= 9; ++n) gaps[n] = {std::pow(2.0, -0.5 * n) * 0.9, std::pow(2.0, -0.5 * n) * 1.1};
  const ScalingFit f = fit_scaling(gaps);
  CHECK(f.k == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f.prefactor == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0));
  CHECK(f.sizes.size() == 7u);

  gaps[10] = {0.0, 0.0};
  const ScalingFit g = fit_scaling(gaps);
  CHECK(g.excluded == std::vector<int>{10});
  CHECK(g.k == doctest::Approx(0.5).epsilon(1e-12));

  std::map<int, std::vector<double>> few{{3, {0.5}}, {4, {0.3}}, {5, {0.0}}, {6, {0.1}}};
  CHECK_THROWS_AS(fit_scaling(few), std::invalid_argument);
}

TEST_CASE("linear fit and ranges") {
  const std::vector<double> x{0, 1, 2, 3};
  const std::vector<double> y{1, 3, 5, 7};
  const LinearFit f = linear_fit(x, y);
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.slope_stderr == doctest::Approx(0.0).epsilon(1e-12));

  const std::vector<double> r = range_values(json::array({0.0, 1.0, 0.02}));
  CHECK(r.size() == 51u);
  CHECK(r[7] == 0.14);
  CHECK(r.back() == 1.0);
  CHECK_THROWS_AS(range_values(json::array({0.0, 1.0, 0.0})), ConfigError);
  CHECK_THROWS_AS(range_values(json::array({1.0, 0.0})), ConfigError);
}

TEST_CASE("hitting time") {
  std::vector<double> ts, vs;
  for (int k = 0; k <= 40; ++k) {
    ts.push_back(0.5 * k);
    vs.push_back(std::min(0.02, ts.back() / 1000.0));
  }
  CHECK(hitting_time(ts, vs, 0.01).value() == doctest::Approx(10.0));
  CHECK(hitting_time(ts, vs, 0.0).value() == 0.0);
  CHECK_FALSE(hitting_time(ts, vs, 0.5).has_value());
}

TEST_CASE("CSV I/O") {
  const CsvSchema schema("t", {{"n", ColumnType::kInt},
                               {"delta", ColumnType::kFloat},
                               {"strategy", ColumnType::kString}});
  CHECK(schema.columns().size() == 7u);
  const Provenance prov{7, "v1", "abc"};
  std::vector<Row> rows{RowBuilder().add(3).add(0.1).add(std::string("local")).finish(prov, std::uint64_t{11}),
                        RowBuilder().add(4).add(1.0 / 3.0).add(std::string("exact")).finish(prov, std::string(kEnsembleSeed))};
  const fs::path dir = scratch("csv");
  fs::create_directories(dir);
  write_csv(dir / "t.csv", schema, rows);
  const std::vector<Row> back = read_csv(dir / "t.csv", schema);
  CHECK(back == rows);
  const TableView view(schema, back);
  CHECK(view.number(1, "delta") == 1.0 / 3.0);
  CHECK(view.integer(0, "n") == 3);
  CHECK(view.text(1, "instance_seed") == "*");

  CHECK_THROWS(schema.validate(Row{"3", "x", "local", "7", "1", "v1", "abc"}));
  CHECK_THROWS(schema.validate(Row{"3"}));
  CHECK_THROWS(schema.index_of("missing"));
  fs::remove_all(dir);
}

TEST_CASE("number formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(parse_double(format_double(v)) == v);
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(std::isnan(parse_double("nan")));
  CHECK(parse_double("-inf") == -std::numeric_limits<double>::infinity());
}

TEST_CASE("SHA-256 known answer") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("configuration resolution") {
  const Experiment& e = find_experiment("scaling");
  RunOptions opt;
  opt.out = "/tmp/x";
  SUBCASE("defaults validate for every experiment") {
    for (const auto& ex : experiments()) {
      CHECK_NOTHROW(resolve_config(ex, json(), opt));
      RunOptions quick = opt;
      quick.quick = true;
      CHECK_NOTHROW(resolve_config(ex, json(), quick));
    }
  }
  SUBCASE("unknown keys and wrong types") {
    CHECK_THROWS_AS(resolve_config(e, json{{"bogus", 1}}, opt), ConfigError);
    CHECK_THROWS_AS(resolve_config(e, json{{"instances", "many"}}, opt), ConfigError);
    CHECK_THROWS_AS(resolve_config(e, json{{"instances", 0}}, opt), ConfigError);
    CHECK_THROWS_AS(resolve_config(e, json{{"experiment", "phase"}}, opt), ConfigError);
    CHECK_THROWS_AS(resolve_config(e, json::array(), opt), ConfigError);
    CHECK_THROWS_AS(resolve_config(e, json(), RunOptions{}), ConfigError);
  }
  SUBCASE("precedence: defaults, quick, user file, flags") {
    RunOptions quick = opt;
    quick.quick = true;
    CHECK(resolve_config(e, json(), opt).at("instances") == 100);
    CHECK(resolve_config(e, json(), quick).at("instances") == 20);
    CHECK(resolve_config(e, json{{"instances", 5}}, quick).at("instances") == 5);
    quick.seed = 42;
    CHECK(resolve_config(e, json{{"base_seed", 9}}, quick).at("base_seed") == 42);
  }
  SUBCASE("hash ignores output location and job count") {
    json a = resolve_config(e, json(), opt);
    json b = a;
    b["out"] = "/elsewhere";
    b["jobs"] = 3;
    CHECK(config_hash(a) == config_hash(b));
    b["base_seed"] = 2;
    CHECK(config_hash(a) != config_hash(b));
  }
}

TEST_CASE("campaigns are reproducible across output directories") {
  const Experiment& e = find_experiment("scaling");
  const json user{{"n_values", {3, 4, 5, 6}}, {"instances", 2}, {"strategies", {"local", "exact"}}};
  std::vector<fs::path> dirs{scratch("det_a"), scratch("det_b")};
  for (const auto& d : dirs) {
    RunOptions opt;
    opt.out = d;
    opt.jobs = 1;
    const CampaignOutcome o = run_campaign(e, resolve_config(e, user, opt));
    CHECK(o.exit_code == kExitOk);
    CHECK(o.failed == 0u);
  }
  for (const char* f : {"gaps.csv", "gap_summary.csv", "fits.csv"}) {
    CHECK(fs::exists(dirs[0] / f));
    CHECK(slurp(dirs[0] / f) == slurp(dirs[1] / f));
  }
  SUBCASE("a completed campaign resumes without recomputing") {
    RunOptions opt;
    opt.out = dirs[0];
    const CampaignOutcome again = run_campaign(e, resolve_config(e, user, opt));
    CHECK(again.skipped == again.cells);
  }
  for (const auto& d : dirs) fs::remove_all(d);
}
