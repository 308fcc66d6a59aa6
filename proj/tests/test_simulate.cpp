#include <doctest.h>

#include <cmath>
#include <set>
#include <fstream>

#include <nlohmann/json.hpp>

#include "spcpool/errors.hpp"
#include "spcpool/ingest.hpp"
#include "spcpool/simulate.hpp"
#include "test_support.hpp"

using namespace spcpool;
using testsup::PortfolioBuilder;

namespace {

Scenario tiny_scenario() {
  Scenario s;
  s.factor_names = {"tool", "line"};
  ScenarioProduct a;
  a.product_id = "A";
  a.mu = 100.0;
  a.sigma = 4.0;
  for (int i = 0; i < 40; ++i)
    a.lots.push_back({"A-" + std::to_string(100 + i),
                      make_date(2025, 1, 1) + std::chrono::days{2 * i},
                      {i % 2 ? "t1" : "t2", "l1"}});
  ScenarioProduct b;
  b.product_id = "B";
  b.mu = -5.0;
  b.sigma = 0.5;
  for (int i = 0; i < 40; ++i)
    b.lots.push_back({"B-" + std::to_string(100 + i),
                      make_date(2025, 1, 2) + std::chrono::days{2 * i},
                      {"t1", "l2"}});
  s.products = {a, b};
  s.outlier_prob = 0.01;
  s.outlier_sd_multiple = 25.0;
  return s;
}

}  // namespace

TEST_CASE("synth_portfolio shape and determinism") {
  SynthSpec spec;
  spec.n_products = 147;
  spec.seed = 3;
  Portfolio p = synth_portfolio(spec);
  CHECK(p.products.size() == 147);

  std::size_t under10 = 0, max_lots = 0;
  for (const auto& [id, idx] : p.products) {
    if (idx.size() < 10) ++under10;
    max_lots = std::max(max_lots, idx.size());
    CHECK(idx.size() >= 2);
  }
  CHECK(under10 * 2 > p.products.size());  // majority below 10 lots
  CHECK(max_lots <= 173);

  // Constant-within-product vs per-lot factors.
  const auto& first = *p.products.begin();
  std::set<std::string> tools, operators;
  std::size_t tool_col = 0, op_col = 0;
  for (std::size_t f = 0; f < p.factor_names.size(); ++f) {
    if (p.factor_names[f] == "tooling") tool_col = f;
    if (p.factor_names[f] == "operator") op_col = f;
  }
  for (std::size_t i : first.second) {
    tools.insert(p.observations[i].factors[tool_col]);
    operators.insert(p.observations[i].factors[op_col]);
  }
  CHECK(tools.size() == 1);
  if (first.second.size() > 8) CHECK(operators.size() > 1);

  // Bytewise determinism under the same seed.
  testsup::TempDir dir("synth_det");
  save_portfolio(p, dir.path() / "a.csv");
  save_portfolio(synth_portfolio(spec), dir.path() / "b.csv");
  std::ifstream fa(dir.path() / "a.csv"), fb(dir.path() / "b.csv");
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(ca == cb);

  SynthSpec one;
  one.n_products = 1;
  one.lot_counts = {0.5, 5, 5, 0.0, 5, 5};
  Portfolio single = synth_portfolio(one);
  CHECK(single.size() == 5);
  CHECK(single.products.size() == 1);
}

TEST_CASE("fit_scenario estimates and drops") {
  PortfolioBuilder b;
  b.factors({"tool"});
  b.lot("A", "L1", "2025-01-01", 10, {"t1"});
  b.lot("A", "L2", "2025-01-02", 12, {"t1"});
  b.lot("A", "L3", "2025-01-03", 14, {"t1"});
  b.lot("solo", "L1", "2025-01-04", 7, {"t2"});
  Portfolio p = b.build();

  std::vector<std::string> dropped;
  Scenario s = fit_scenario(p, &dropped);
  REQUIRE(s.products.size() == 1);
  CHECK(s.products[0].product_id == "A");
  CHECK(s.products[0].mu == doctest::Approx(12.0));
  CHECK(s.products[0].sigma ==
        doctest::Approx(robust_std_dev(testsup::vec({10, 12, 14}))));
  CHECK(s.products[0].lots.size() == 3);
  REQUIRE(dropped.size() == 1);
  CHECK(dropped[0].find("solo") != std::string::npos);

  PortfolioBuilder lonely;
  lonely.lot("x", "L1", "2025-01-01", 0);
  Portfolio lp = lonely.build();
  CHECK_THROWS_AS(fit_scenario(lp), DomainError);
}

TEST_CASE("simulate_stable: determinism and moments") {
  Scenario s = tiny_scenario();
  Portfolio p1 = simulate_stable(s, false, 42);
  Portfolio p2 = simulate_stable(s, false, 42);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i)
    CHECK(p1.observations[i].value == p2.observations[i].value);
  CHECK(simulate_stable(s, false, 43).observations[0].value != p1.observations[0].value);

  // Moments: no outliers.
  Scenario big = tiny_scenario();
  big.products[0].lots.clear();
  for (int i = 0; i < 10000; ++i)
    big.products[0].lots.push_back({"A-" + std::to_string(100000 + i),
                                    make_date(2025, 1, 1) + std::chrono::days{i % 365},
                                    {"t1", "l1"}});
  big.products.resize(1);
  Portfolio mp = simulate_stable(big, false, 7);
  Eigen::VectorXd vals(static_cast<Eigen::Index>(mp.size()));
  for (std::size_t i = 0; i < mp.size(); ++i)
    vals[static_cast<Eigen::Index>(i)] = mp.observations[i].value;
  CHECK(vals.mean() == doctest::Approx(100.0).epsilon(0.03));
  CHECK(sample_std_dev(vals) == doctest::Approx(4.0).epsilon(0.03));

  // Guaranteed outliers: variance adds (multiple^2) sigma^2.
  big.outlier_prob = 1.0;
  Portfolio op = simulate_stable(big, true, 7);
  for (std::size_t i = 0; i < op.size(); ++i)
    vals[static_cast<Eigen::Index>(i)] = op.observations[i].value;
  double expected_sd = 4.0 * std::sqrt(1.0 + 625.0);
  CHECK(sample_std_dev(vals) == doctest::Approx(expected_sd).epsilon(0.05));
}

TEST_CASE("inject_root_cause shifts exactly the matching phase-II lots") {
  Scenario s = tiny_scenario();
  Portfolio p = simulate_stable(s, false, 5);
  RootCause rc{"C", "tool", "t1", {2, 4, 6, 8}};

  Portfolio same = inject_root_cause(p, s, rc, 0.0, 0.75);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(same.observations[i].value == p.observations[i].value);

  Portfolio shifted = inject_root_cause(p, s, rc, 4.0, 0.75);
  auto n1 = static_cast<std::size_t>(std::floor(0.75 * static_cast<double>(p.size())));
  std::size_t affected = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    double delta = shifted.observations[i].value - p.observations[i].value;
    bool match = p.observations[i].factors[0] == "t1" && i >= n1;
    if (match) {
      ++affected;
      double sigma = p.observations[i].product_id == "A" ? 4.0 : 0.5;
      CHECK(delta == doctest::Approx(4.0 * sigma));
    } else {
      CHECK(delta == 0.0);
    }
  }
  CHECK(affected > 0);

  CHECK_THROWS_AS(inject_root_cause(p, s, RootCause{"X", "nope", "t1", {2}}, 2.0, 0.75),
                  DomainError);
  CHECK_THROWS_AS(inject_root_cause(p, s, RootCause{"X", "tool", "missing_level", {2}}, 2.0, 0.75),
                  DomainError);
}

TEST_CASE("footprint helpers") {
  Scenario s = tiny_scenario();
  auto fp = factor_level_footprint(s, "tool");
  CHECK(fp.at("t1") == 60);  // 20 of A + all 40 of B
  CHECK(fp.at("t2") == 20);
  CHECK(affected_lot_count(s, RootCause{"A", "tool", "t2", {}}) == 20);

  // Under a roughly uniform schedule, a quarter of a cause's footprint
  // lands in phase II.
  Portfolio p = simulate_stable(s, false, 77);
  Portfolio shifted = inject_root_cause(p, s, RootCause{"C", "tool", "t1", {}}, 1.0, 0.75);
  std::size_t affected = 0;
  for (std::size_t i = 0; i < p.size(); ++i)
    if (shifted.observations[i].value != p.observations[i].value) ++affected;
  CHECK(affected >= 8);
  CHECK(affected <= 25);  // ~60/4 for this schedule
}

TEST_CASE("arl_study reproduces the textbook ARL on one clean product") {
  // Single product, plenty of lots: the pooled chart is a plain
  // individuals chart of N(0,1)-ish standardized values, so the stable
  // ARL must come out near 370.
  Scenario s;
  s.factor_names = {"tool"};
  s.outlier_prob = 0.0;
  ScenarioProduct p;
  p.product_id = "only";
  p.mu = 10.0;
  p.sigma = 2.0;
  const int n_lots = 40000;
  p.lots.reserve(n_lots);
  for (int i = 0; i < n_lots; ++i)
    p.lots.push_back({"L" + std::to_string(1000000 + i),
                      make_date(2025, 1, 1) + std::chrono::days{i / 150},
                      {"t1"}});
  s.products.push_back(std::move(p));

  ArlStudyConfig cfg;
  cfg.n_sim = 20;
  cfg.master_seed = 777;
  cfg.grid.centers = {CenterMethod::Mean};
  cfg.grid.scales = {ScaleMethod::std_dev()};
  ArlReport r = arl_study(s, cfg);
  const ArlCell* cell =
      r.find(ChartKind::Ir, CenterMethod::Mean, ScaleMethod::Kind::StdDev, kStableCellId, 0.0);
  REQUIRE(cell);
  REQUIRE(cell->arl.has_value());
  CHECK(cell->n_signals > 2000);
  CHECK(*cell->arl == doctest::Approx(370.4).epsilon(0.05));
}

TEST_CASE("arl_study: determinism, zero-shift equality, thread independence") {
  Scenario s = tiny_scenario();
  RootCause rc{"C", "tool", "t1", {4}};

  ArlStudyConfig cfg;
  cfg.n_sim = 24;
  cfg.master_seed = 300;
  cfg.grid.centers = {CenterMethod::Median};
  cfg.grid.scales = {ScaleMethod::robust_std_dev(), ScaleMethod::std_dev()};
  cfg.charts = {ChartKind::Ir, ChartKind::Ewma};
  cfg.root_causes = {rc};
  cfg.n_threads = 4;

  ArlReport r1 = arl_study(s, cfg);
  ArlReport r2 = arl_study(s, cfg);
  REQUIRE(r1.keys.size() == r2.keys.size());
  for (std::size_t i = 0; i < r1.cells.size(); ++i) {
    CHECK(r1.cells[i].arl.has_value() == r2.cells[i].arl.has_value());
    if (r1.cells[i].arl) CHECK(*r1.cells[i].arl == *r2.cells[i].arl);
    CHECK(r1.cells[i].n_signals == r2.cells[i].n_signals);
  }

  // Single-threaded run must give bit-identical cells.
  ArlStudyConfig cfg1 = cfg;
  cfg1.n_threads = 1;
  ArlReport r3 = arl_study(s, cfg1);
  for (std::size_t i = 0; i < r1.cells.size(); ++i)
    if (r1.cells[i].arl) CHECK(*r1.cells[i].arl == *r3.cells[i].arl);

  // The stable cell does not depend on which causes are in the study.
  ArlStudyConfig cfg_nocause = cfg;
  cfg_nocause.root_causes.clear();
  ArlReport r4 = arl_study(s, cfg_nocause);
  const ArlCell* c1 = r1.find(ChartKind::Ir, CenterMethod::Median,
                              ScaleMethod::Kind::RobustStdDev, kStableCellId, 0.0);
  const ArlCell* c4 = r4.find(ChartKind::Ir, CenterMethod::Median,
                              ScaleMethod::Kind::RobustStdDev, kStableCellId, 0.0);
  REQUIRE(c1);
  REQUIRE(c4);
  CHECK(c1->arl.has_value() == c4->arl.has_value());
  if (c1->arl) CHECK(*c1->arl == *c4->arl);

  // Keys cover baseline + one shifted cell per chart and method.
  CHECK(r1.keys.size() == 2 * 2 * 2);
}

TEST_CASE("arl_study matches simulate_stable's value stream") {
  // The engine redraws values through the same shared path; a portfolio
  // simulated with the replicate-0 seed must match what the engine saw.
  Scenario s = tiny_scenario();
  s.outlier_prob = 0.0;
  Portfolio p = simulate_stable(s, true, Rng::derive(123, 0));

  ArlStudyConfig cfg;
  cfg.n_sim = 1;
  cfg.master_seed = 123;
  cfg.grid.centers = {CenterMethod::Mean};
  cfg.grid.scales = {ScaleMethod::std_dev()};
  cfg.stable_eval = StableEvaluation::FullSeries;
  ArlReport r = arl_study(s, cfg);

  // Oracle: standardize + chart + run lengths by the public one-shot path.
  StandardizedSeries series = standardize(p, CenterMethod::Mean, ScaleMethod::std_dev());
  IrChart chart = ir_chart(series.values);
  RunLengthStats stats = run_lengths(chart.flags);

  const ArlCell* cell = r.find(ChartKind::Ir, CenterMethod::Mean, ScaleMethod::Kind::StdDev,
                               kStableCellId, 0.0);
  REQUIRE(cell);
  CHECK(cell->n_signals == stats.n_signals);
  CHECK(cell->arl.has_value() == stats.arl.has_value());
  if (stats.arl) CHECK(*cell->arl == doctest::Approx(*stats.arl).epsilon(1e-12));
}

TEST_CASE("arl_study phase-split stable evaluation is reachable") {
  Scenario s = tiny_scenario();
  ArlStudyConfig cfg;
  cfg.n_sim = 16;
  cfg.master_seed = 9;
  cfg.grid.centers = {CenterMethod::Mean};
  cfg.grid.scales = {ScaleMethod::std_dev()};
  cfg.stable_eval = StableEvaluation::PhaseSplit;
  ArlReport r = arl_study(s, cfg);
  const ArlCell* cell =
      r.find(ChartKind::Ir, CenterMethod::Mean, ScaleMethod::Kind::StdDev, kStableCellId, 0.0);
  REQUIRE(cell);
  CHECK(cell->n_replicates + cell->n_degenerate == 16);
}

TEST_CASE("scenario json round-trip and validation paths") {
  Scenario s = tiny_scenario();
  nlohmann::json j = scenario_to_json(s);
  Scenario back = scenario_from_json(j);
  REQUIRE(back.products.size() == s.products.size());
  CHECK(back.factor_names == s.factor_names);
  CHECK(back.products[0].mu == s.products[0].mu);
  CHECK(back.products[0].lots.size() == s.products[0].lots.size());
  CHECK(back.products[1].lots[3].factors == s.products[1].lots[3].factors);
  CHECK(back.outlier_prob == s.outlier_prob);

  nlohmann::json bad = j;
  bad["products"][0]["sigma"] = -1.0;
  CHECK_THROWS_WITH_AS(scenario_from_json(bad), doctest::Contains("products[0].sigma"),
                       DomainError);
  nlohmann::json bad2 = j;
  bad2["products"][1]["lots"][0].erase("mfg_date");
  CHECK_THROWS_WITH_AS(scenario_from_json(bad2),
                       doctest::Contains("products[1].lots[0].mfg_date"), DomainError);

  // Synth-backed document.
  nlohmann::json doc;
  doc["synth"] = {{"n_products", 12}, {"seed", 4}};
  doc["outlier_prob"] = 0.05;
  doc["root_causes"] = nlohmann::json::array(
      {{{"id", "A"}, {"factor", "tooling"}, {"level", "tooling_1"}, {"shifts", {2, 4}}}});
  std::vector<RootCause> causes;
  Scenario synth = load_scenario_document(doc, &causes);
  CHECK(synth.products.size() <= 12);
  CHECK(synth.outlier_prob == 0.05);
  REQUIRE(causes.size() == 1);
  CHECK(causes[0].shift_multiples == std::vector<double>{2, 4});

  nlohmann::json unknown_level = doc;
  unknown_level["root_causes"][0]["level"] = "tooling_99";
  CHECK_THROWS_WITH_AS(load_scenario_document(unknown_level, &causes),
                       doctest::Contains("root_causes[0].level"), DomainError);
}

TEST_CASE("arl table exports have the expected shape") {
  Scenario s = tiny_scenario();
  RootCause rc{"C", "tool", "t1", {2, 4}};
  ArlStudyConfig cfg;
  cfg.n_sim = 8;
  cfg.master_seed = 1;
  cfg.root_causes = {rc};
  ArlReport with = arl_study(s, cfg);
  ArlStudyConfig cfg0 = cfg;
  cfg0.root_causes.clear();
  cfg0.with_outliers = false;
  ArlReport without = arl_study(s, cfg0);

  testsup::TempDir dir("arl_csv");
  write_arl0_csv(without, with, cfg.grid, dir.path() / "arl0.csv");
  write_arl1_csv(with, {rc}, cfg.grid, dir.path() / "arl1.csv");

  auto lines = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string line;
    std::vector<std::string> out;
    while (std::getline(in, line)) out.push_back(line);
    return out;
  };
  auto arl0 = lines(dir.path() / "arl0.csv");
  // header + (excl/incl) x (mean/median) rows for one chart kind
  CHECK(arl0.size() == 1 + 2 * 2);
  CHECK(arl0[0] == "chart,outliers,centre,iqr,mad,rstd,stddev");
  auto arl1 = lines(dir.path() / "arl1.csv");
  // header + one cause x shifts {0,2,4} x centers
  CHECK(arl1.size() == 1 + 3 * 2);
}
