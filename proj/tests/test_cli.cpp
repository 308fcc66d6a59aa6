#include <doctest.h>

#include <fstream>
#include <sstream>
#include <nlohmann/json.hpp>

#include "spcpool/cli.hpp"
#include "spcpool/ingest.hpp"
#include "spcpool/rng.hpp"
#include "spcpool/simulate.hpp"
#include "test_support.hpp"

using namespace spcpool;
using testsup::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path write_file(const TempDir& dir, const std::string& name,
                                 const std::string& text) {
  auto path = dir.path() / name;
  std::ofstream out(path, std::ios::binary);
  out << text;
  return path;
}

// Stable portfolio: one well-behaved product plus a second one, in control.
std::string in_control_csv() {
  std::string text = "product_id,lot_id,mfg_date,value,tool\n";
  Rng rng(100);
  for (int i = 0; i < 40; ++i) {
    char date[16];
    std::snprintf(date, sizeof date, "2025-%02d-%02d", 1 + i / 28, 1 + i % 28);
    text += "A,A" + std::to_string(100 + i) + "," + date + "," +
            std::to_string(50.0 + rng.normal()) + ",t1\n";
    text += "B,B" + std::to_string(100 + i) + "," + date + "," +
            std::to_string(8.0 + 0.25 * rng.normal()) + ",t2\n";
  }
  return text;
}

}  // namespace

TEST_CASE("cmd_chart exit codes: in control, out of control, error") {
  TempDir dir("cli_chart");
  auto input = write_file(dir, "p.csv", in_control_csv());

  int rc = run_cli({"chart", "--input", input.string(), "--chart", "ir", "--out",
                    (dir.path() / "ok").string()});
  CHECK(rc == kExitOk);
  CHECK(std::filesystem::exists(dir.path() / "ok" / "chart.svg"));
  CHECK(std::filesystem::exists(dir.path() / "ok" / "chart.csv"));
  CHECK(std::filesystem::exists(dir.path() / "ok" / "standardized.csv"));
  // No flagged markers in the SVG for in-control data.
  CHECK(slurp(dir.path() / "ok" / "chart.svg").find("r=\"3.5\"") == std::string::npos);

  // A wild value makes the pooled chart signal.
  std::string spiked = in_control_csv() + "A,A999,2025-06-30,75.0,t1\n";
  auto bad_input = write_file(dir, "spiked.csv", spiked);
  rc = run_cli({"chart", "--input", bad_input.string(), "--chart", "ir", "--out",
                (dir.path() / "ooc").string()});
  CHECK(rc == kExitOutOfControl);
  CHECK(slurp(dir.path() / "ooc" / "chart.svg").find("r=\"3.5\"") != std::string::npos);

  rc = run_cli({"chart", "--input", (dir.path() / "missing.csv").string(), "--out",
                (dir.path() / "err").string()});
  CHECK(rc == kExitError);

  // EWMA variant writes its artifacts too.
  rc = run_cli({"chart", "--input", input.string(), "--chart", "ewma", "--lambda", "0.2",
                "--out", (dir.path() / "ewma").string()});
  CHECK(rc == kExitOk);
  CHECK(slurp(dir.path() / "ewma" / "chart.csv").find("z,lcl,ucl") != std::string::npos);
}

TEST_CASE("cmd_standardize writes series and summaries") {
  TempDir dir("cli_std");
  auto input = write_file(dir, "p.csv", in_control_csv());
  int rc = run_cli({"standardize", "--input", input.string(), "--center", "mean", "--scale",
                    "stddev", "--out", dir.path().string()});
  CHECK(rc == kExitOk);
  std::string head = slurp(dir.path() / "standardized.csv");
  CHECK(head.rfind("order_index,product_id,lot_id,mfg_date,standardized_value", 0) == 0);
  CHECK(slurp(dir.path() / "summaries.csv").find("stddev") != std::string::npos);
}

TEST_CASE("schema flag maps nonstandard column names") {
  TempDir dir("cli_schema");
  std::string csv = "prod,batch,made,score\n";
  Rng rng(4);
  for (int i = 0; i < 12; ++i) {
    char date[16];
    std::snprintf(date, sizeof date, "2025-01-%02d", 1 + i);
    csv += "X,B" + std::to_string(i) + "," + date + "," + std::to_string(5.0 + rng.normal()) +
           "\n";
  }
  auto input = write_file(dir, "odd.csv", csv);
  int rc = run_cli({"standardize", "--input", input.string(), "--schema",
                    "product=prod,lot=batch,date=made,value=score", "--out",
                    dir.path().string()});
  CHECK(rc == kExitOk);

  rc = run_cli({"standardize", "--input", input.string(), "--out", dir.path().string()});
  CHECK(rc == kExitError);  // header does not match the default schema
}

TEST_CASE("cmd_simulate: deterministic files, manifest, table shapes") {
  TempDir dir("cli_sim");
  nlohmann::json doc;
  doc["synth"] = {{"n_products", 25}, {"seed", 5}};
  doc["outlier_prob"] = 0.01;
  doc["root_causes"] = nlohmann::json::array(
      {{{"id", "A"}, {"factor", "tooling"}, {"level", "tooling_1"}, {"shifts", {2, 4}}}});
  auto scenario = write_file(dir, "scenario.json", doc.dump());

  auto run = [&](const std::string& out) {
    return run_cli({"simulate", "--scenario", scenario.string(), "--nsim", "12", "--seed",
                    "777", "--out", (dir.path() / out).string()});
  };
  CHECK(run("r1") == kExitOk);
  CHECK(run("r2") == kExitOk);
  for (const char* name : {"arl0.csv", "arl1.csv", "manifest.json"}) {
    CHECK(slurp(dir.path() / "r1" / name) == slurp(dir.path() / "r2" / name));
  }
  std::string manifest = slurp(dir.path() / "r1" / "manifest.json");
  CHECK(manifest.find("\"master_seed\": 777") != std::string::npos);
  CHECK(manifest.find("\"affected_lots\"") != std::string::npos);

  // 8-cell grid: header + 4 ARL0 rows; ARL1: cause x {0,2,4} x centers.
  std::string arl0 = slurp(dir.path() / "r1" / "arl0.csv");
  CHECK(std::count(arl0.begin(), arl0.end(), '\n') == 5);
  std::string arl1 = slurp(dir.path() / "r1" / "arl1.csv");
  CHECK(std::count(arl1.begin(), arl1.end(), '\n') == 7);

  // Missing seed is an error (reproducibility contract).
  int rc = run_cli({"simulate", "--scenario", scenario.string(), "--nsim", "4", "--out",
                    (dir.path() / "r3").string()});
  CHECK(rc == kExitError);

  // Field-path errors for an invalid scenario.
  auto bad = write_file(dir, "bad.json", R"({"synth": {"n_products": 0}})");
  rc = run_cli({"simulate", "--scenario", bad.string(), "--nsim", "2", "--seed", "1", "--out",
                (dir.path() / "r4").string()});
  CHECK(rc == kExitError);
}

TEST_CASE("cmd_synth then chart round-trip through files") {
  TempDir dir("cli_synth");
  int rc = run_cli({"synth", "--products", "30", "--seed", "9", "--out", dir.path().string()});
  CHECK(rc == kExitOk);
  Portfolio p = load_portfolio(dir.path() / "portfolio.csv");
  CHECK(p.products.size() == 30);

  rc = run_cli({"synth", "--products", "30", "--seed", "9", "--out",
                (dir.path() / "again").string()});
  CHECK(rc == kExitOk);
  CHECK(slurp(dir.path() / "portfolio.csv") ==
        slurp(dir.path() / "again" / "portfolio.csv"));
}

TEST_CASE("cmd_report: in-control stays quiet, shifted data yields a tree") {
  TempDir dir("cli_report");
  auto quiet = write_file(dir, "quiet.csv", in_control_csv());
  int rc = run_cli({"report", "--input", quiet.string(), "--out",
                    (dir.path() / "quiet_out").string()});
  CHECK(rc == kExitOk);
  CHECK(std::filesystem::exists(dir.path() / "quiet_out" / "ir_chart.svg"));
  CHECK(std::filesystem::exists(dir.path() / "quiet_out" / "ewma_chart.svg"));
  CHECK_FALSE(std::filesystem::exists(dir.path() / "quiet_out" / "tree.json"));

  // Tooling t2 drifts upward late in the year; the report must flag and
  // point the tree at the tool factor.
  std::string csv = "product_id,lot_id,mfg_date,value,tool,line\n";
  Rng rng(42);
  for (int prod = 0; prod < 6; ++prod) {
    std::string tool = prod % 2 ? "t2" : "t1";
    double mu = 20.0 * (prod + 1);
    double sigma = 0.02 * mu;
    for (int i = 0; i < 30; ++i) {
      Date d = make_date(2025, 1, 1) + std::chrono::days{i * 12 + prod};
      double v = mu + sigma * rng.normal();
      if (tool == "t2" && i >= 23) v += 4.5 * sigma;
      csv += "P" + std::to_string(prod) + ",L" + std::to_string(prod * 100 + i) + "," +
             format_date(d) + "," + std::to_string(v) + "," + tool + ",l" +
             std::to_string(i % 3) + "\n";
    }
  }
  auto shifted = write_file(dir, "shifted.csv", csv);
  rc = run_cli({"report", "--input", shifted.string(), "--phase1-cutoff", "2025-10-01",
                "--out", (dir.path() / "shift_out").string()});
  CHECK(rc == kExitOutOfControl);
  CHECK(std::filesystem::exists(dir.path() / "shift_out" / "tree.json"));
  CHECK(std::filesystem::exists(dir.path() / "shift_out" / "importance.csv"));
  CHECK(std::filesystem::exists(dir.path() / "shift_out" / "facet.svg"));
  std::string importance = slurp(dir.path() / "shift_out" / "importance.csv");
  CHECK(importance.find("tool") != std::string::npos);
}

TEST_CASE("cmd_tree restricted to a single factor column") {
  TempDir dir("cli_tree");
  std::string csv = "product_id,lot_id,mfg_date,value,tool\n";
  Rng rng(11);
  for (int i = 0; i < 60; ++i) {
    Date d = make_date(2025, 1, 1) + std::chrono::days{i * 3};
    std::string tool = i % 2 ? "t_hi" : "t_lo";
    double v = 100.0 + 2.0 * rng.normal() + (tool == "t_hi" ? 30.0 : 0.0);
    csv += "A,L" + std::to_string(i) + "," + format_date(d) + "," + std::to_string(v) + "," +
           tool + "\n";
  }
  auto input = write_file(dir, "one.csv", csv);
  int rc = run_cli({"tree", "--input", input.string(), "--center", "mean", "--scale", "stddev",
                    "--out", dir.path().string()});
  CHECK(rc == kExitOk);
  std::string tree_json = slurp(dir.path() / "tree.json");
  CHECK(tree_json.find("\"predictor\": \"tool\"") != std::string::npos);
}

TEST_CASE("unknown flags and bad subcommands fail cleanly") {
  CHECK(run_cli({"chart", "--nonsense"}) == kExitError);
  CHECK(run_cli({}) == kExitError);
  CHECK(run_cli({"standardize"}) == kExitError);  // missing --input
}
