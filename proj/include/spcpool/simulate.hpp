#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "spcpool/charts.hpp"
#include "spcpool/dates.hpp"
#include "spcpool/portfolio.hpp"
#include "spcpool/standardize.hpp"

namespace spcpool {

// One scheduled lot of a scenario product: when it is produced and under
// which process conditions. Values are drawn at simulation time.
struct LotSpec {
  std::string lot_id;
  Date mfg_date{};
  std::vector<std::string> factors;
};

struct ScenarioProduct {
  std::string product_id;
  double mu = 0.0;
  double sigma = 1.0;
  std::vector<LotSpec> lots;  // chronological
};

// Generative model of a portfolio year: per-product N(mu, sigma^2) lots on
// a fixed production schedule, optionally contaminated by an independent
// wide-spread outlier term.
struct Scenario {
  std::vector<ScenarioProduct> products;
  std::vector<std::string> factor_names;
  double outlier_prob = 0.01;
  double outlier_sd_multiple = 25.0;
  double phase_split = 0.75;  // fraction of the production order forming phase I

  std::size_t total_lots() const;
};

// A deterministic (non-random) shift applied, during phase II, to every lot
// whose factor level matches.
struct RootCause {
  std::string id;
  std::string factor_name;
  std::string level;
  std::vector<double> shift_multiples{2.0, 4.0, 6.0, 8.0};  // in units of sigma_i
};

std::size_t affected_lot_count(const Scenario& s, const RootCause& rc);

// Lots per level of one factor; handy for picking root causes by footprint.
std::map<std::string, std::size_t> factor_level_footprint(const Scenario& s,
                                                          const std::string& factor_name);

// Lot-count distribution for synthetic portfolios: a geometric bulk of
// low-volume products plus an occasional uniform band of high runners.
struct LotCountSpec {
  double geometric_p = 0.25;
  int min_lots = 2;
  int max_lots = 173;
  double high_volume_prob = 0.1;
  int high_volume_min = 20;
  int high_volume_max = 173;
};

// Synthetic portfolio generator. Construction-like factors (raw material,
// tooling, ...) are constant within a product and skewed so some levels
// carry a large share of production; line/operator-like factors vary per
// lot. Centers are log-uniform, spreads proportional to the center.
struct SynthSpec {
  int n_products = 147;
  LotCountSpec lot_counts;
  Date date_start = make_date(2025, 1, 1);
  Date date_end = make_date(2025, 12, 31);
  int n_factors = 7;
  int levels_per_factor = 8;
  std::uint64_t seed = 1;
  double mu_log10_min = 1.0;
  double mu_log10_max = 4.0;
  double cv_min = 0.02;
  double cv_max = 0.15;
};

Portfolio synth_portfolio(const SynthSpec& spec);

// Estimates a scenario from observed data: per-product cleaned center and
// spread (median, Huber scale), schedule copied verbatim. Products with
// fewer than 2 lots or zero spread are dropped and reported.
Scenario fit_scenario(const Portfolio& p, std::vector<std::string>* dropped = nullptr);

// Draws one stable-process portfolio. With outliers enabled each lot is,
// with probability outlier_prob, perturbed by an independent normal with
// standard deviation outlier_sd_multiple * sigma_i.
Portfolio simulate_stable(const Scenario& s, bool with_outliers, std::uint64_t seed);

// Adds shift_multiple * sigma_i to the phase-II lots (the trailing
// 1 - phase_split of the production order) whose factor level matches rc.
Portfolio inject_root_cause(const Portfolio& p, const Scenario& s, const RootCause& rc,
                            double shift_multiple, double phase_split);

enum class ChartKind { Ir, Ewma };

std::string to_string(ChartKind k);

struct MethodGrid {
  std::vector<CenterMethod> centers{CenterMethod::Mean, CenterMethod::Median};
  std::vector<ScaleMethod> scales{ScaleMethod::iqr(), ScaleMethod::mad(),
                                  ScaleMethod::robust_std_dev(), ScaleMethod::std_dev()};
};

// How the stable-process (shift 0) cell is scored. FullSeries charts the
// whole simulated year with in-sample summaries and limits — the design of
// the stable-process comparison study, and the regime where the sample sd
// keeps small products quiet while a degenerate MAD floods the chart.
// PhaseSplit pushes the stable cell through the same frozen-limit phase-II
// pipeline as the root-cause cells.
enum class StableEvaluation { FullSeries, PhaseSplit };

struct ArlStudyConfig {
  std::vector<ChartKind> charts{ChartKind::Ir};
  MethodGrid grid;
  std::vector<RootCause> root_causes;
  int n_sim = 500;
  bool with_outliers = true;
  std::uint64_t master_seed = 1;
  double ewma_lambda = 0.2;
  double ewma_limit_width = 3.0;
  StableEvaluation stable_eval = StableEvaluation::FullSeries;
  int n_threads = 0;  // 0 = all hardware threads
};

// The baseline (stable process) cell carries this root-cause id.
inline const std::string kStableCellId = "";

struct ArlCellKey {
  ChartKind chart = ChartKind::Ir;
  CenterMethod center = CenterMethod::Mean;
  ScaleMethod scale;
  std::string root_cause_id = kStableCellId;
  double shift = 0.0;

  bool operator==(const ArlCellKey&) const = default;
};

struct ArlCell {
  std::optional<double> arl;           // mean over replicates of per-replicate mean run length
  std::size_t n_signals = 0;           // signals pooled over replicates
  int n_replicates = 0;                // replicates that produced usable limits
  int replicates_with_signal = 0;
  int n_degenerate = 0;                // replicates with degenerate limits
};

struct ArlReport {
  std::uint64_t master_seed = 0;
  int n_sim = 0;
  bool with_outliers = false;
  std::vector<ArlCellKey> keys;
  std::vector<ArlCell> cells;  // parallel to keys

  const ArlCell* find(ChartKind chart, CenterMethod cm, ScaleMethod::Kind sm,
                      const std::string& root_cause_id, double shift) const;
};

// Monte Carlo run-length study. Per replicate: simulate a stable year;
// score the stable cell per cfg.stable_eval; for every root-cause cell,
// fit summaries and chart limits on the phase-I standardized series, shift
// the phase-II lots the cause touches, standardize them with the frozen
// phase-I summaries, flag against the frozen limits, and count run lengths
// from the first phase-II observation. Replicate r uses the seed derived
// from (master_seed, r), so results do not depend on thread count.
ArlReport arl_study(const Scenario& s, const ArlStudyConfig& cfg);

// Scenario/root-cause JSON document handling. Parse errors carry the JSON
// path of the offending field. A document provides either "products" or a
// "synth" generator block.
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
std::vector<RootCause> root_causes_from_json(const nlohmann::json& j);
SynthSpec synth_spec_from_json(const nlohmann::json& j);
Scenario load_scenario_document(const nlohmann::json& j, std::vector<RootCause>* root_causes);

// ARL tables, one row block per chart kind: the stable-process table has
// rows outliers x centre, the root-cause table rows cause x shift x centre;
// columns follow the grid's scale order. Cells without any signal print NA.
void write_arl0_csv(const ArlReport& without_outliers, const ArlReport& with_outliers,
                    const MethodGrid& grid, const std::filesystem::path& path);
void write_arl1_csv(const ArlReport& report, const std::vector<RootCause>& causes,
                    const MethodGrid& grid, const std::filesystem::path& path);

}  // namespace spcpool
