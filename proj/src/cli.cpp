#include "spcpool/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "spcpool/charts.hpp"
#include "spcpool/csv.hpp"
#include "spcpool/errors.hpp"
#include "spcpool/ingest.hpp"
#include "spcpool/roottree.hpp"
#include "spcpool/simulate.hpp"
#include "spcpool/standardize.hpp"
#include "spcpool/svg.hpp"

namespace spcpool {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonOpts {
  std::string input;
  std::string schema;
  std::string center = "median";
  std::string scale = "rstd";
  double scale_c = -1.0;  // <0: use the normal-consistency default
  double huber_k = kHuberDefaultK;
  std::string phase1_cutoff;
  std::string out = ".";
};

SchemaMap parse_schema(const std::string& text) {
  SchemaMap schema;
  if (text.empty()) return schema;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    std::string item = text.substr(start, end == std::string::npos ? end : end - start);
    if (!item.empty()) {
      auto eq = item.find('=');
      if (eq == std::string::npos)
        throw DomainError("--schema entries must look like key=column (got '" + item + "')");
      std::string key = item.substr(0, eq);
      std::string col = item.substr(eq + 1);
      if (key == "product") schema.product = col;
      else if (key == "lot") schema.lot = col;
      else if (key == "date") schema.date = col;
      else if (key == "value") schema.value = col;
      else throw DomainError("--schema key must be product/lot/date/value (got '" + key + "')");
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return schema;
}

CenterMethod parse_center(const std::string& name) {
  if (name == "mean") return CenterMethod::Mean;
  if (name == "median") return CenterMethod::Median;
  throw DomainError("--center must be mean or median (got '" + name + "')");
}

ScaleMethod parse_scale(const CommonOpts& opts) {
  const std::string& name = opts.scale;
  if (name == "stddev") return ScaleMethod::std_dev();
  if (name == "rstd") return ScaleMethod::robust_std_dev(opts.huber_k);
  if (name == "mad")
    return ScaleMethod::mad(opts.scale_c > 0.0 ? opts.scale_c : kMadNormalConsistency);
  if (name == "iqr")
    return ScaleMethod::iqr(opts.scale_c > 0.0 ? opts.scale_c : kIqrNormalConsistency);
  throw DomainError("--scale must be stddev, rstd, mad or iqr (got '" + name + "')");
}

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

Date parse_cutoff(const std::string& text) {
  auto d = parse_date(text);
  if (!d) throw DomainError("--phase1-cutoff must be an ISO date (got '" + text + "')");
  return *d;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open output file: " + path.string());
  out << text;
}

// Standardization + frozen-limit bookkeeping shared by chart/tree/report.
struct FrozenFit {
  Portfolio portfolio;
  StandardizedSeries series;        // full series, frozen summaries
  Eigen::VectorXd phase1_values;    // standardized phase-I stream
  std::size_t phase1_count = 0;     // observations in phase I
  std::optional<Date> cutoff;
};

FrozenFit fit_input(const CommonOpts& opts) {
  if (opts.input.empty()) throw DomainError("--input is required");
  FrozenFit fit;
  fit.portfolio = load_portfolio(opts.input, parse_schema(opts.schema));
  CenterMethod cm = parse_center(opts.center);
  ScaleMethod sm = parse_scale(opts);

  if (!opts.phase1_cutoff.empty()) {
    fit.cutoff = parse_cutoff(opts.phase1_cutoff);
    std::size_t n1 = 0;
    while (n1 < fit.portfolio.size() && fit.portfolio.observations[n1].mfg_date <= *fit.cutoff)
      ++n1;
    if (n1 == 0) throw DomainError("--phase1-cutoff leaves no phase-I data");
    fit.phase1_count = n1;
    Portfolio phase1 = production_prefix(fit.portfolio, n1);
    Summaries sums = summarize(phase1, cm, sm);
    if (sums.by_product.empty())
      throw DomainError("standardization has no usable products in phase I");
    fit.series = standardize_with(fit.portfolio, sums);
    fit.phase1_values = standardize_with(phase1, sums).values;
  } else {
    fit.phase1_count = fit.portfolio.size();
    fit.series = standardize(fit.portfolio, cm, sm);
    fit.phase1_values = fit.series.values;
  }
  return fit;
}

void write_ir_chart_csv(const IrChart& chart, const StandardizedSeries& series,
                        const Portfolio& p, const fs::path& path) {
  csv::Writer w(path);
  w.row({"order_index", "product_id", "lot_id", "mfg_date", "standardized_value", "lcl",
         "center_line", "ucl", "flag", "moving_range", "mr_ucl", "mr_flag"});
  for (Eigen::Index i = 0; i < chart.values.size(); ++i) {
    const auto& obs = p.observations[series.source[static_cast<std::size_t>(i)]];
    std::vector<std::string> row{
        std::to_string(i),
        obs.product_id,
        obs.lot_id,
        format_date(obs.mfg_date),
        csv::format_double(chart.values[i]),
        csv::format_double(chart.limits.lcl),
        csv::format_double(chart.limits.center_line),
        csv::format_double(chart.limits.ucl),
        chart.flags[static_cast<std::size_t>(i)] ? "1" : "0"};
    if (i > 0) {
      row.push_back(csv::format_double(chart.moving_ranges[i - 1]));
      row.push_back(csv::format_double(chart.limits.mr_ucl));
      row.push_back(chart.mr_flags[static_cast<std::size_t>(i - 1)] ? "1" : "0");
    } else {
      row.insert(row.end(), {"", "", ""});
    }
    w.row(row);
  }
}

void write_ewma_chart_csv(const EwmaChart& chart, const StandardizedSeries& series,
                          const Portfolio& p, const fs::path& path) {
  csv::Writer w(path);
  w.row({"order_index", "product_id", "lot_id", "mfg_date", "standardized_value", "z", "lcl",
         "ucl", "flag"});
  for (Eigen::Index i = 0; i < chart.z.size(); ++i) {
    const auto& obs = p.observations[series.source[static_cast<std::size_t>(i)]];
    w.row({std::to_string(i), obs.product_id, obs.lot_id, format_date(obs.mfg_date),
           csv::format_double(series.values[i]), csv::format_double(chart.z[i]),
           csv::format_double(chart.lcl[i]), csv::format_double(chart.ucl[i]),
           chart.flags[static_cast<std::size_t>(i)] ? "1" : "0"});
  }
}

IrChart build_ir(const FrozenFit& fit) {
  IrLimits limits = estimate_ir_limits(fit.phase1_values);
  return ir_chart(fit.series.values, limits);
}

EwmaChart build_ewma(const FrozenFit& fit, double lambda) {
  double mr_bar = mean_moving_range(fit.phase1_values);
  if (mr_bar == 0.0)
    throw DegenerateLimitsError("mean moving range is 0; EWMA limits are degenerate");
  EwmaParams params{fit.phase1_values.mean(), mr_bar / kMovingRangeD2};
  return ewma_chart(fit.series.values, lambda, 3.0, params);
}

int cmd_standardize(const CommonOpts& opts) {
  FrozenFit fit = fit_input(opts);
  fs::path dir = ensure_out_dir(opts.out);
  write_standardized_csv(fit.series, fit.portfolio, dir / "standardized.csv");
  write_summaries_csv(fit.series.summaries, dir / "summaries.csv");
  std::cout << "standardized " << fit.series.source.size() << " of " << fit.portfolio.size()
            << " lots across " << fit.series.summaries.by_product.size() << " products\n";
  return kExitOk;
}

int cmd_chart(const CommonOpts& opts, const std::string& chart_kind, double lambda) {
  FrozenFit fit = fit_input(opts);
  fs::path dir = ensure_out_dir(opts.out);
  write_standardized_csv(fit.series, fit.portfolio, dir / "standardized.csv");
  write_summaries_csv(fit.series.summaries, dir / "summaries.csv");

  bool out_of_control = false;
  if (chart_kind == "ir") {
    IrChart chart = build_ir(fit);
    write_ir_chart_csv(chart, fit.series, fit.portfolio, dir / "chart.csv");
    write_text_file(dir / "chart.svg", render_ir_svg(chart, "standardized series"));
    out_of_control = chart.any_flag();
  } else if (chart_kind == "ewma") {
    EwmaChart chart = build_ewma(fit, lambda);
    write_ewma_chart_csv(chart, fit.series, fit.portfolio, dir / "chart.csv");
    write_text_file(dir / "chart.svg", render_ewma_svg(chart, "standardized series"));
    out_of_control = chart.any_flag();
  } else {
    throw DomainError("--chart must be ir or ewma (got '" + chart_kind + "')");
  }
  std::cout << (out_of_control ? "out of control\n" : "in control\n");
  return out_of_control ? kExitOutOfControl : kExitOk;
}

int cmd_tree(const CommonOpts& opts, const TreeParams& params) {
  FrozenFit fit = fit_input(opts);
  fs::path dir = ensure_out_dir(opts.out);
  PartitionTree tree = fit_tree(fit.series, fit.portfolio, params);
  TreeReport report = describe(tree);
  write_text_file(dir / "tree.txt", tree_to_text(tree));
  write_text_file(dir / "tree.json", tree_to_json(tree).dump(2) + "\n");
  write_importance_csv(report, dir / "importance.csv");
  if (report.splits.empty())
    std::cout << "tree has no splits\n";
  else
    std::cout << "top split: " << report.splits.front().rule << "\n";
  return kExitOk;
}

int cmd_report(const CommonOpts& opts, double lambda, const TreeParams& params) {
  FrozenFit fit = fit_input(opts);
  fs::path dir = ensure_out_dir(opts.out);
  write_standardized_csv(fit.series, fit.portfolio, dir / "standardized.csv");
  write_summaries_csv(fit.series.summaries, dir / "summaries.csv");

  IrChart ir = build_ir(fit);
  write_ir_chart_csv(ir, fit.series, fit.portfolio, dir / "ir_chart.csv");
  write_text_file(dir / "ir_chart.svg", render_ir_svg(ir, "standardized series"));
  EwmaChart ewma = build_ewma(fit, lambda);
  write_ewma_chart_csv(ewma, fit.series, fit.portfolio, dir / "ewma_chart.csv");
  write_text_file(dir / "ewma_chart.svg", render_ewma_svg(ewma, "standardized series"));

  if (!ir.any_flag() && !ewma.any_flag()) {
    std::cout << "in control, no root-cause analysis performed\n";
    return kExitOk;
  }

  PartitionTree tree = fit_tree(fit.series, fit.portfolio, params);
  TreeReport report = describe(tree);
  write_text_file(dir / "tree.txt", tree_to_text(tree));
  write_text_file(dir / "tree.json", tree_to_json(tree).dump(2) + "\n");
  write_importance_csv(report, dir / "importance.csv");

  // Review view: values by the top categorical split factor, early/late
  // period separated by the tree's first date threshold (falling back to
  // the phase-I cutoff).
  const TreeNode* facet_split = nullptr;
  for (int idx : tree.split_order) {
    const auto& node = tree.nodes[static_cast<std::size_t>(idx)];
    if (!node.splits_on_date) {
      facet_split = &node;
      break;
    }
  }
  std::optional<Date> threshold = tree.first_date_threshold();
  if (!threshold) threshold = fit.cutoff;
  if (facet_split) {
    std::vector<FacetPoint> points;
    points.reserve(fit.series.source.size());
    for (std::size_t j = 0; j < fit.series.source.size(); ++j) {
      const auto& obs = fit.portfolio.observations[fit.series.source[j]];
      bool late = threshold && obs.mfg_date > *threshold;
      points.push_back({obs.factors[static_cast<std::size_t>(facet_split->factor_index)],
                        fit.series.values[static_cast<Eigen::Index>(j)], late});
    }
    write_text_file(dir / "facet.svg",
                    render_facet_svg(points, facet_split->predictor, "standardized values",
                                     threshold));
  }

  std::cout << "out of control";
  if (!report.splits.empty()) std::cout << "; top split: " << report.splits.front().rule;
  std::cout << "\n";
  return kExitOutOfControl;
}

int cmd_simulate(const std::string& scenario_path, const std::string& input_path,
                 const std::string& schema, int n_sim, std::uint64_t seed,
                 const std::string& charts_arg, const std::string& out, int threads) {
  Scenario scenario;
  std::vector<RootCause> causes;
  if (!scenario_path.empty()) {
    std::ifstream in(scenario_path);
    if (!in) throw Error("cannot open scenario file: " + scenario_path);
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw DomainError("scenario document: " + std::string(e.what()));
    }
    scenario = load_scenario_document(doc, &causes);
  } else if (!input_path.empty()) {
    Portfolio p = load_portfolio(input_path, parse_schema(schema));
    scenario = fit_scenario(p);
  } else {
    throw DomainError("simulate needs --scenario or --input");
  }

  ArlStudyConfig cfg;
  cfg.n_sim = n_sim;
  cfg.master_seed = seed;
  cfg.n_threads = threads;
  cfg.root_causes = causes;
  cfg.charts.clear();
  std::size_t start = 0;
  while (start <= charts_arg.size()) {
    auto end = charts_arg.find(',', start);
    std::string kind = charts_arg.substr(start, end == std::string::npos ? end : end - start);
    if (kind == "ir") cfg.charts.push_back(ChartKind::Ir);
    else if (kind == "ewma") cfg.charts.push_back(ChartKind::Ewma);
    else if (!kind.empty()) throw DomainError("--charts entries must be ir or ewma");
    if (end == std::string::npos) break;
    start = end + 1;
  }
  if (cfg.charts.empty()) cfg.charts.push_back(ChartKind::Ir);

  fs::path dir = ensure_out_dir(out);

  cfg.with_outliers = false;
  ArlStudyConfig cfg_stable = cfg;
  cfg_stable.root_causes.clear();
  ArlReport without = arl_study(scenario, cfg_stable);
  cfg.with_outliers = true;
  ArlReport with = arl_study(scenario, cfg);

  write_arl0_csv(without, with, cfg.grid, dir / "arl0.csv");
  if (!causes.empty()) write_arl1_csv(with, causes, cfg.grid, dir / "arl1.csv");

  json manifest;
  manifest["master_seed"] = seed;
  manifest["n_sim"] = n_sim;
  json chart_names = json::array();
  for (ChartKind k : cfg.charts) chart_names.push_back(to_string(k));
  manifest["charts"] = chart_names;
  json centers = json::array();
  for (CenterMethod cm : cfg.grid.centers) centers.push_back(to_string(cm));
  manifest["centers"] = centers;
  json scales = json::array();
  for (const auto& sm : cfg.grid.scales) scales.push_back(to_string(sm));
  manifest["scales"] = scales;
  manifest["outlier_prob"] = scenario.outlier_prob;
  manifest["outlier_sd_multiple"] = scenario.outlier_sd_multiple;
  manifest["phase_split"] = scenario.phase_split;
  manifest["n_products"] = scenario.products.size();
  manifest["n_lots"] = scenario.total_lots();
  json cause_list = json::array();
  for (const auto& rc : causes) {
    json cj;
    cj["id"] = rc.id;
    cj["factor"] = rc.factor_name;
    cj["level"] = rc.level;
    cj["shifts"] = rc.shift_multiples;
    cj["affected_lots"] = affected_lot_count(scenario, rc);
    cause_list.push_back(cj);
  }
  manifest["root_causes"] = cause_list;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "ARL study complete: " << without.keys.size() + with.keys.size() << " cells, "
            << n_sim << " replicates each\n";
  return kExitOk;
}

int cmd_synth(const SynthSpec& spec, const std::string& out) {
  Portfolio p = synth_portfolio(spec);
  fs::path dir = ensure_out_dir(out);
  save_portfolio(p, dir / "portfolio.csv");
  std::cout << "wrote " << p.size() << " lots across " << p.products.size() << " products\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"pooled short-run SPC: standardize, chart, simulate, analyse", "spcpool"};
  app.require_subcommand(1);

  CommonOpts opts;
  double lambda = 0.2;
  std::string chart_kind = "ir";
  TreeParams tree_params;

  auto add_common = [&](CLI::App* cmd, bool needs_input = true) {
    if (needs_input) cmd->add_option("--input", opts.input, "portfolio CSV file");
    cmd->add_option("--schema", opts.schema,
                    "column mapping, e.g. product=prod,lot=lot,date=mfg,value=y");
    cmd->add_option("--center", opts.center, "center estimator: mean|median");
    cmd->add_option("--scale", opts.scale, "scale estimator: stddev|rstd|mad|iqr");
    cmd->add_option("--scale-c", opts.scale_c,
                    "consistency constant for mad/iqr (default: normal consistency)");
    cmd->add_option("--huber-k", opts.huber_k, "Huber tuning constant for rstd");
    cmd->add_option("--phase1-cutoff", opts.phase1_cutoff,
                    "freeze summaries and limits at this date (YYYY-MM-DD)");
    cmd->add_option("--out", opts.out, "output directory");
  };
  auto add_tree_params = [&](CLI::App* cmd) {
    cmd->add_option("--max-depth", tree_params.max_depth, "maximum tree depth");
    cmd->add_option("--min-leaf", tree_params.min_leaf, "minimum rows per leaf");
    cmd->add_option("--min-improvement", tree_params.min_split_improvement,
                    "minimum split gain as a fraction of the root sum of squares");
    cmd->add_option("--max-splits", tree_params.max_splits, "maximum number of splits");
  };

  CLI::App* c_std = app.add_subcommand("standardize", "pool per-product standardized values");
  add_common(c_std);

  CLI::App* c_chart = app.add_subcommand("chart", "control chart over the standardized series");
  add_common(c_chart);
  c_chart->add_option("--chart", chart_kind, "chart kind: ir|ewma");
  c_chart->add_option("--lambda", lambda, "EWMA smoothing constant");

  CLI::App* c_tree = app.add_subcommand("tree", "partition tree over process factors");
  add_common(c_tree);
  add_tree_params(c_tree);

  CLI::App* c_report = app.add_subcommand("report", "charts plus root-cause analysis");
  add_common(c_report);
  c_report->add_option("--lambda", lambda, "EWMA smoothing constant");
  add_tree_params(c_report);

  std::string scenario_path, charts_arg = "ir", sim_out = ".";
  int n_sim = 500, threads = 0;
  std::uint64_t seed = 0;
  CLI::App* c_sim = app.add_subcommand("simulate", "Monte Carlo average-run-length study");
  c_sim->add_option("--scenario", scenario_path, "scenario JSON document");
  c_sim->add_option("--input", opts.input, "portfolio CSV to fit a scenario from");
  c_sim->add_option("--schema", opts.schema, "column mapping for --input");
  c_sim->add_option("--nsim", n_sim, "replicates per cell");
  CLI::Option* seed_opt = c_sim->add_option("--seed", seed, "master seed");
  c_sim->add_option("--charts", charts_arg, "chart kinds, comma separated: ir,ewma");
  c_sim->add_option("--threads", threads, "worker threads (0 = all)");
  c_sim->add_option("--out", sim_out, "output directory");

  SynthSpec synth_spec;
  std::string synth_out = ".";
  std::string synth_start, synth_end;
  CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic portfolio CSV");
  c_synth->add_option("--products", synth_spec.n_products, "number of products");
  c_synth->add_option("--seed", synth_spec.seed, "generator seed");
  c_synth->add_option("--factors", synth_spec.n_factors, "number of factor columns");
  c_synth->add_option("--levels", synth_spec.levels_per_factor, "levels per factor");
  c_synth->add_option("--date-start", synth_start, "first production date");
  c_synth->add_option("--date-end", synth_end, "last production date");
  c_synth->add_option("--geometric-p", synth_spec.lot_counts.geometric_p,
                      "lot-count geometric parameter");
  c_synth->add_option("--max-lots", synth_spec.lot_counts.max_lots, "lot count cap");
  c_synth->add_option("--high-volume-prob", synth_spec.lot_counts.high_volume_prob,
                      "share of high-volume products");
  c_synth->add_option("--out", synth_out, "output directory");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }

  try {
    if (c_std->parsed()) return cmd_standardize(opts);
    if (c_chart->parsed()) return cmd_chart(opts, chart_kind, lambda);
    if (c_tree->parsed()) return cmd_tree(opts, tree_params);
    if (c_report->parsed()) return cmd_report(opts, lambda, tree_params);
    if (c_sim->parsed()) {
      if (seed_opt->count() == 0) throw DomainError("simulate requires --seed");
      return cmd_simulate(scenario_path, opts.input, opts.schema, n_sim, seed, charts_arg,
                          sim_out, threads);
    }
    if (c_synth->parsed()) {
      if (!synth_start.empty()) synth_spec.date_start = parse_cutoff(synth_start);
      if (!synth_end.empty()) synth_spec.date_end = parse_cutoff(synth_end);
      return cmd_synth(synth_spec, synth_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace spcpool
