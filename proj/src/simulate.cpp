#include "spcpool/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "spcpool/csv.hpp"
#include "spcpool/errors.hpp"
#include "spcpool/rng.hpp"

namespace spcpool {

using nlohmann::json;

std::size_t Scenario::total_lots() const {
  std::size_t n = 0;
  for (const auto& p : products) n += p.lots.size();
  return n;
}

namespace {

std::size_t factor_index_of(const std::vector<std::string>& names, const std::string& factor,
                            const std::string& what) {
  auto it = std::find(names.begin(), names.end(), factor);
  if (it == names.end()) throw DomainError(what + ": unknown factor '" + factor + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace

std::size_t affected_lot_count(const Scenario& s, const RootCause& rc) {
  std::size_t fi = factor_index_of(s.factor_names, rc.factor_name, "root cause " + rc.id);
  std::size_t count = 0;
  for (const auto& p : s.products)
    for (const auto& lot : p.lots)
      if (lot.factors[fi] == rc.level) ++count;
  return count;
}

std::map<std::string, std::size_t> factor_level_footprint(const Scenario& s,
                                                          const std::string& factor_name) {
  std::size_t fi = factor_index_of(s.factor_names, factor_name, "factor footprint");
  std::map<std::string, std::size_t> counts;
  for (const auto& p : s.products)
    for (const auto& lot : p.lots) ++counts[lot.factors[fi]];
  return counts;
}

// ---------------------------------------------------------------------------
// Synthetic portfolio generation
// ---------------------------------------------------------------------------

namespace {

// Construction-like factors come first and stay constant within a product;
// the rest vary lot by lot.
std::vector<std::string> synth_factor_names(int n_factors, int* n_constant_out) {
  static const char* constant_roles[] = {"raw_material", "construction", "tooling",
                                         "machine_setting"};
  static const char* varying_roles[] = {"line", "operator", "lab_station"};
  int n_constant = std::max(1, (n_factors + 1) / 2);
  if (n_factors == 1) n_constant = 1;
  std::vector<std::string> names;
  for (int i = 0; i < n_constant; ++i) {
    std::string base = constant_roles[i % 4];
    if (i >= 4) base += "_" + std::to_string(i / 4 + 1);
    names.push_back(base);
  }
  for (int i = 0; i < n_factors - n_constant; ++i) {
    std::string base = varying_roles[i % 3];
    if (i >= 3) base += "_" + std::to_string(i / 3 + 1);
    names.push_back(base);
  }
  *n_constant_out = n_constant;
  return names;
}

std::string level_name(const std::string& factor, int level) {
  return factor + "_" + std::to_string(level + 1);
}

// Zipf-ish draw over {0..L-1}: weight 1/(v+1). Construction factors share
// levels very unevenly, giving root causes of small and large footprint.
int skewed_level(Rng& rng, int n_levels) {
  double total = 0.0;
  for (int v = 0; v < n_levels; ++v) total += 1.0 / (v + 1.0);
  double u = rng.uniform() * total;
  double acc = 0.0;
  for (int v = 0; v < n_levels; ++v) {
    acc += 1.0 / (v + 1.0);
    if (u < acc) return v;
  }
  return n_levels - 1;
}

int sample_lot_count(Rng& rng, const LotCountSpec& lc) {
  int n;
  if (lc.high_volume_prob > 0.0 && rng.bernoulli(lc.high_volume_prob)) {
    n = static_cast<int>(rng.uniform_int(lc.high_volume_min, lc.high_volume_max));
  } else {
    n = lc.min_lots + static_cast<int>(rng.geometric(lc.geometric_p));
  }
  return std::clamp(n, lc.min_lots, lc.max_lots);
}

std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, width - s.size(), '0');
  return s;
}

}  // namespace

Portfolio synth_portfolio(const SynthSpec& spec) {
  if (spec.n_products < 1) throw DomainError("synth: n_products must be >= 1");
  if (spec.n_factors < 1) throw DomainError("synth: n_factors must be >= 1");
  if (spec.levels_per_factor < 2) throw DomainError("synth: levels_per_factor must be >= 2");
  if (spec.date_end < spec.date_start) throw DomainError("synth: date range is reversed");
  if (spec.lot_counts.min_lots < 1 || spec.lot_counts.max_lots < spec.lot_counts.min_lots)
    throw DomainError("synth: invalid lot count bounds");
  if (spec.lot_counts.geometric_p <= 0.0 || spec.lot_counts.geometric_p >= 1.0)
    throw DomainError("synth: geometric_p must lie strictly between 0 and 1");
  if (spec.lot_counts.high_volume_prob < 0.0 || spec.lot_counts.high_volume_prob > 1.0 ||
      spec.lot_counts.high_volume_max < spec.lot_counts.high_volume_min)
    throw DomainError("synth: invalid high-volume band");

  Rng rng(spec.seed);
  Portfolio p;
  int n_constant = 0;
  p.factor_names = synth_factor_names(spec.n_factors, &n_constant);

  auto span_days = (spec.date_end - spec.date_start).count();

  for (int pi = 0; pi < spec.n_products; ++pi) {
    std::string product_id = "P" + zero_pad(static_cast<std::size_t>(pi + 1), 3);
    int n_lots = sample_lot_count(rng, spec.lot_counts);
    double mu = std::pow(10.0, rng.uniform(spec.mu_log10_min, spec.mu_log10_max));
    double sigma = mu * rng.uniform(spec.cv_min, spec.cv_max);

    std::vector<std::string> constant_levels(static_cast<std::size_t>(n_constant));
    for (int f = 0; f < n_constant; ++f)
      constant_levels[static_cast<std::size_t>(f)] =
          level_name(p.factor_names[static_cast<std::size_t>(f)],
                     skewed_level(rng, spec.levels_per_factor));

    std::vector<Date> dates(static_cast<std::size_t>(n_lots));
    for (auto& d : dates) d = spec.date_start + std::chrono::days{rng.uniform_int(0, span_days)};
    std::sort(dates.begin(), dates.end());

    for (int li = 0; li < n_lots; ++li) {
      Observation obs;
      obs.product_id = product_id;
      obs.lot_id = product_id + "-L" + zero_pad(static_cast<std::size_t>(li + 1), 4);
      obs.mfg_date = dates[static_cast<std::size_t>(li)];
      obs.factors.reserve(p.factor_names.size());
      obs.factors.insert(obs.factors.end(), constant_levels.begin(), constant_levels.end());
      for (std::size_t f = static_cast<std::size_t>(n_constant); f < p.factor_names.size(); ++f)
        obs.factors.push_back(
            level_name(p.factor_names[f],
                       static_cast<int>(rng.uniform_int(0, spec.levels_per_factor - 1))));
      obs.value = rng.normal(mu, sigma);
      p.observations.push_back(std::move(obs));
    }
  }
  sort_by_production(p);
  return p;
}

// ---------------------------------------------------------------------------
// Scenario estimation and simulation
// ---------------------------------------------------------------------------

Scenario fit_scenario(const Portfolio& p, std::vector<std::string>* dropped) {
  Scenario s;
  s.factor_names = p.factor_names;
  for (const auto& [product_id, indices] : p.products) {
    if (indices.size() < 2) {
      if (dropped) dropped->push_back(product_id + " (too few lots)");
      continue;
    }
    Eigen::VectorXd values(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i)
      values[static_cast<Eigen::Index>(i)] = p.observations[indices[i]].value;

    ScenarioProduct sp;
    sp.product_id = product_id;
    sp.mu = median(values);
    sp.sigma = robust_std_dev(values);
    if (sp.sigma <= 0.0) {
      if (dropped) dropped->push_back(product_id + " (zero spread)");
      continue;
    }
    sp.lots.reserve(indices.size());
    for (std::size_t i : indices) {
      const auto& obs = p.observations[i];
      sp.lots.push_back({obs.lot_id, obs.mfg_date, obs.factors});
    }
    s.products.push_back(std::move(sp));
  }
  if (s.products.empty())
    throw DomainError("scenario fit failed: every product was dropped");
  return s;
}

namespace {

// Values for every scheduled lot, product-major. simulate_stable and the
// ARL engine share this so a seed means the same data in both.
std::vector<double> draw_values(const Scenario& s, bool with_outliers, Rng& rng) {
  std::vector<double> values;
  values.reserve(s.total_lots());
  bool contaminate = with_outliers && s.outlier_prob > 0.0;
  for (const auto& prod : s.products) {
    for (std::size_t i = 0; i < prod.lots.size(); ++i) {
      double v = prod.mu + prod.sigma * rng.normal();
      if (contaminate && rng.bernoulli(s.outlier_prob))
        v += rng.normal(0.0, s.outlier_sd_multiple * prod.sigma);
      values.push_back(v);
    }
  }
  return values;
}

}  // namespace

Portfolio simulate_stable(const Scenario& s, bool with_outliers, std::uint64_t seed) {
  if (s.products.empty()) throw DomainError("scenario has no products");
  Rng rng(seed);
  auto values = draw_values(s, with_outliers, rng);

  Portfolio p;
  p.factor_names = s.factor_names;
  p.observations.reserve(values.size());
  std::size_t pos = 0;
  for (const auto& prod : s.products) {
    for (const auto& lot : prod.lots) {
      Observation obs;
      obs.product_id = prod.product_id;
      obs.lot_id = lot.lot_id;
      obs.mfg_date = lot.mfg_date;
      obs.factors = lot.factors;
      obs.value = values[pos++];
      p.observations.push_back(std::move(obs));
    }
  }
  sort_by_production(p);
  return p;
}

Portfolio inject_root_cause(const Portfolio& p, const Scenario& s, const RootCause& rc,
                            double shift_multiple, double phase_split) {
  if (phase_split <= 0.0 || phase_split >= 1.0)
    throw DomainError("phase split must lie strictly between 0 and 1");
  std::size_t fi = factor_index_of(p.factor_names, rc.factor_name, "root cause " + rc.id);

  std::map<std::string, double> sigma_of;
  for (const auto& prod : s.products) sigma_of[prod.product_id] = prod.sigma;

  bool level_seen = false;
  for (const auto& obs : p.observations)
    if (obs.factors[fi] == rc.level) level_seen = true;
  if (!level_seen)
    throw DomainError("root cause " + rc.id + ": level '" + rc.level + "' never occurs in factor '" +
                      rc.factor_name + "'");

  Portfolio out = p;
  auto n1 = static_cast<std::size_t>(std::floor(phase_split * static_cast<double>(p.size())));
  for (std::size_t i = n1; i < out.observations.size(); ++i) {
    auto& obs = out.observations[i];
    if (obs.factors[fi] != rc.level) continue;
    auto it = sigma_of.find(obs.product_id);
    if (it == sigma_of.end())
      throw DomainError("root cause " + rc.id + ": product '" + obs.product_id +
                        "' is not part of the scenario");
    obs.value += shift_multiple * it->second;
  }
  return out;
}

std::string to_string(ChartKind k) { return k == ChartKind::Ir ? "ir" : "ewma"; }

// ---------------------------------------------------------------------------
// ARL study engine
// ---------------------------------------------------------------------------

const ArlCell* ArlReport::find(ChartKind chart, CenterMethod cm, ScaleMethod::Kind sm,
                               const std::string& root_cause_id, double shift) const {
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& k = keys[i];
    if (k.chart == chart && k.center == cm && k.scale.kind == sm &&
        k.root_cause_id == root_cause_id && k.shift == shift)
      return &cells[i];
  }
  return nullptr;
}

namespace {

// Schedule geometry shared by all replicates: the production order, per-lot
// product and sigma, per-cause affected masks. Values are the only thing
// that changes between replicates.
struct StudyLayout {
  std::size_t n_total = 0;
  std::size_t n_phase1 = 0;
  std::vector<std::size_t> schedule_pos;        // production index -> draw position
  std::vector<int> product_of;                  // production index -> dense product
  std::vector<double> sigma_of;                 // production index -> scenario sigma
  std::vector<std::vector<std::size_t>> product_obs;  // dense product -> production idx (asc)
  std::vector<std::vector<bool>> affected;      // per cause -> mask over production idx
};

StudyLayout build_layout(const Scenario& s, const std::vector<RootCause>& causes) {
  struct Slot {
    Date date;
    const std::string* lot_id;
    int product;
    double sigma;
    std::size_t schedule_pos;
    const std::vector<std::string>* factors;
  };
  std::vector<Slot> slots;
  slots.reserve(s.total_lots());
  std::size_t pos = 0;
  for (std::size_t pi = 0; pi < s.products.size(); ++pi) {
    const auto& prod = s.products[pi];
    for (const auto& lot : prod.lots)
      slots.push_back({lot.mfg_date, &lot.lot_id, static_cast<int>(pi), prod.sigma, pos++,
                       &lot.factors});
  }
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.date != b.date) return a.date < b.date;
    return *a.lot_id < *b.lot_id;
  });

  StudyLayout layout;
  layout.n_total = slots.size();
  layout.n_phase1 =
      static_cast<std::size_t>(std::floor(s.phase_split * static_cast<double>(slots.size())));
  layout.schedule_pos.resize(slots.size());
  layout.product_of.resize(slots.size());
  layout.sigma_of.resize(slots.size());
  layout.product_obs.resize(s.products.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    layout.schedule_pos[i] = slots[i].schedule_pos;
    layout.product_of[i] = slots[i].product;
    layout.sigma_of[i] = slots[i].sigma;
    layout.product_obs[static_cast<std::size_t>(slots[i].product)].push_back(i);
  }
  layout.affected.resize(causes.size());
  for (std::size_t c = 0; c < causes.size(); ++c) {
    std::size_t fi = factor_index_of(s.factor_names, causes[c].factor_name,
                                     "root cause " + causes[c].id);
    auto& mask = layout.affected[c];
    mask.resize(slots.size());
    bool seen = false;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      mask[i] = (*slots[i].factors)[fi] == causes[c].level;
      seen = seen || mask[i];
    }
    if (!seen)
      throw DomainError("root cause " + causes[c].id + ": level '" + causes[c].level +
                        "' never occurs in factor '" + causes[c].factor_name + "'");
  }
  return layout;
}

// (cause index, shift); cause -1 is the stable baseline.
struct Variant {
  int cause = -1;
  double shift = 0.0;
};

struct CellAccum {
  double rl_mean = 0.0;
  std::uint32_t signals = 0;
  bool has_signal = false;
  bool degenerate = false;
};

}  // namespace

ArlReport arl_study(const Scenario& s, const ArlStudyConfig& cfg) {
  if (cfg.n_sim < 1) throw DomainError("arl_study: n_sim must be >= 1");
  if (cfg.charts.empty()) throw DomainError("arl_study: no chart kinds requested");
  if (cfg.grid.centers.empty() || cfg.grid.scales.empty())
    throw DomainError("arl_study: empty method grid");
  if (s.phase_split <= 0.0 || s.phase_split >= 1.0)
    throw DomainError("arl_study: phase split must lie strictly between 0 and 1");

  StudyLayout layout = build_layout(s, cfg.root_causes);
  if (layout.n_phase1 < 3)
    throw DomainError("arl_study: phase I holds fewer than 3 lots");
  if (layout.n_phase1 >= layout.n_total)
    throw DomainError("arl_study: phase II is empty");

  // Variants: stable baseline first, then each cause at each nonzero shift.
  std::vector<Variant> variants{{-1, 0.0}};
  for (std::size_t c = 0; c < cfg.root_causes.size(); ++c)
    for (double shift : cfg.root_causes[c].shift_multiples)
      if (shift != 0.0) variants.push_back({static_cast<int>(c), shift});

  ArlReport report;
  report.master_seed = cfg.master_seed;
  report.n_sim = cfg.n_sim;
  report.with_outliers = cfg.with_outliers;
  for (ChartKind chart : cfg.charts)
    for (CenterMethod cm : cfg.grid.centers)
      for (const ScaleMethod& sm : cfg.grid.scales)
        for (const Variant& v : variants)
          report.keys.push_back({chart, cm, sm,
                                 v.cause < 0 ? kStableCellId
                                             : cfg.root_causes[static_cast<std::size_t>(v.cause)].id,
                                 v.shift});
  const std::size_t n_cells = report.keys.size();

  const std::size_t n_methods = cfg.grid.centers.size() * cfg.grid.scales.size();
  const std::size_t cells_per_chart = n_methods * variants.size();

  std::vector<std::vector<CellAccum>> results(static_cast<std::size_t>(cfg.n_sim));

  const bool phase_needed =
      variants.size() > 1 || cfg.stable_eval == StableEvaluation::PhaseSplit;
  const bool full_needed = cfg.stable_eval == StableEvaluation::FullSeries;

  auto run_replicate = [&](int r) {
    auto& out = results[static_cast<std::size_t>(r)];
    out.assign(n_cells, CellAccum{});

    Rng rng(Rng::derive(cfg.master_seed, static_cast<std::uint64_t>(r)));
    std::vector<double> drawn = draw_values(s, cfg.with_outliers, rng);
    // Production-ordered value stream for this replicate.
    std::vector<double> value(layout.n_total);
    for (std::size_t i = 0; i < layout.n_total; ++i) value[i] = drawn[layout.schedule_pos[i]];

    const std::size_t n1 = layout.n_phase1;
    std::vector<double> buffer;
    std::vector<double> z1, z2;
    std::vector<char> usable(layout.product_obs.size());
    std::vector<double> p_center(layout.product_obs.size()), p_scale(layout.product_obs.size());

    // Per-product summaries using lots before the cutoff index.
    auto fit_summaries = [&](std::size_t limit, CenterMethod cm, const ScaleMethod& sm) {
      for (std::size_t pi = 0; pi < layout.product_obs.size(); ++pi) {
        buffer.clear();
        for (std::size_t i : layout.product_obs[pi]) {
          if (i >= limit) break;  // ascending production indices
          buffer.push_back(value[i]);
        }
        usable[pi] = 0;
        if (buffer.size() < 2) continue;
        Eigen::Map<const Eigen::VectorXd> vals(buffer.data(),
                                               static_cast<Eigen::Index>(buffer.size()));
        double c = center(vals, cm);
        double sc = scale(vals, sm);
        if (sc <= 0.0) continue;
        usable[pi] = 1;
        p_center[pi] = c;
        p_scale[pi] = sc;
      }
    };
    // Standardized stream over [from, to) for the current summaries, with
    // an optional root-cause shift on affected lots.
    auto build_stream = [&](std::vector<double>& z, std::size_t from, std::size_t to,
                            const std::vector<bool>* mask, double shift) {
      z.clear();
      for (std::size_t i = from; i < to; ++i) {
        int pi = layout.product_of[i];
        if (!usable[static_cast<std::size_t>(pi)]) continue;
        double raw = value[i];
        if (mask && (*mask)[i]) raw += shift * layout.sigma_of[i];
        z.push_back((raw - p_center[static_cast<std::size_t>(pi)]) /
                    p_scale[static_cast<std::size_t>(pi)]);
      }
    };
    auto record = [&](std::size_t cell, const RunLengthStats& stats) {
      out[cell].signals = static_cast<std::uint32_t>(stats.n_signals);
      if (stats.arl) {
        out[cell].has_signal = true;
        out[cell].rl_mean = *stats.arl;
      }
    };

    std::size_t method_idx = 0;
    for (CenterMethod cm : cfg.grid.centers) {
      for (const ScaleMethod& sm : cfg.grid.scales) {
        if (full_needed) {
          // Stable cell, full-series design: in-sample summaries, limits
          // estimated from the charted series itself.
          fit_summaries(layout.n_total, cm, sm);
          build_stream(z1, 0, layout.n_total, nullptr, 0.0);
          for (std::size_t ci = 0; ci < cfg.charts.size(); ++ci) {
            std::size_t cell = ci * cells_per_chart + method_idx * variants.size();
            if (z1.size() < 3) {
              out[cell].degenerate = true;
              continue;
            }
            Eigen::Map<const Eigen::VectorXd> zv(z1.data(), static_cast<Eigen::Index>(z1.size()));
            try {
              if (cfg.charts[ci] == ChartKind::Ir)
                record(cell, run_lengths(ir_chart(zv).flags));
              else
                record(cell,
                       run_lengths(ewma_chart(zv, cfg.ewma_lambda, cfg.ewma_limit_width).flags));
            } catch (const DegenerateLimitsError&) {
              out[cell].degenerate = true;
            }
          }
        }

        if (phase_needed) {
          // Frozen-limit pipeline: phase-I summaries and limits, phase-II
          // monitoring.
          fit_summaries(n1, cm, sm);
          build_stream(z1, 0, n1, nullptr, 0.0);

          std::optional<IrLimits> ir_frozen;
          std::optional<EwmaParams> ewma_frozen;
          bool degenerate = z1.size() < 3;
          if (!degenerate) {
            Eigen::Map<const Eigen::VectorXd> z1v(z1.data(),
                                                  static_cast<Eigen::Index>(z1.size()));
            try {
              ir_frozen = estimate_ir_limits(z1v);
              ewma_frozen = EwmaParams{z1v.mean(), ir_frozen->mr_bar / kMovingRangeD2};
            } catch (const DegenerateLimitsError&) {
              degenerate = true;
            }
          }

          for (std::size_t vi = full_needed ? 1 : 0; vi < variants.size(); ++vi) {
            const Variant& v = variants[vi];
            const std::vector<bool>* mask =
                v.cause >= 0 ? &layout.affected[static_cast<std::size_t>(v.cause)] : nullptr;
            build_stream(z2, n1, layout.n_total, mask, v.shift);

            for (std::size_t ci = 0; ci < cfg.charts.size(); ++ci) {
              std::size_t cell = ci * cells_per_chart + method_idx * variants.size() + vi;
              if (degenerate) {
                out[cell].degenerate = true;
                continue;
              }
              RunLengthStats stats;
              if (!z2.empty()) {
                Eigen::Map<const Eigen::VectorXd> z2v(z2.data(),
                                                      static_cast<Eigen::Index>(z2.size()));
                if (cfg.charts[ci] == ChartKind::Ir)
                  stats = run_lengths(ir_chart(z2v, ir_frozen).flags);
                else
                  stats = run_lengths(
                      ewma_chart(z2v, cfg.ewma_lambda, cfg.ewma_limit_width, ewma_frozen).flags);
              }
              record(cell, stats);
            }
          }
        }
        ++method_idx;
      }
    }
  };

  // Replicates are independent; results land in per-replicate slots so the
  // reduction below is identical for any worker count.
  int n_workers = cfg.n_threads > 0 ? cfg.n_threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
  n_workers = std::clamp(n_workers, 1, cfg.n_sim);

  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      int r = next.fetch_add(1);
      if (r >= cfg.n_sim) return;
      try {
        run_replicate(r);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  report.cells.assign(n_cells, ArlCell{});
  for (int r = 0; r < cfg.n_sim; ++r) {
    const auto& rep = results[static_cast<std::size_t>(r)];
    for (std::size_t c = 0; c < n_cells; ++c) {
      auto& cell = report.cells[c];
      if (rep[c].degenerate) {
        ++cell.n_degenerate;
        continue;
      }
      ++cell.n_replicates;
      cell.n_signals += rep[c].signals;
      if (rep[c].has_signal) {
        ++cell.replicates_with_signal;
        cell.arl = cell.arl.value_or(0.0) + rep[c].rl_mean;
      }
    }
  }
  for (auto& cell : report.cells)
    if (cell.arl) *cell.arl /= static_cast<double>(cell.replicates_with_signal);
  return report;
}

// ---------------------------------------------------------------------------
// JSON documents
// ---------------------------------------------------------------------------

namespace {

const json* find_field(const json& j, const std::string& key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

[[noreturn]] void bad_field(const std::string& path, const std::string& what) {
  throw DomainError("scenario document: " + path + " " + what);
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) bad_field(path, "must be a number");
  return j.get<double>();
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string()) bad_field(path, "must be a string");
  return j.get<std::string>();
}

Date as_date(const json& j, const std::string& path) {
  auto d = parse_date(as_string(j, path));
  if (!d) bad_field(path, "must be an ISO-8601 date (YYYY-MM-DD)");
  return *d;
}

double number_or(const json& j, const std::string& key, double fallback,
                 const std::string& path) {
  const json* f = find_field(j, key);
  return f ? as_number(*f, path + "." + key) : fallback;
}

std::int64_t int_or(const json& j, const std::string& key, std::int64_t fallback,
                    const std::string& path) {
  const json* f = find_field(j, key);
  if (!f) return fallback;
  if (!f->is_number_integer()) bad_field(path + "." + key, "must be an integer");
  return f->get<std::int64_t>();
}

}  // namespace

Scenario scenario_from_json(const json& j) {
  if (!j.is_object()) throw DomainError("scenario document: root must be a JSON object");
  Scenario s;
  s.outlier_prob = number_or(j, "outlier_prob", s.outlier_prob, "");
  s.outlier_sd_multiple = number_or(j, "outlier_sd_multiple", s.outlier_sd_multiple, "");
  s.phase_split = number_or(j, "phase_split", s.phase_split, "");
  if (s.outlier_prob < 0.0 || s.outlier_prob > 1.0)
    bad_field("outlier_prob", "must lie in [0, 1]");
  if (s.outlier_sd_multiple <= 0.0) bad_field("outlier_sd_multiple", "must be positive");
  if (s.phase_split <= 0.0 || s.phase_split >= 1.0)
    bad_field("phase_split", "must lie strictly between 0 and 1");

  const json* names = find_field(j, "factor_names");
  if (!names || !names->is_array()) bad_field("factor_names", "must be an array of strings");
  for (std::size_t i = 0; i < names->size(); ++i)
    s.factor_names.push_back(as_string((*names)[i], "factor_names[" + std::to_string(i) + "]"));

  const json* products = find_field(j, "products");
  if (!products || !products->is_array() || products->empty())
    bad_field("products", "must be a non-empty array");

  std::set<std::string> product_ids;
  for (std::size_t pi = 0; pi < products->size(); ++pi) {
    std::string ppath = "products[" + std::to_string(pi) + "]";
    const json& pj = (*products)[pi];
    if (!pj.is_object()) bad_field(ppath, "must be an object");
    ScenarioProduct sp;
    const json* id = find_field(pj, "product_id");
    if (!id) bad_field(ppath + ".product_id", "is required");
    sp.product_id = as_string(*id, ppath + ".product_id");
    if (!product_ids.insert(sp.product_id).second)
      bad_field(ppath + ".product_id", "duplicates '" + sp.product_id + "'");
    const json* mu = find_field(pj, "mu");
    if (!mu) bad_field(ppath + ".mu", "is required");
    sp.mu = as_number(*mu, ppath + ".mu");
    const json* sigma = find_field(pj, "sigma");
    if (!sigma) bad_field(ppath + ".sigma", "is required");
    sp.sigma = as_number(*sigma, ppath + ".sigma");
    if (!(sp.sigma > 0.0)) bad_field(ppath + ".sigma", "must be positive");

    const json* lots = find_field(pj, "lots");
    if (!lots || !lots->is_array() || lots->empty())
      bad_field(ppath + ".lots", "must be a non-empty array");
    std::set<std::string> lot_ids;
    for (std::size_t li = 0; li < lots->size(); ++li) {
      std::string lpath = ppath + ".lots[" + std::to_string(li) + "]";
      const json& lj = (*lots)[li];
      if (!lj.is_object()) bad_field(lpath, "must be an object");
      LotSpec lot;
      const json* lot_id = find_field(lj, "lot_id");
      if (!lot_id) bad_field(lpath + ".lot_id", "is required");
      lot.lot_id = as_string(*lot_id, lpath + ".lot_id");
      if (!lot_ids.insert(lot.lot_id).second)
        bad_field(lpath + ".lot_id", "duplicates '" + lot.lot_id + "'");
      const json* date = find_field(lj, "mfg_date");
      if (!date) bad_field(lpath + ".mfg_date", "is required");
      lot.mfg_date = as_date(*date, lpath + ".mfg_date");

      lot.factors.assign(s.factor_names.size(), kMissingLevel);
      if (const json* factors = find_field(lj, "factors")) {
        if (!factors->is_object()) bad_field(lpath + ".factors", "must be an object");
        for (const auto& [key, val] : factors->items()) {
          auto it = std::find(s.factor_names.begin(), s.factor_names.end(), key);
          if (it == s.factor_names.end())
            bad_field(lpath + ".factors." + key, "is not a declared factor");
          lot.factors[static_cast<std::size_t>(it - s.factor_names.begin())] =
              as_string(val, lpath + ".factors." + key);
        }
      }
      sp.lots.push_back(std::move(lot));
    }
    std::stable_sort(sp.lots.begin(), sp.lots.end(), [](const LotSpec& a, const LotSpec& b) {
      if (a.mfg_date != b.mfg_date) return a.mfg_date < b.mfg_date;
      return a.lot_id < b.lot_id;
    });
    s.products.push_back(std::move(sp));
  }
  return s;
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["outlier_prob"] = s.outlier_prob;
  j["outlier_sd_multiple"] = s.outlier_sd_multiple;
  j["phase_split"] = s.phase_split;
  j["factor_names"] = s.factor_names;
  json products = json::array();
  for (const auto& p : s.products) {
    json pj;
    pj["product_id"] = p.product_id;
    pj["mu"] = p.mu;
    pj["sigma"] = p.sigma;
    json lots = json::array();
    for (const auto& lot : p.lots) {
      json lj;
      lj["lot_id"] = lot.lot_id;
      lj["mfg_date"] = format_date(lot.mfg_date);
      json factors;
      for (std::size_t f = 0; f < s.factor_names.size(); ++f)
        factors[s.factor_names[f]] = lot.factors[f];
      lj["factors"] = std::move(factors);
      lots.push_back(std::move(lj));
    }
    pj["lots"] = std::move(lots);
    products.push_back(std::move(pj));
  }
  j["products"] = std::move(products);
  return j;
}

std::vector<RootCause> root_causes_from_json(const json& j) {
  std::vector<RootCause> causes;
  const json* arr = find_field(j, "root_causes");
  if (!arr) return causes;
  if (!arr->is_array()) bad_field("root_causes", "must be an array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    std::string path = "root_causes[" + std::to_string(i) + "]";
    const json& cj = (*arr)[i];
    if (!cj.is_object()) bad_field(path, "must be an object");
    RootCause rc;
    const json* id = find_field(cj, "id");
    rc.id = id ? as_string(*id, path + ".id") : std::string(1, static_cast<char>('A' + i));
    if (!ids.insert(rc.id).second) bad_field(path + ".id", "duplicates '" + rc.id + "'");
    const json* factor = find_field(cj, "factor");
    if (!factor) bad_field(path + ".factor", "is required");
    rc.factor_name = as_string(*factor, path + ".factor");
    const json* level = find_field(cj, "level");
    if (!level) bad_field(path + ".level", "is required");
    rc.level = as_string(*level, path + ".level");
    if (const json* shifts = find_field(cj, "shifts")) {
      if (!shifts->is_array() || shifts->empty())
        bad_field(path + ".shifts", "must be a non-empty array of numbers");
      rc.shift_multiples.clear();
      for (std::size_t k = 0; k < shifts->size(); ++k)
        rc.shift_multiples.push_back(
            as_number((*shifts)[k], path + ".shifts[" + std::to_string(k) + "]"));
    }
    causes.push_back(std::move(rc));
  }
  return causes;
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec spec;
  spec.n_products = static_cast<int>(int_or(j, "n_products", spec.n_products, "synth"));
  spec.n_factors = static_cast<int>(int_or(j, "n_factors", spec.n_factors, "synth"));
  spec.levels_per_factor =
      static_cast<int>(int_or(j, "levels_per_factor", spec.levels_per_factor, "synth"));
  spec.seed = static_cast<std::uint64_t>(int_or(j, "seed", static_cast<std::int64_t>(spec.seed),
                                                "synth"));
  if (const json* d = find_field(j, "date_start")) spec.date_start = as_date(*d, "synth.date_start");
  if (const json* d = find_field(j, "date_end")) spec.date_end = as_date(*d, "synth.date_end");
  spec.mu_log10_min = number_or(j, "mu_log10_min", spec.mu_log10_min, "synth");
  spec.mu_log10_max = number_or(j, "mu_log10_max", spec.mu_log10_max, "synth");
  spec.cv_min = number_or(j, "cv_min", spec.cv_min, "synth");
  spec.cv_max = number_or(j, "cv_max", spec.cv_max, "synth");
  if (const json* lc = find_field(j, "lot_counts")) {
    if (!lc->is_object()) bad_field("synth.lot_counts", "must be an object");
    auto& s = spec.lot_counts;
    s.geometric_p = number_or(*lc, "geometric_p", s.geometric_p, "synth.lot_counts");
    s.min_lots = static_cast<int>(int_or(*lc, "min", s.min_lots, "synth.lot_counts"));
    s.max_lots = static_cast<int>(int_or(*lc, "max", s.max_lots, "synth.lot_counts"));
    s.high_volume_prob =
        number_or(*lc, "high_volume_prob", s.high_volume_prob, "synth.lot_counts");
    s.high_volume_min =
        static_cast<int>(int_or(*lc, "high_volume_min", s.high_volume_min, "synth.lot_counts"));
    s.high_volume_max =
        static_cast<int>(int_or(*lc, "high_volume_max", s.high_volume_max, "synth.lot_counts"));
    if (s.geometric_p <= 0.0 || s.geometric_p >= 1.0)
      bad_field("synth.lot_counts.geometric_p", "must lie strictly between 0 and 1");
    if (s.high_volume_prob < 0.0 || s.high_volume_prob > 1.0)
      bad_field("synth.lot_counts.high_volume_prob", "must lie in [0, 1]");
  }
  return spec;
}

Scenario load_scenario_document(const json& j, std::vector<RootCause>* root_causes) {
  if (!j.is_object()) throw DomainError("scenario document: root must be a JSON object");
  Scenario s;
  if (find_field(j, "products")) {
    s = scenario_from_json(j);
  } else if (const json* synth = find_field(j, "synth")) {
    if (!synth->is_object()) bad_field("synth", "must be an object");
    Portfolio p = synth_portfolio(synth_spec_from_json(*synth));
    s = fit_scenario(p);
    s.outlier_prob = number_or(j, "outlier_prob", s.outlier_prob, "");
    s.outlier_sd_multiple = number_or(j, "outlier_sd_multiple", s.outlier_sd_multiple, "");
    s.phase_split = number_or(j, "phase_split", s.phase_split, "");
    if (s.outlier_prob < 0.0 || s.outlier_prob > 1.0)
      bad_field("outlier_prob", "must lie in [0, 1]");
    if (s.outlier_sd_multiple <= 0.0) bad_field("outlier_sd_multiple", "must be positive");
    if (s.phase_split <= 0.0 || s.phase_split >= 1.0)
      bad_field("phase_split", "must lie strictly between 0 and 1");
  } else {
    throw DomainError("scenario document: needs either 'products' or a 'synth' block");
  }

  std::vector<RootCause> causes = root_causes_from_json(j);
  for (std::size_t i = 0; i < causes.size(); ++i) {
    std::string path = "root_causes[" + std::to_string(i) + "]";
    auto fp = factor_level_footprint(s, causes[i].factor_name);
    if (!fp.count(causes[i].level))
      bad_field(path + ".level",
                "level '" + causes[i].level + "' never occurs in factor '" +
                    causes[i].factor_name + "'");
  }
  if (root_causes) *root_causes = std::move(causes);
  return s;
}

// ---------------------------------------------------------------------------
// Table exports
// ---------------------------------------------------------------------------

namespace {

std::string cell_text(const ArlCell* cell) {
  if (!cell || !cell->arl) return "NA";
  return csv::format_double(*cell->arl);
}

std::vector<ChartKind> charts_in(const ArlReport& r) {
  std::vector<ChartKind> charts;
  for (const auto& k : r.keys)
    if (std::find(charts.begin(), charts.end(), k.chart) == charts.end())
      charts.push_back(k.chart);
  return charts;
}

}  // namespace

void write_arl0_csv(const ArlReport& without_outliers, const ArlReport& with_outliers,
                    const MethodGrid& grid, const std::filesystem::path& path) {
  csv::Writer w(path);
  std::vector<std::string> header{"chart", "outliers", "centre"};
  for (const auto& sm : grid.scales) header.push_back(to_string(sm));
  w.row(header);
  for (ChartKind chart : charts_in(without_outliers)) {
    for (const auto& [label, report] :
         {std::pair<const char*, const ArlReport*>{"excl", &without_outliers},
          std::pair<const char*, const ArlReport*>{"incl", &with_outliers}}) {
      for (CenterMethod cm : grid.centers) {
        std::vector<std::string> row{to_string(chart), label, to_string(cm)};
        for (const auto& sm : grid.scales)
          row.push_back(cell_text(report->find(chart, cm, sm.kind, kStableCellId, 0.0)));
        w.row(row);
      }
    }
  }
}

void write_arl1_csv(const ArlReport& report, const std::vector<RootCause>& causes,
                    const MethodGrid& grid, const std::filesystem::path& path) {
  csv::Writer w(path);
  std::vector<std::string> header{"chart", "root_cause", "sigma", "centre"};
  for (const auto& sm : grid.scales) header.push_back(to_string(sm));
  w.row(header);
  for (ChartKind chart : charts_in(report)) {
    for (const auto& rc : causes) {
      std::vector<double> shifts{0.0};
      for (double sft : rc.shift_multiples)
        if (sft != 0.0) shifts.push_back(sft);
      for (double sft : shifts) {
        for (CenterMethod cm : grid.centers) {
          std::vector<std::string> row{to_string(chart), rc.id, csv::format_double(sft),
                                       to_string(cm)};
          for (const auto& sm : grid.scales) {
            const ArlCell* cell = sft == 0.0
                                      ? report.find(chart, cm, sm.kind, kStableCellId, 0.0)
                                      : report.find(chart, cm, sm.kind, rc.id, sft);
            row.push_back(cell_text(cell));
          }
          w.row(row);
        }
      }
    }
  }
}

}  // namespace spcpool
