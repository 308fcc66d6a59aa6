#include "spcpool/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

#include "spcpool/csv.hpp"
#include "spcpool/errors.hpp"

namespace spcpool {

void Portfolio::reindex() {
  products.clear();
  for (std::size_t i = 0; i < observations.size(); ++i)
    products[observations[i].product_id].push_back(i);
}

std::vector<std::size_t> production_order(const Portfolio& p) {
  std::vector<std::size_t> idx(p.observations.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto& oa = p.observations[a];
    const auto& ob = p.observations[b];
    return std::tie(oa.mfg_date, oa.lot_id) < std::tie(ob.mfg_date, ob.lot_id);
  });
  return idx;
}

void sort_by_production(Portfolio& p) {
  auto order = production_order(p);
  std::vector<Observation> sorted;
  sorted.reserve(order.size());
  for (std::size_t i : order) sorted.push_back(std::move(p.observations[i]));
  p.observations = std::move(sorted);
  p.reindex();
}

Portfolio production_prefix(const Portfolio& p, std::size_t n) {
  Portfolio out;
  out.factor_names = p.factor_names;
  n = std::min(n, p.observations.size());
  out.observations.assign(p.observations.begin(),
                          p.observations.begin() + static_cast<std::ptrdiff_t>(n));
  out.reindex();
  return out;
}

namespace {

std::optional<double> parse_value(const std::string& s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

Portfolio load_portfolio(const std::filesystem::path& path, const SchemaMap& schema) {
  auto table = csv::read_file(path);
  const std::string origin = path.string();

  auto column = [&](const std::string& name) -> std::size_t {
    auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end())
      throw SchemaError(origin + ": header is missing required column '" + name + "'");
    return static_cast<std::size_t>(it - table.header.begin());
  };
  std::size_t col_product = column(schema.product);
  std::size_t col_lot = column(schema.lot);
  std::size_t col_date = column(schema.date);
  std::size_t col_value = column(schema.value);

  Portfolio p;
  std::vector<std::size_t> factor_cols;
  std::set<std::size_t> reserved{col_product, col_lot, col_date, col_value};
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (reserved.count(c)) continue;
    p.factor_names.push_back(table.header[c]);
    factor_cols.push_back(c);
  }

  std::set<std::pair<std::string, std::string>> seen_keys;
  for (const auto& rec : table.records) {
    if (rec.fields.size() != table.header.size())
      throw RowError(origin, rec.line,
                     "expected " + std::to_string(table.header.size()) + " fields, got " +
                         std::to_string(rec.fields.size()));
    Observation obs;
    obs.product_id = rec.fields[col_product];
    obs.lot_id = rec.fields[col_lot];
    if (obs.product_id.empty()) throw RowError(origin, rec.line, "empty product id");
    if (obs.lot_id.empty()) throw RowError(origin, rec.line, "empty lot id");

    auto date = parse_date(rec.fields[col_date]);
    if (!date)
      throw RowError(origin, rec.line,
                     "cannot parse date '" + rec.fields[col_date] + "' (expected YYYY-MM-DD)");
    obs.mfg_date = *date;

    auto value = parse_value(rec.fields[col_value]);
    if (!value)
      throw RowError(origin, rec.line,
                     "cannot parse measurement value '" + rec.fields[col_value] + "'");
    obs.value = *value;

    if (!seen_keys.emplace(obs.product_id, obs.lot_id).second)
      throw DuplicateKeyError(origin + ":" + std::to_string(rec.line) + ": duplicate lot (" +
                              obs.product_id + ", " + obs.lot_id + ")");

    obs.factors.reserve(factor_cols.size());
    for (std::size_t c : factor_cols) {
      const std::string& level = rec.fields[c];
      obs.factors.push_back(level.empty() ? kMissingLevel : level);
    }
    p.observations.push_back(std::move(obs));
  }

  sort_by_production(p);
  return p;
}

void save_portfolio(const Portfolio& p, const std::filesystem::path& path,
                    const SchemaMap& schema) {
  csv::Writer w(path);
  std::vector<std::string> header{schema.product, schema.lot, schema.date, schema.value};
  header.insert(header.end(), p.factor_names.begin(), p.factor_names.end());
  w.row(header);
  for (const auto& obs : p.observations) {
    std::vector<std::string> row{obs.product_id, obs.lot_id, format_date(obs.mfg_date),
                                 csv::format_double(obs.value)};
    row.insert(row.end(), obs.factors.begin(), obs.factors.end());
    w.row(row);
  }
}

}  // namespace spcpool
