#include "spcpool/standardize.hpp"

#include "spcpool/csv.hpp"
#include "spcpool/errors.hpp"

namespace spcpool {

std::string to_string(ExcludeReason r) {
  return r == ExcludeReason::TooFewLots ? "too_few_lots" : "zero_scale";
}

const ProductSummary* Summaries::find(const std::string& product_id) const {
  auto it = by_product.find(product_id);
  return it == by_product.end() ? nullptr : &it->second;
}

std::size_t Summaries::excluded_lot_count(const Portfolio& p) const {
  std::size_t count = 0;
  for (const auto& ex : excluded) {
    auto it = p.products.find(ex.product_id);
    if (it != p.products.end()) count += it->second.size();
  }
  return count;
}

Summaries summarize(const Portfolio& p, CenterMethod cm, ScaleMethod sm) {
  Summaries out;
  for (const auto& [product_id, indices] : p.products) {
    if (indices.size() < 2) {
      out.excluded.push_back({product_id, ExcludeReason::TooFewLots});
      continue;
    }
    Eigen::VectorXd values(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t i = 0; i < indices.size(); ++i)
      values[static_cast<Eigen::Index>(i)] = p.observations[indices[i]].value;

    ProductSummary s;
    s.product_id = product_id;
    s.n = indices.size();
    s.center = center(values, cm);
    s.scale = scale(values, sm);
    s.center_method = cm;
    s.scale_method = sm;
    if (s.scale <= 0.0) {
      out.excluded.push_back({product_id, ExcludeReason::ZeroScale});
      continue;
    }
    out.by_product.emplace(product_id, std::move(s));
  }
  return out;
}

StandardizedSeries standardize_with(const Portfolio& p, const Summaries& frozen) {
  StandardizedSeries series;
  series.summaries = frozen;

  // Products present here but unseen by the frozen fit count as excluded;
  // from the monitoring stream's point of view they have no usable history.
  std::vector<std::size_t> keep;
  keep.reserve(p.size());
  for (const auto& [product_id, indices] : p.products) {
    if (!frozen.find(product_id)) {
      bool already = false;
      for (const auto& ex : series.summaries.excluded)
        if (ex.product_id == product_id) already = true;
      if (!already)
        series.summaries.excluded.push_back({product_id, ExcludeReason::TooFewLots});
    }
  }
  for (std::size_t i = 0; i < p.observations.size(); ++i)
    if (frozen.find(p.observations[i].product_id)) keep.push_back(i);

  series.values.resize(static_cast<Eigen::Index>(keep.size()));
  series.source = std::move(keep);
  for (std::size_t j = 0; j < series.source.size(); ++j) {
    const auto& obs = p.observations[series.source[j]];
    const ProductSummary* s = frozen.find(obs.product_id);
    series.values[static_cast<Eigen::Index>(j)] = (obs.value - s->center) / s->scale;
  }
  return series;
}

StandardizedSeries standardize(const Portfolio& p, CenterMethod cm, ScaleMethod sm) {
  Summaries sums = summarize(p, cm, sm);
  if (sums.by_product.empty())
    throw DomainError("standardization has no usable products: all were excluded");
  return standardize_with(p, sums);
}

Eigen::MatrixXd standardized_covariance(Eigen::Index n, double sigma) {
  if (n < 2) throw DomainError("standardized covariance needs n >= 2");
  double nn = static_cast<double>(n);
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, -sigma / nn);
  m.diagonal().setConstant(sigma * (nn - 1.0) / nn);
  return m;
}

void write_standardized_csv(const StandardizedSeries& s, const Portfolio& p,
                            const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row({"order_index", "product_id", "lot_id", "mfg_date", "standardized_value"});
  for (std::size_t j = 0; j < s.source.size(); ++j) {
    const auto& obs = p.observations[s.source[j]];
    w.row({std::to_string(j), obs.product_id, obs.lot_id, format_date(obs.mfg_date),
           csv::format_double(s.values[static_cast<Eigen::Index>(j)])});
  }
}

void write_summaries_csv(const Summaries& s, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row({"product_id", "n", "center", "scale", "center_method", "scale_method", "excluded_reason"});
  for (const auto& [id, ps] : s.by_product) {
    w.row({id, std::to_string(ps.n), csv::format_double(ps.center), csv::format_double(ps.scale),
           to_string(ps.center_method), to_string(ps.scale_method), ""});
  }
  for (const auto& ex : s.excluded) {
    w.row({ex.product_id, "", "", "", "", "", to_string(ex.reason)});
  }
}

}  // namespace spcpool
