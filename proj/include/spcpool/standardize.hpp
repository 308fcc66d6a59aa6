#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spcpool/estimators.hpp"
#include "spcpool/portfolio.hpp"

namespace spcpool {

struct ProductSummary {
  std::string product_id;
  std::size_t n = 0;
  double center = 0.0;
  double scale = 0.0;
  CenterMethod center_method = CenterMethod::Mean;
  ScaleMethod scale_method = ScaleMethod::std_dev();
};

enum class ExcludeReason { TooFewLots, ZeroScale };

std::string to_string(ExcludeReason r);

struct Exclusion {
  std::string product_id;
  ExcludeReason reason;
};

// Per-product center/scale fits. Products that cannot be standardized are
// excluded as data, not as errors.
struct Summaries {
  std::map<std::string, ProductSummary> by_product;
  std::vector<Exclusion> excluded;

  const ProductSummary* find(const std::string& product_id) const;
  std::size_t excluded_lot_count(const Portfolio& p) const;
};

Summaries summarize(const Portfolio& p, CenterMethod cm, ScaleMethod sm);

// The pooled standardized series: one value per lot of every included
// product, in production order, with provenance back to the observations.
struct StandardizedSeries {
  Eigen::VectorXd values;
  std::vector<std::size_t> source;  // observation index per value
  Summaries summaries;
};

// Fits summaries on p itself and standardizes. Throws DomainError when
// every product is excluded.
StandardizedSeries standardize(const Portfolio& p, CenterMethod cm, ScaleMethod sm);

// Standardizes p against previously fitted (frozen) summaries; lots of
// products without a summary are recorded as excluded. The phase-II path.
StandardizedSeries standardize_with(const Portfolio& p, const Summaries& frozen);

// Covariance structure induced by standardizing n lots with their own
// sample mean/sd: diagonal (n-1)/n * sigma, off-diagonal -1/n * sigma.
// Rows sum to zero. Used as a Monte Carlo oracle.
Eigen::MatrixXd standardized_covariance(Eigen::Index n, double sigma);

// CSV export: order_index, product_id, lot_id, mfg_date, standardized_value.
void write_standardized_csv(const StandardizedSeries& s, const Portfolio& p,
                            const std::filesystem::path& path);

// CSV export of summaries and exclusions.
void write_summaries_csv(const Summaries& s, const std::filesystem::path& path);

}  // namespace spcpool
