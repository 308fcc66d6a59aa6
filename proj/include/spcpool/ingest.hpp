#pragma once

#include <filesystem>

#include "spcpool/portfolio.hpp"

namespace spcpool {

// Maps the reserved portfolio columns onto CSV header names. Every other
// column in the file becomes a categorical factor.
struct SchemaMap {
  std::string product = "product_id";
  std::string lot = "lot_id";
  std::string date = "mfg_date";
  std::string value = "value";
};

// Parses a portfolio CSV (UTF-8, ISO-8601 dates) and returns it sorted in
// production order. Throws SchemaError for missing columns, RowError with
// the offending line for bad cells, DuplicateKeyError for repeated
// (product_id, lot_id) pairs.
Portfolio load_portfolio(const std::filesystem::path& path, const SchemaMap& schema = {});

// Writes the portfolio back out with the same schema; load(save(p)) == p.
void save_portfolio(const Portfolio& p, const std::filesystem::path& path,
                    const SchemaMap& schema = {});

}  // namespace spcpool
