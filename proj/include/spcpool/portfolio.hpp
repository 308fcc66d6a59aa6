#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "spcpool/dates.hpp"

namespace spcpool {

// Level used when a factor cell is empty in the input.
inline const std::string kMissingLevel = "(missing)";

// One production lot's measurement. factors is aligned with the owning
// portfolio's factor_names.
struct Observation {
  std::string product_id;
  std::string lot_id;
  Date mfg_date{};
  double value = 0.0;
  std::vector<std::string> factors;
};

// A measurement series over a whole product portfolio. Observations are
// kept in production order: (mfg_date, lot_id), remaining ties stable.
// The structure is plain data; once built it is safe to share across
// threads read-only.
struct Portfolio {
  std::vector<Observation> observations;
  std::vector<std::string> factor_names;
  std::map<std::string, std::vector<std::size_t>> products;  // id -> observation indices

  std::size_t size() const { return observations.size(); }

  // Rebuilds the product index after observations change.
  void reindex();
};

// Stable sort permutation of p.observations by (mfg_date, lot_id).
// Applying it to an already sorted portfolio yields the identity.
std::vector<std::size_t> production_order(const Portfolio& p);

// Reorders observations into production order and reindexes.
void sort_by_production(Portfolio& p);

// The first n observations (production order) as their own portfolio; the
// phase-I slice.
Portfolio production_prefix(const Portfolio& p, std::size_t n);

}  // namespace spcpool
