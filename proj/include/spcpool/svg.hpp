#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spcpool/charts.hpp"
#include "spcpool/dates.hpp"

namespace spcpool {

// Static chart renderings for review; flagged points are drawn larger and
// in the alarm colour.

// Two stacked panels: individuals with center/UCL/LCL, moving ranges with
// their upper limit.
std::string render_ir_svg(const IrChart& chart, const std::string& title);

// One panel; the limit band widens towards its asymptote.
std::string render_ewma_svg(const EwmaChart& chart, const std::string& title);

struct FacetPoint {
  std::string level;
  double value = 0.0;
  bool late_period = false;  // after the date threshold
};

// Standardized values grouped by factor level, early vs late period marked
// by colour; the root-cause review view.
std::string render_facet_svg(const std::vector<FacetPoint>& points,
                             const std::string& factor_name, const std::string& title,
                             std::optional<Date> threshold);

}  // namespace spcpool
