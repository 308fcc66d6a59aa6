#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "spcpool/estimators.hpp"

namespace spcpool {

// Individuals-chart constants from the standard factor tables.
inline constexpr double kMovingRangeD2 = 1.128;      // E[MR]/sigma for n = 2
inline constexpr double kIrLimitMultiplier = 2.66;   // tabulated 3/d2
inline constexpr double kMovingRangeD4 = 3.267;      // MR chart upper factor

struct IrLimits {
  double center_line = 0.0;
  double lcl = 0.0;
  double ucl = 0.0;
  double mr_bar = 0.0;
  double mr_ucl = 0.0;
};

// Individuals and moving-range chart. flags mark individuals outside
// [lcl, ucl]; mr_flags mark moving ranges above mr_ucl. moving_ranges has
// one element less than values.
struct IrChart {
  IrLimits limits;
  Eigen::VectorXd values;
  std::vector<bool> flags;
  Eigen::VectorXd moving_ranges;
  std::vector<bool> mr_flags;

  bool any_flag() const;
  bool any_individual_flag() const;
};

// Mean absolute difference of neighbours.
double mean_moving_range(Eigen::Ref<const Eigen::VectorXd> series);

// Estimates limits from the series itself (phase I): center +- 2.66 * MRbar,
// MR UCL = 3.267 * MRbar. Needs length >= 3 and MRbar > 0.
IrLimits estimate_ir_limits(Eigen::Ref<const Eigen::VectorXd> series);

// Builds the chart; with frozen limits the series may be any length >= 1
// (phase-II mode), otherwise limits are estimated from the series.
IrChart ir_chart(Eigen::Ref<const Eigen::VectorXd> series,
                 std::optional<IrLimits> frozen = std::nullopt);

// Frozen EWMA parameters: process center and standard deviation.
struct EwmaParams {
  double center = 0.0;
  double sigma = 1.0;
};

struct EwmaChart {
  double lambda = 0.2;
  double limit_width = 3.0;  // L
  double z0 = 0.0;
  EwmaParams params;
  Eigen::VectorXd z;
  Eigen::VectorXd lcl;
  Eigen::VectorXd ucl;
  std::vector<bool> flags;

  bool any_flag() const;
};

// z_i = lambda*y_i + (1-lambda)*z_{i-1}; limits center +- L*sigma*
// sqrt(lambda/(2-lambda)*(1-(1-lambda)^(2i))). In estimation mode z0 is the
// series mean and sigma comes from the moving range (MRbar/1.128); with
// frozen params z0 is the given center.
EwmaChart ewma_chart(Eigen::Ref<const Eigen::VectorXd> series, double lambda = 0.2,
                     double limit_width = 3.0, std::optional<EwmaParams> frozen = std::nullopt);

// Run-length bookkeeping over a flag sequence. A run length counts the
// observations from the start (or from just after the previous signal) up
// to and including a signal. Trailing signal-free observations are the
// censored tail and do not enter the average.
struct RunLengthStats {
  std::vector<std::size_t> run_lengths;
  std::optional<double> arl;
  std::size_t n_signals = 0;
  std::optional<std::size_t> censored_tail;
};

RunLengthStats run_lengths(const std::vector<bool>& flags);

}  // namespace spcpool
