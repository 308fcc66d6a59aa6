#include "spcpool/charts.hpp"

#include <algorithm>
#include <cmath>

#include "spcpool/errors.hpp"

namespace spcpool {

bool IrChart::any_flag() const {
  return any_individual_flag() ||
         std::find(mr_flags.begin(), mr_flags.end(), true) != mr_flags.end();
}

bool IrChart::any_individual_flag() const {
  return std::find(flags.begin(), flags.end(), true) != flags.end();
}

bool EwmaChart::any_flag() const {
  return std::find(flags.begin(), flags.end(), true) != flags.end();
}

double mean_moving_range(Eigen::Ref<const Eigen::VectorXd> series) {
  if (series.size() < 2) throw InsufficientDataError("moving range needs at least 2 points");
  return (series.tail(series.size() - 1) - series.head(series.size() - 1)).cwiseAbs().mean();
}

IrLimits estimate_ir_limits(Eigen::Ref<const Eigen::VectorXd> series) {
  if (series.size() < 3)
    throw InsufficientDataError("estimating IR limits needs at least 3 points");
  double mr_bar = mean_moving_range(series);
  if (mr_bar == 0.0)
    throw DegenerateLimitsError("mean moving range is 0; control limits are degenerate");
  IrLimits lim;
  lim.center_line = series.mean();
  lim.mr_bar = mr_bar;
  lim.ucl = lim.center_line + kIrLimitMultiplier * mr_bar;
  lim.lcl = lim.center_line - kIrLimitMultiplier * mr_bar;
  lim.mr_ucl = kMovingRangeD4 * mr_bar;
  return lim;
}

IrChart ir_chart(Eigen::Ref<const Eigen::VectorXd> series, std::optional<IrLimits> frozen) {
  if (series.size() < 1) throw InsufficientDataError("IR chart needs at least 1 point");
  IrChart chart;
  chart.limits = frozen ? *frozen : estimate_ir_limits(series);
  chart.values = series;

  chart.flags.resize(static_cast<std::size_t>(series.size()));
  for (Eigen::Index i = 0; i < series.size(); ++i)
    chart.flags[static_cast<std::size_t>(i)] =
        series[i] > chart.limits.ucl || series[i] < chart.limits.lcl;

  auto n_mr = series.size() - 1;
  chart.moving_ranges.resize(n_mr);
  chart.mr_flags.resize(static_cast<std::size_t>(std::max<Eigen::Index>(n_mr, 0)));
  for (Eigen::Index i = 0; i < n_mr; ++i) {
    chart.moving_ranges[i] = std::abs(series[i + 1] - series[i]);
    chart.mr_flags[static_cast<std::size_t>(i)] = chart.moving_ranges[i] > chart.limits.mr_ucl;
  }
  return chart;
}

EwmaChart ewma_chart(Eigen::Ref<const Eigen::VectorXd> series, double lambda, double limit_width,
                     std::optional<EwmaParams> frozen) {
  if (lambda <= 0.0 || lambda >= 1.0)
    throw DomainError("EWMA lambda must lie strictly between 0 and 1");
  if (series.size() < 1) throw InsufficientDataError("EWMA chart needs at least 1 point");

  EwmaChart chart;
  chart.lambda = lambda;
  chart.limit_width = limit_width;
  if (frozen) {
    chart.params = *frozen;
  } else {
    chart.params.center = series.mean();
    double mr_bar = mean_moving_range(series);
    if (mr_bar == 0.0)
      throw DegenerateLimitsError("mean moving range is 0; EWMA limits are degenerate");
    chart.params.sigma = mr_bar / kMovingRangeD2;
  }
  chart.z0 = chart.params.center;

  auto n = series.size();
  chart.z.resize(n);
  chart.lcl.resize(n);
  chart.ucl.resize(n);
  chart.flags.resize(static_cast<std::size_t>(n));

  double z = chart.z0;
  double width_factor = lambda / (2.0 - lambda);
  double decay = 1.0 - lambda;
  for (Eigen::Index i = 0; i < n; ++i) {
    z = lambda * series[i] + decay * z;
    chart.z[i] = z;
    double half = chart.limit_width * chart.params.sigma *
                  std::sqrt(width_factor * (1.0 - std::pow(decay, 2.0 * (static_cast<double>(i) + 1.0))));
    chart.lcl[i] = chart.params.center - half;
    chart.ucl[i] = chart.params.center + half;
    chart.flags[static_cast<std::size_t>(i)] = chart.z[i] > chart.ucl[i] || chart.z[i] < chart.lcl[i];
  }
  return chart;
}

RunLengthStats run_lengths(const std::vector<bool>& flags) {
  RunLengthStats stats;
  std::size_t since_signal = 0;
  for (bool f : flags) {
    ++since_signal;
    if (f) {
      stats.run_lengths.push_back(since_signal);
      since_signal = 0;
    }
  }
  stats.n_signals = stats.run_lengths.size();
  if (since_signal > 0) stats.censored_tail = since_signal;
  if (stats.n_signals > 0) {
    double sum = 0.0;
    for (std::size_t rl : stats.run_lengths) sum += static_cast<double>(rl);
    stats.arl = sum / static_cast<double>(stats.n_signals);
  }
  return stats;
}

}  // namespace spcpool
