#pragma once

#include <Eigen/Core>
#include <string>

namespace spcpool {

// Consistency constants chosen so every scale estimator targets sigma for
// normal data; set c = 1 to get the raw statistic instead.
inline constexpr double kMadNormalConsistency = 1.4826;
inline constexpr double kIqrNormalConsistency = 1.0 / 1.349;

// Huber Proposal 2 defaults.
inline constexpr double kHuberDefaultK = 1.5;
inline constexpr double kHuberDefaultTol = 1e-8;
inline constexpr int kHuberDefaultMaxIter = 100;

enum class CenterMethod { Mean, Median };

// Scale estimator selector; param is the Huber k or the consistency c,
// depending on the kind.
struct ScaleMethod {
  enum class Kind { StdDev, RobustStdDev, Mad, Iqr };

  Kind kind = Kind::StdDev;
  double param = 0.0;

  static ScaleMethod std_dev() { return {Kind::StdDev, 0.0}; }
  static ScaleMethod robust_std_dev(double k = kHuberDefaultK) { return {Kind::RobustStdDev, k}; }
  static ScaleMethod mad(double c = kMadNormalConsistency) { return {Kind::Mad, c}; }
  static ScaleMethod iqr(double c = kIqrNormalConsistency) { return {Kind::Iqr, c}; }

  bool operator==(const ScaleMethod&) const = default;
};

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

double mean(VectorRef xs);

// Interpolated median: average of the two middle order statistics for even n.
double median(VectorRef xs);

double center(VectorRef xs, CenterMethod m);

// (n-1)-denominator standard deviation; needs n >= 2.
double sample_std_dev(VectorRef xs);

// Quantile by linear interpolation at position (n-1)*q (the common "type 7"
// convention); q in [0, 1].
double quantile(VectorRef xs, double q);

// c * median(|x - median(x)|).
double mad(VectorRef xs, double c = kMadNormalConsistency);

// c * (Q3 - Q1).
double iqr(VectorRef xs, double c = kIqrNormalConsistency);

// Huber Proposal 2 simultaneous location/scale M-estimate of scale.
// Starts at (median, MAD); if the MAD degenerates on non-constant data the
// scale restarts from the sample standard deviation. Constant data yield 0.
double robust_std_dev(VectorRef xs, double k = kHuberDefaultK, double tol = kHuberDefaultTol,
                      int max_iter = kHuberDefaultMaxIter);

// Same estimate, also reporting the iteration count (updates converge when
// successive scale values differ by less than tol).
double robust_std_dev_traced(VectorRef xs, double k, double tol, int max_iter, int* iterations);

double scale(VectorRef xs, const ScaleMethod& m);

// beta(k) = E[psi_k(Z)^2] for standard normal Z; the Fisher-consistency
// constant in the Proposal 2 scale equation.
double huber_psi_squared_expectation(double k);

std::string to_string(CenterMethod m);
std::string to_string(const ScaleMethod& m);
std::string to_string(ScaleMethod::Kind k);

}  // namespace spcpool
