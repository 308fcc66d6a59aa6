#include "spcpool/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "spcpool/errors.hpp"

namespace spcpool {

namespace {

void require_finite_nonempty(VectorRef xs) {
  if (xs.size() == 0) throw InsufficientDataError("estimator called on an empty sequence");
  if (!xs.allFinite()) throw DomainError("estimator called with non-finite values");
}

void require_at_least_two(VectorRef xs) {
  require_finite_nonempty(xs);
  if (xs.size() < 2) throw InsufficientDataError("scale estimator needs at least 2 observations");
}

std::vector<double> sorted_copy(VectorRef xs) {
  std::vector<double> v(xs.data(), xs.data() + xs.size());
  std::sort(v.begin(), v.end());
  return v;
}

double median_of_sorted(const std::vector<double>& v) {
  std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x * std::numbers::sqrt2 / 2.0); }

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

double mean(VectorRef xs) {
  require_finite_nonempty(xs);
  return xs.mean();
}

double median(VectorRef xs) {
  require_finite_nonempty(xs);
  return median_of_sorted(sorted_copy(xs));
}

double center(VectorRef xs, CenterMethod m) {
  switch (m) {
    case CenterMethod::Mean:
      return mean(xs);
    case CenterMethod::Median:
      return median(xs);
  }
  throw DomainError("unknown center method");
}

double sample_std_dev(VectorRef xs) {
  require_at_least_two(xs);
  double m = xs.mean();
  double ss = (xs.array() - m).square().sum();
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double quantile(VectorRef xs, double q) {
  require_finite_nonempty(xs);
  if (q < 0.0 || q > 1.0) throw DomainError("quantile level must be in [0, 1]");
  auto v = sorted_copy(xs);
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = static_cast<std::size_t>(std::ceil(pos));
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

double mad(VectorRef xs, double c) {
  require_at_least_two(xs);
  if (c <= 0.0) throw DomainError("MAD consistency constant must be positive");
  double med = median_of_sorted(sorted_copy(xs));
  Eigen::VectorXd dev = (xs.array() - med).abs();
  return c * median_of_sorted(sorted_copy(dev));
}

double iqr(VectorRef xs, double c) {
  require_at_least_two(xs);
  if (c <= 0.0) throw DomainError("IQR consistency constant must be positive");
  return c * (quantile(xs, 0.75) - quantile(xs, 0.25));
}

double huber_psi_squared_expectation(double k) {
  // E[Z^2, |Z|<=k] + k^2 P(|Z|>k) for Z ~ N(0,1).
  double trunc_second_moment = (2.0 * normal_cdf(k) - 1.0) - 2.0 * k * normal_pdf(k);
  return trunc_second_moment + 2.0 * k * k * (1.0 - normal_cdf(k));
}

double robust_std_dev_traced(VectorRef xs, double k, double tol, int max_iter, int* iterations) {
  require_at_least_two(xs);
  if (k <= 0.0) throw DomainError("Huber tuning constant k must be positive");
  if (tol <= 0.0) throw DomainError("convergence tolerance must be positive");

  auto sorted = sorted_copy(xs);
  double mu = median_of_sorted(sorted);
  double s = mad(xs, kMadNormalConsistency);
  bool constant = sorted.front() == sorted.back();
  if (iterations) *iterations = 0;
  if (constant) return 0.0;
  if (s == 0.0) s = sample_std_dev(xs);  // MAD degenerated on non-constant data

  const double beta = huber_psi_squared_expectation(k);
  const auto n = static_cast<double>(xs.size());

  for (int it = 0; it < max_iter; ++it) {
    // Location: weighted mean with psi-weights w = psi(u)/u = min(1, k/|u|).
    double wsum = 0.0, wxsum = 0.0;
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      double u = (xs[i] - mu) / s;
      double w = std::abs(u) <= k ? 1.0 : k / std::abs(u);
      wsum += w;
      wxsum += w * xs[i];
    }
    mu = wxsum / wsum;

    // Scale: fixed point of (1/(n-1)) sum psi_k((x-mu)/s)^2 = beta.
    double psi2 = 0.0;
    for (Eigen::Index i = 0; i < xs.size(); ++i) {
      double r = std::min(std::abs(xs[i] - mu), k * s);
      psi2 += r * r;
    }
    double s_next = std::sqrt(psi2 / ((n - 1.0) * beta));
    if (iterations) *iterations = it + 1;
    if (std::abs(s_next - s) < tol) {
      s = s_next;
      break;
    }
    s = s_next;
  }
  return s;
}

double robust_std_dev(VectorRef xs, double k, double tol, int max_iter) {
  return robust_std_dev_traced(xs, k, tol, max_iter, nullptr);
}

double scale(VectorRef xs, const ScaleMethod& m) {
  switch (m.kind) {
    case ScaleMethod::Kind::StdDev:
      return sample_std_dev(xs);
    case ScaleMethod::Kind::RobustStdDev:
      return robust_std_dev(xs, m.param);
    case ScaleMethod::Kind::Mad:
      return mad(xs, m.param);
    case ScaleMethod::Kind::Iqr:
      return iqr(xs, m.param);
  }
  throw DomainError("unknown scale method");
}

std::string to_string(CenterMethod m) {
  return m == CenterMethod::Mean ? "mean" : "median";
}

std::string to_string(ScaleMethod::Kind k) {
  switch (k) {
    case ScaleMethod::Kind::StdDev:
      return "stddev";
    case ScaleMethod::Kind::RobustStdDev:
      return "rstd";
    case ScaleMethod::Kind::Mad:
      return "mad";
    case ScaleMethod::Kind::Iqr:
      return "iqr";
  }
  return "?";
}

std::string to_string(const ScaleMethod& m) { return to_string(m.kind); }

}  // namespace spcpool
