#pragma once

// Beta moment fitting and equal-tail intervals for metric estimates.

#include <metricwise/error.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace metricwise {

// Means outside (0,1) are clamped to [kMeanClamp, 1 - kMeanClamp].
inline constexpr double kMeanClamp = 1e-6;
// Continued fraction for the incomplete beta (modified Lentz).
inline constexpr int kBetaCfMaxIterations = 200000;
inline constexpr double kBetaCfEpsilon = 1e-15;
// Above this concentration alpha + beta the quantile uses a skew-corrected
// normal approximation; its error there is far below 1e-8.
inline constexpr double kLargeConcentration = 1e9;

struct BetaFit {
  double alpha = 1.0;
  double beta = 1.0;
  double mean = 0.5;
  double variance = 1.0 / 12.0;
  bool clamped = false;     // mean was outside (0,1)
  bool degenerate = false;  // variance infeasible, fell back to alpha=beta=1
  bool collapsed = false;   // variance <= 0, interval is the point estimate

  std::vector<std::string> flags() const {
    std::vector<std::string> out;
    if (clamped) out.emplace_back("clamped");
    if (degenerate) out.emplace_back("degenerate");
    if (collapsed) out.emplace_back("collapsed");
    return out;
  }
};

// Method of moments: nu = mu (1 - mu) / var - 1, alpha = mu nu, beta = (1 - mu) nu.
inline BetaFit beta_fit(double mean, double variance) {
  if (!std::isfinite(mean) || std::isnan(variance))
    throw ValidationError("beta fit needs a finite mean and a variance");
  BetaFit fit;
  if (mean < kMeanClamp || mean > 1.0 - kMeanClamp) {
    mean = std::clamp(mean, kMeanClamp, 1.0 - kMeanClamp);
    fit.clamped = true;
  }
  fit.mean = mean;
  fit.variance = variance;
  if (!(variance > 0.0)) {
    fit.collapsed = true;
    fit.alpha = fit.beta = std::numeric_limits<double>::infinity();
    return fit;
  }
  const double spread = mean * (1.0 - mean);
  if (variance >= spread) {
    fit.degenerate = true;
    fit.alpha = fit.beta = 1.0;
    return fit;
  }
  const double nu = spread / variance - 1.0;
  fit.alpha = mean * nu;
  fit.beta = (1.0 - mean) * nu;
  return fit;
}

namespace detail {

inline double beta_cf(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kBetaCfMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kBetaCfEpsilon) return h;
  }
  return h;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// lgamma(z) minus its Stirling approximation.
inline double stirling_remainder(double z) {
  if (z >= 10.0) {
    const double r = 1.0 / (z * z);
    return (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / z;
  }
  return std::lgamma(z) - ((z - 0.5) * std::log(z) - z + 0.5 * std::log(2.0 * std::numbers::pi));
}

// x^a (1-x)^b / B(a, b), written around the mode so large a and b keep full precision.
inline double beta_front(double a, double b, double x) {
  const double nu = a + b;
  const double d = nu * x - a;
  const double ta = d / a, tb = -d / b;
  const double la = std::abs(ta) < 0.5 ? std::log1p(ta) : std::log(x) + std::log(nu / a);
  const double lb = std::abs(tb) < 0.5 ? std::log1p(tb) : std::log1p(-x) + std::log(nu / b);
  const double log_body = a * la + b * lb;
  const double corr = stirling_remainder(nu) - stirling_remainder(a) - stirling_remainder(b);
  return std::sqrt(a * b / (2.0 * std::numbers::pi * nu)) * std::exp(log_body + corr);
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double beta_cdf(double x, double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw ValidationError("beta parameters must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = detail::beta_front(a, b, x);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

inline double beta_cdf(double x, const BetaFit& fit) {
  if (fit.collapsed) return x >= fit.mean ? 1.0 : 0.0;
  return beta_cdf(x, fit.alpha, fit.beta);
}

// Quantile by bisection on the forward CDF.
inline double beta_quantile(const BetaFit& fit, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("quantile level outside [0,1]");
  if (fit.collapsed) return fit.mean;
  const double a = fit.alpha, b = fit.beta;
  const double nu = a + b;
  const double mean = a / nu;
  const double sd = std::sqrt(a * b / (nu * nu * (nu + 1.0)));
  if (nu > kLargeConcentration) {
    // Cornish-Fisher with the beta skewness.
    const double skew = 2.0 * (b - a) * std::sqrt(nu + 1.0) /
                        ((nu + 2.0) * std::sqrt(a * b));
    const double z = detail::normal_quantile(p);
    return std::clamp(mean + sd * (z + (z * z - 1.0) * skew / 6.0), 0.0, 1.0);
  }
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  // Bisection over the ordered bit patterns of [0, 1] ends on adjacent doubles.
  std::uint64_t lo = 0, hi = std::bit_cast<std::uint64_t>(1.0);
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    (beta_cdf(std::bit_cast<double>(mid), a, b) < p ? lo : hi) = mid;
  }
  const double xl = std::bit_cast<double>(lo), xh = std::bit_cast<double>(hi);
  return p - beta_cdf(xl, a, b) < beta_cdf(xh, a, b) - p ? xl : xh;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

inline Interval beta_interval(const BetaFit& fit, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw ValidationError("confidence level must lie in (0,1)");
  const double tail = (1.0 - level) / 2.0;
  return {beta_quantile(fit, tail), beta_quantile(fit, 1.0 - tail)};
}

}  // namespace metricwise
