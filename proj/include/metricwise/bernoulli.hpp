#pragma once

// Poisson (Bernoulli) sampling: each point n is labelled independently with
// probability b_n. The optimal b minimises sum_n h_n^2 / b_n subject to
// sum_n b_n = M and 0 < b_n <= 1.

#include <metricwise/error.hpp>
#include <metricwise/importance.hpp>
#include <metricwise/metric_core.hpp>
#include <metricwise/rng.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

namespace metricwise {

inline constexpr std::uint64_t kBernoulliStreamTag = 0xb5a3c0ffee02ull;
// Inclusion probability given to points whose deviation is exactly zero.
inline constexpr double kDefaultBernoulliFloor = 1e-6;

struct BernoulliPlan {
  std::vector<double> b;
  double budget = 0.0;
  PlanningInfo info;

  std::size_t size() const noexcept { return b.size(); }

  void validate() const {
    if (b.empty()) throw ValidationError("bernoulli plan has no points");
    double total = 0.0;
    for (double v : b) {
      if (!(v > 0.0 && v <= 1.0))
        throw ValidationError("bernoulli weights must lie in (0,1]");
      total += v;
    }
    if (std::abs(total - budget) > 1e-9 * std::max(1.0, budget))
      throw ValidationError("bernoulli weights do not sum to the budget");
  }
};

struct BSDraw {
  std::vector<std::uint8_t> selected;
  std::uint64_t seed = 0;

  std::size_t count() const {
    return static_cast<std::size_t>(
        std::count(selected.begin(), selected.end(), std::uint8_t{1}));
  }
  std::vector<std::size_t> indices() const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < selected.size(); ++n)
      if (selected[n]) out.push_back(n);
    return out;
  }
};

inline void check_bernoulli_budget(double budget, std::size_t n) {
  if (!(budget >= 1.0) || budget > static_cast<double>(n))
    throw InvalidBudget("expected budget M=" + std::to_string(budget) +
                        " outside [1, N=" + std::to_string(n) + "]");
}

// Water-filling. Sorting by decreasing h, the first k points saturate at 1
// and the rest get b = h * (M - k) / (tail sum of h); k is the smallest count
// for which the largest unsaturated weight does not exceed 1.
//
// Zero-deviation points do not affect the objective; they get `floor` and the
// positive points share what is left. If the positive points saturate, the
// remaining budget is spread evenly over the zero-deviation points.
inline std::vector<double> optimal_bernoulli(std::span<const double> h,
                                             double budget,
                                             double floor = kDefaultBernoulliFloor) {
  const std::size_t n = h.size();
  if (n == 0) throw ValidationError("empty deviation vector");
  check_bernoulli_budget(budget, n);
  if (!(floor > 0.0 && floor <= 1.0))
    throw ValidationError("bernoulli floor must lie in (0,1]");

  std::vector<std::size_t> positive;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(h[i] >= 0.0) || !std::isfinite(h[i]))
      throw ValidationError("deviations must be finite and >= 0");
    if (h[i] > 0.0) positive.push_back(i);
  }
  std::vector<double> b(n, 0.0);
  const std::size_t zeros = n - positive.size();
  if (positive.empty()) {
    std::fill(b.begin(), b.end(), budget / static_cast<double>(n));
    return b;
  }

  const double pos_budget = budget - static_cast<double>(zeros) * floor;
  if (pos_budget >= static_cast<double>(positive.size())) {
    for (std::size_t i : positive) b[i] = 1.0;
    if (zeros > 0) {
      const double rest = (budget - static_cast<double>(positive.size())) /
                          static_cast<double>(zeros);
      for (std::size_t i = 0; i < n; ++i)
        if (h[i] == 0.0) b[i] = std::min(1.0, rest);
    }
    return b;
  }
  for (std::size_t i = 0; i < n; ++i)
    if (h[i] == 0.0) b[i] = floor;

  std::stable_sort(positive.begin(), positive.end(),
                   [&](std::size_t a, std::size_t c) { return h[a] > h[c]; });
  const std::size_t p = positive.size();
  std::vector<double> tail(p + 1, 0.0);
  for (std::size_t j = p; j-- > 0;) tail[j] = tail[j + 1] + h[positive[j]];

  for (std::size_t k = 0; k < p; ++k) {
    const double remaining = pos_budget - static_cast<double>(k);
    if (!(remaining > 0.0)) break;
    if (h[positive[k]] * remaining <= tail[k]) {
      for (std::size_t j = 0; j < k; ++j) b[positive[j]] = 1.0;
      const double scale = remaining / tail[k];
      for (std::size_t j = k; j < p; ++j)
        b[positive[j]] = std::min(1.0, h[positive[j]] * scale);
      return b;
    }
  }
  // Unreachable for pos_budget < p: the last point always satisfies the test.
  throw InvalidBudget("water-filling failed to find a feasible allocation");
}

inline BernoulliPlan plan_bernoulli(const PredictionPool& pool,
                                    const MetricSpec& metric, double budget,
                                    double lambda = kDefaultLambda,
                                    double floor = kDefaultBernoulliFloor) {
  PlanningInfo info;
  const DeviationVector dev = planning_deviations(pool, metric, lambda, &info);
  BernoulliPlan plan{optimal_bernoulli(dev.h, budget, floor), budget,
                     std::move(info)};
  plan.validate();
  return plan;
}

// sum_n h_n^2 / b_n
inline double bernoulli_objective(std::span<const double> h,
                                  std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t n = 0; n < h.size(); ++n)
    if (h[n] > 0.0) acc += h[n] * h[n] / b[n];
  return acc;
}

// Point n uses block n of the Bernoulli stream, so selections do not depend
// on evaluation order.
inline BSDraw draw_bs(const BernoulliPlan& plan, std::uint64_t seed) {
  plan.validate();
  const Stream stream = Stream(seed).substream(kBernoulliStreamTag);
  BSDraw draw{std::vector<std::uint8_t>(plan.size(), 0), seed};
  for (std::size_t n = 0; n < plan.size(); ++n)
    draw.selected[n] = stream.uniform(n) < plan.b[n] ? 1 : 0;
  return draw;
}

namespace detail {
inline void check_bs_inputs(const BSDraw& draw, const BernoulliPlan& plan,
                            std::size_t payoff_size) {
  if (draw.selected.size() != plan.size() || payoff_size != plan.size())
    throw ValidationError("draw, plan and labels disagree on pool size");
}
}  // namespace detail

// x_hat = (1/N) sum_{s=1} f_n / b_n, likewise y_hat; F_hat = x_hat / y_hat.
// The ratio is formed from the unnormalised sums, so with every b_n = 1 it is
// computed exactly as the full-census metric.
template <typename Payoffs>
RatioEstimate estimate_bs(const BSDraw& draw, const BernoulliPlan& plan,
                          const Payoffs& payoff) {
  detail::check_bs_inputs(draw, plan, payoff.size());
  double sx = 0.0, sy = 0.0;
  for (std::size_t n = 0; n < plan.size(); ++n) {
    if (!draw.selected[n]) continue;
    const auto [f, g] = payoff(n);
    sx += f / plan.b[n];
    sy += g / plan.b[n];
  }
  if (!(sy != 0.0)) throw DegenerateEstimate("bernoulli estimate has y_hat = 0");
  const double big_n = static_cast<double>(plan.size());
  return {sx / sy, sx / big_n, sy / big_n};
}

inline RatioEstimate estimate_bs(const BSDraw& draw, std::span<const Label> labels,
                                 const BernoulliPlan& plan,
                                 const PredictionPool& pool,
                                 const MetricSpec& metric) {
  return estimate_bs(draw, plan, BinaryPayoffs(pool, labels, metric));
}

// Deterministic-label post-sampling error:
//   sigma^2 = sum_{s=1} (1/b) [ (1/b - 1) (f - F_hat g)^2 + eps ] / (sum_{s=1} g/b)^2
template <typename Payoffs>
double error_bs_post(const BSDraw& draw, const BernoulliPlan& plan,
                     const Payoffs& payoff, double f_hat,
                     double epsilon = kDefaultEpsilon) {
  detail::check_bs_inputs(draw, plan, payoff.size());
  double sy = 0.0, acc = 0.0;
  for (std::size_t n = 0; n < plan.size(); ++n) {
    if (!draw.selected[n]) continue;
    const auto [f, g] = payoff(n);
    const double inv_b = 1.0 / plan.b[n];
    const double r = f - f_hat * g;
    sy += g * inv_b;
    acc += inv_b * ((inv_b - 1.0) * r * r + epsilon);
  }
  if (!(sy != 0.0)) throw DegenerateEstimate("bernoulli estimate has y_hat = 0");
  return acc / (sy * sy);
}

inline double error_bs_post(const BSDraw& draw, std::span<const Label> labels,
                            const BernoulliPlan& plan, const PredictionPool& pool,
                            const MetricSpec& metric, double f_hat,
                            double epsilon = kDefaultEpsilon) {
  return error_bs_post(draw, plan, BinaryPayoffs(pool, labels, metric), f_hat,
                       epsilon);
}

// Stochastic-label form. `label_prob[n]` is p(true label = 1) for point n:
//   sigma^2 = sum_{s=1} (1/b) [ (1/b) E(f - F g)^2 - (E f - F E g)^2 + eps ]
//             / (sum_{s=1} E g / b)^2
inline double error_bs_post_stochastic(const BSDraw& draw,
                                       const BernoulliPlan& plan,
                                       const PredictionPool& pool,
                                       const MetricSpec& metric,
                                       std::span<const double> label_prob,
                                       double f_hat,
                                       double epsilon = kDefaultEpsilon) {
  if (label_prob.size() != plan.size() || pool.size() != plan.size() ||
      draw.selected.size() != plan.size())
    throw ValidationError("draw, plan and label distributions disagree on size");
  double sy = 0.0, acc = 0.0;
  for (std::size_t n = 0; n < plan.size(); ++n) {
    if (!draw.selected[n]) continue;
    const double p1 = label_prob[n];
    if (!(p1 >= 0.0 && p1 <= 1.0))
      throw ValidationError("label probability outside [0,1]");
    const int c = pool.pred(n);
    const double r1 = metric.f(c, 1) - f_hat * metric.g(c, 1);
    const double r0 = metric.f(c, 0) - f_hat * metric.g(c, 0);
    const double mean_r = p1 * r1 + (1 - p1) * r0;
    const double mean_r2 = p1 * r1 * r1 + (1 - p1) * r0 * r0;
    const double mean_g = p1 * metric.g(c, 1) + (1 - p1) * metric.g(c, 0);
    const double inv_b = 1.0 / plan.b[n];
    sy += mean_g * inv_b;
    acc += inv_b * (inv_b * mean_r2 - mean_r * mean_r + epsilon);
  }
  if (!(sy != 0.0)) throw DegenerateEstimate("bernoulli estimate has y_hat = 0");
  return acc / (sy * sy);
}

// Second-order bias of F_hat for deterministic labels:
//   E[F_hat] - F' ~ (F' Syy - Sxy) / mu_y^2
//                 = sum_n (1/b_n - 1) g_n (F' g_n - f_n) / (sum_n g_n)^2
inline double bias_bs(const PredictionPool& pool, std::span<const Label> labels,
                      const BernoulliPlan& plan, const MetricSpec& metric) {
  if (plan.size() != pool.size())
    throw ValidationError("plan and pool disagree on size");
  const double exact = exact_metric(pool, labels, metric);
  double sum_g = 0.0, acc = 0.0;
  for (std::size_t n = 0; n < pool.size(); ++n) {
    const double f = metric.f(pool.pred(n), labels[n]);
    const double g = metric.g(pool.pred(n), labels[n]);
    sum_g += g;
    acc += (1.0 / plan.b[n] - 1.0) * g * (exact * g - f);
  }
  return acc / (sum_g * sum_g);
}

// Leading-order E[(F_hat - F')^2] = sum_n r_n^2 (1/b_n - 1) / (sum_n g_n)^2
// for deterministic labels, r_n = f_n - F' g_n.
inline double bs_expected_error(std::span<const double> sq_residual,
                                std::span<const double> b, double sum_g) {
  double acc = 0.0;
  for (std::size_t n = 0; n < b.size(); ++n)
    acc += sq_residual[n] * (1.0 / b[n] - 1.0);
  return acc / (sum_g * sum_g);
}

}  // namespace metricwise
