#pragma once

// Importance sampling: with-replacement draws from a proposal q, the ratio
// estimator x_hat / y_hat, and its post-sampling variance.

#include <metricwise/error.hpp>
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

inline constexpr std::uint64_t kImportanceStreamTag = 0x15a3c0ffee01ull;

struct ImportancePlan {
  std::vector<double> q;
  std::uint64_t draws = 0;
  PlanningInfo info;

  std::size_t size() const noexcept { return q.size(); }

  void validate() const {
    if (q.empty()) throw ValidationError("importance plan has no points");
    if (draws < 1) throw InvalidBudget("importance plan needs at least one draw");
    double total = 0.0;
    for (double v : q) {
      if (!(v >= 0.0) || !std::isfinite(v))
        throw ValidationError("importance weights must be finite and >= 0");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
      throw ValidationError("importance weights do not sum to 1");
  }
};

// Per-index multiplicities of the M draws.
struct ISDraw {
  std::vector<std::uint64_t> counts;
  std::uint64_t seed = 0;

  std::uint64_t total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  }
  std::size_t distinct() const {
    return static_cast<std::size_t>(
        std::count_if(counts.begin(), counts.end(),
                      [](std::uint64_t c) { return c > 0; }));
  }
};

struct RatioEstimate {
  double value = 0.0;
  double x_hat = 0.0;
  double y_hat = 0.0;
};

// q_n = h_n / sum h, uniform when every deviation is zero.
inline std::vector<double> optimal_importance(std::span<const double> h) {
  if (h.empty()) throw ValidationError("empty deviation vector");
  double total = 0.0;
  for (double v : h) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ValidationError("deviations must be finite and >= 0");
    total += v;
  }
  std::vector<double> q(h.size());
  if (total == 0.0) {
    std::fill(q.begin(), q.end(), 1.0 / static_cast<double>(h.size()));
  } else {
    for (std::size_t n = 0; n < h.size(); ++n) q[n] = h[n] / total;
  }
  return q;
}

inline ImportancePlan uniform_importance_plan(std::size_t n, std::uint64_t draws,
                                              PlanningInfo info = {}) {
  if (n == 0) throw ValidationError("importance plan has no points");
  ImportancePlan plan{std::vector<double>(n, 1.0 / static_cast<double>(n)),
                      draws, std::move(info)};
  plan.validate();
  return plan;
}

inline ImportancePlan plan_importance(const PredictionPool& pool,
                                      const MetricSpec& metric,
                                      std::uint64_t draws,
                                      double lambda = kDefaultLambda) {
  PlanningInfo info;
  const DeviationVector dev = planning_deviations(pool, metric, lambda, &info);
  ImportancePlan plan{optimal_importance(dev.h), draws, std::move(info)};
  plan.validate();
  return plan;
}

namespace detail {

// Vose alias table. Entries with q = 0 can never be returned.
struct AliasTable {
  std::vector<double> prob;
  std::vector<std::size_t> alias;

  explicit AliasTable(std::span<const double> q)
      : prob(q.size(), 0.0), alias(q.size(), 0) {
    const std::size_t n = q.size();
    std::vector<double> scaled(n);
    std::vector<std::size_t> small, large;
    std::size_t heaviest = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = q[i] * static_cast<double>(n);
      (scaled[i] < 1.0 ? small : large).push_back(i);
      if (q[i] > q[heaviest]) heaviest = i;
    }
    while (!small.empty() && !large.empty()) {
      const std::size_t s = small.back();
      small.pop_back();
      const std::size_t l = large.back();
      prob[s] = scaled[s];
      alias[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (std::size_t i : large) prob[i] = 1.0, alias[i] = i;
    for (std::size_t i : small) prob[i] = 1.0, alias[i] = i;
    for (std::size_t i = 0; i < n; ++i) {
      if (q[i] == 0.0) prob[i] = 0.0;
      if (q[alias[i]] == 0.0) alias[i] = heaviest;
    }
  }

  std::size_t sample(double u_column, double u_coin) const {
    const std::size_t n = prob.size();
    std::size_t col = static_cast<std::size_t>(u_column * static_cast<double>(n));
    if (col >= n) col = n - 1;
    return u_coin < prob[col] ? col : alias[col];
  }
};

}  // namespace detail

// Draw i uses block i of the importance stream for `seed`.
inline ISDraw draw_is(const ImportancePlan& plan, std::uint64_t seed) {
  plan.validate();
  const detail::AliasTable table(plan.q);
  const Stream stream = Stream(seed).substream(kImportanceStreamTag);
  ISDraw draw{std::vector<std::uint64_t>(plan.size(), 0), seed};
  for (std::uint64_t i = 0; i < plan.draws; ++i)
    ++draw.counts[table.sample(stream.uniform(i), stream.uniform2(i))];
  return draw;
}

namespace detail {
inline void check_is_inputs(const ISDraw& draw, const ImportancePlan& plan,
                            std::size_t payoff_size) {
  if (draw.counts.size() != plan.size() || payoff_size != plan.size())
    throw ValidationError("draw, plan and labels disagree on pool size");
  for (std::size_t n = 0; n < plan.size(); ++n)
    if (draw.counts[n] > 0 && !(plan.q[n] > 0.0))
      throw ValidationError("draw contains an index with q = 0");
}
}  // namespace detail

// `payoff(n)` returns (f_n, g_n) for a sampled index n.
template <typename Payoffs>
RatioEstimate estimate_is(const ISDraw& draw, const ImportancePlan& plan,
                          const Payoffs& payoff) {
  detail::check_is_inputs(draw, plan, payoff.size());
  double sx = 0.0, sy = 0.0;
  std::uint64_t m = 0;
  for (std::size_t n = 0; n < plan.size(); ++n) {
    if (draw.counts[n] == 0) continue;
    const auto [f, g] = payoff(n);
    const double c = static_cast<double>(draw.counts[n]);
    sx += c * f / plan.q[n];
    sy += c * g / plan.q[n];
    m += draw.counts[n];
  }
  if (!(sy != 0.0))
    throw DegenerateEstimate("importance estimate has y_hat = 0");
  const double mn = static_cast<double>(m) * static_cast<double>(plan.size());
  return {sx / sy, sx / mn, sy / mn};
}

inline RatioEstimate estimate_is(const ISDraw& draw, std::span<const Label> labels,
                                 const ImportancePlan& plan,
                                 const PredictionPool& pool,
                                 const MetricSpec& metric) {
  return estimate_is(draw, plan, BinaryPayoffs(pool, labels, metric));
}

// sigma^2 = (1/y_hat^2) (1/(MN)^2) sum_i (h_{m_i}^2 + eps) / q_{m_i}^2, with
// h evaluated at the sampled label around f_hat.
template <typename Payoffs>
double error_is_post(const ISDraw& draw, const ImportancePlan& plan,
                     const Payoffs& payoff, double f_hat,
                     double epsilon = kDefaultEpsilon) {
  detail::check_is_inputs(draw, plan, payoff.size());
  double sy = 0.0, acc = 0.0;
  for (std::size_t n = 0; n < plan.size(); ++n) {
    if (draw.counts[n] == 0) continue;
    const auto [f, g] = payoff(n);
    const double c = static_cast<double>(draw.counts[n]);
    const double q = plan.q[n];
    const double r = f - f_hat * g;
    sy += c * g / q;
    acc += c * (r * r + epsilon) / (q * q);
  }
  if (!(sy != 0.0))
    throw DegenerateEstimate("importance estimate has y_hat = 0");
  return acc / (sy * sy);
}

inline double error_is_post(const ISDraw& draw, std::span<const Label> labels,
                            const ImportancePlan& plan, const PredictionPool& pool,
                            const MetricSpec& metric, double f_hat,
                            double epsilon = kDefaultEpsilon) {
  return error_is_post(draw, plan, BinaryPayoffs(pool, labels, metric), f_hat,
                       epsilon);
}

// pi_n = 1 - (1 - q_n)^M
inline std::vector<double> inclusion_probability(std::span<const double> q,
                                                 double draws) {
  if (!(draws >= 1.0)) throw InvalidBudget("inclusion needs M >= 1");
  std::vector<double> pi(q.size());
  for (std::size_t n = 0; n < q.size(); ++n)
    pi[n] = q[n] >= 1.0 ? 1.0 : -std::expm1(draws * std::log1p(-q[n]));
  return pi;
}

// Expected number of distinct points in M draws: N - sum (1 - q_n)^M.
inline double equivalent_bs_budget(std::span<const double> q, double draws) {
  const std::vector<double> pi = inclusion_probability(q, draws);
  double total = 0.0;
  for (double v : pi) total += v;
  return total;
}

// Smallest integer M whose expected distinct count reaches `distinct`.
inline std::uint64_t draws_for_distinct(std::span<const double> q,
                                        double distinct) {
  const auto support = static_cast<double>(
      std::count_if(q.begin(), q.end(), [](double v) { return v > 0.0; }));
  if (!(distinct >= 0.0) || distinct > support)
    throw InvalidBudget("distinct-sample target outside [0, support]");
  if (distinct <= 1.0) return 1;
  std::uint64_t lo = 1, hi = 2;
  constexpr std::uint64_t kMaxDraws = std::uint64_t{1} << 40;
  while (equivalent_bs_budget(q, static_cast<double>(hi)) < distinct) {
    lo = hi;
    hi *= 2;
    if (hi > kMaxDraws)
      throw InvalidBudget("distinct-sample target needs too many draws");
  }
  while (hi - lo > 1) {
    const std::uint64_t mid = lo + (hi - lo) / 2;
    if (equivalent_bs_budget(q, static_cast<double>(mid)) >= distinct)
      hi = mid;
    else
      lo = mid;
  }
  return equivalent_bs_budget(q, static_cast<double>(lo)) >= distinct ? lo : hi;
}

// Leading-order E[(F_hat - F')^2] = sum_n r_n^2 / q_n / (M (sum_n g_n)^2),
// where r_n^2 is the (expected) squared residual f_n - F' g_n.
inline double is_expected_error(std::span<const double> sq_residual,
                                 std::span<const double> q, double draws,
                                 double sum_g) {
  double acc = 0.0;
  for (std::size_t n = 0; n < q.size(); ++n)
    if (sq_residual[n] > 0.0) acc += sq_residual[n] / q[n];
  return acc / (draws * sum_g * sum_g);
}

}  // namespace metricwise
