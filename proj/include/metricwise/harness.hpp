#pragma once

// Seeded Monte Carlo comparisons of Uniform, Importance and Bernoulli
// sampling on synthetic (or loaded) pools.
//
// Every repetition r of cell (method, budget index i) draws with seed
//   Stream(base_seed).substream(method).substream(i).substream(r).id()
// so a sweep is reproducible from its config and does not depend on the
// order repetitions are executed in. Aggregates are reduced in index order.

#include <metricwise/bernoulli.hpp>
#include <metricwise/confidence.hpp>
#include <metricwise/error.hpp>
#include <metricwise/importance.hpp>
#include <metricwise/metric_core.hpp>
#include <metricwise/report.hpp>
#include <metricwise/rng.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace metricwise {

enum class Method { Uniform = 0, Importance = 1, Bernoulli = 2 };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Uniform: return "uniform";
    case Method::Importance: return "importance";
    case Method::Bernoulli: return "bernoulli";
  }
  return "unknown";
}

inline Method parse_method(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (s == "uniform" || s == "us") return Method::Uniform;
  if (s == "importance" || s == "is") return Method::Importance;
  if (s == "bernoulli" || s == "bs" || s == "poisson") return Method::Bernoulli;
  throw ValidationError("unknown method: " + s);
}

struct ScenarioConfig {
  std::size_t n = 2000;
  double positive_fraction = 0.1;
  // Positives score u^(1/sharpness), negatives 1 - u^(1/sharpness); infinity
  // gives hard 0/1 probabilities.
  double sharpness = 5.0;
  // Probability that a point's score comes from the other class's model.
  double miscalibration = 0.0;
  double threshold = kDefaultThreshold;
  double lambda = kDefaultLambda;
  std::string plan_metric = "F1";
  std::string eval_metric = "F1";
  // Distinct-sample targets, absolute counts in [1, n].
  std::vector<double> budgets = {100, 200, 400, 800, 1200, 1600};
  std::size_t repetitions = 500;
  std::uint64_t seed = 1;
  std::vector<Method> methods = {Method::Uniform, Method::Importance,
                                 Method::Bernoulli};
  double level = 0.9;
  double epsilon = kDefaultEpsilon;
  std::vector<std::string> plan_metrics = {"Accuracy", "F1", "Precision",
                                           "Recall", "Specificity"};
  std::vector<std::string> eval_metrics = {"Accuracy", "F1", "Precision",
                                           "Recall", "Specificity"};
  std::size_t threads = 0;  // 0: hardware concurrency

  void set_fractions(const std::vector<double>& fractions) {
    budgets.clear();
    for (double f : fractions) budgets.push_back(f * static_cast<double>(n));
  }

  void validate() const {
    if (n < 1) throw ValidationError("scenario needs n >= 1");
    if (!(positive_fraction > 0.0 && positive_fraction < 1.0))
      throw ValidationError("positive fraction must lie in (0,1)");
    if (!(sharpness > 0.0)) throw ValidationError("sharpness must be > 0");
    if (!(miscalibration >= 0.0 && miscalibration <= 1.0))
      throw ValidationError("miscalibration must lie in [0,1]");
    check_lambda(lambda);
    if (repetitions < 1) throw ValidationError("repetitions must be >= 1");
    if (budgets.empty()) throw ValidationError("scenario has no budgets");
    if (!std::is_sorted(budgets.begin(), budgets.end()))
      throw ValidationError("budgets must be sorted ascending");
    for (double m : budgets)
      if (!(m >= 1.0 && m <= static_cast<double>(n)))
        throw InvalidBudget("budget " + std::to_string(m) + " outside [1, n]");
    if (!(level > 0.0 && level < 1.0))
      throw ValidationError("confidence level must lie in (0,1)");
    if (methods.empty()) throw ValidationError("scenario has no methods");
  }
};

struct SimulatedPool {
  PredictionPool pool;
  std::vector<Label> labels;
};

inline constexpr std::uint64_t kPoolStreamTag = 0x9001;

// Point n uses block n of the pool stream: u0 decides the label, u1 whether
// the score is drawn from the wrong class, block n of a second substream
// gives the score.
inline SimulatedPool simulate_pool(const ScenarioConfig& config,
                                   std::uint64_t seed) {
  config.validate();
  const Stream stream = Stream(seed).substream(kPoolStreamTag);
  const Stream score_stream = stream.substream(1);
  std::vector<double> probs(config.n);
  std::vector<Label> labels(config.n);
  std::vector<std::string> ids(config.n);
  const bool hard = std::isinf(config.sharpness);
  for (std::size_t n = 0; n < config.n; ++n) {
    const Label y = stream.uniform(n) < config.positive_fraction ? 1 : 0;
    const bool swap = stream.uniform2(n) < config.miscalibration;
    const bool score_as_positive = (y == 1) != swap;
    const double u = score_stream.uniform(n);
    const double s = hard ? 1.0 : std::pow(u, 1.0 / config.sharpness);
    probs[n] = score_as_positive ? s : 1.0 - s;
    labels[n] = y;
    ids[n] = "p" + std::to_string(n);
  }
  return {PredictionPool(std::move(probs), config.threshold, std::move(ids)),
          std::move(labels)};
}

struct CellResult {
  Method method = Method::Bernoulli;
  double budget = 0.0;  // distinct-sample target
  std::string plan_metric;
  std::string eval_metric;
  double mean_abs_err = 0.0;
  double mean_log_sq_err = 0.0;
  double std = 0.0;     // std of |error| over repetitions
  double stderr_ = 0.0; // std / sqrt(successful repetitions)
  double coverage = 0.0;
  double mean_distinct = 0.0;
  double mean_draws = 0.0;
  double frac_saturated = 0.0;
  std::size_t failures = 0;
  // Repetitions whose interval collapsed, or whose plan labels every point.
  std::size_t collapsed = 0;
};

struct ExperimentResult {
  double truth = 0.0;
  std::vector<CellResult> cells;

  const CellResult& cell(Method m, std::size_t budget_index) const {
    std::size_t k = 0;
    for (const auto& c : cells)
      if (c.method == m && k++ == budget_index) return c;
    throw ValidationError("no such cell");
  }
};

// Squared errors are floored here before taking logs.
inline constexpr double kLogSqFloor = 1e-30;

inline std::uint64_t repetition_seed(std::uint64_t base, Method m,
                                     std::size_t budget_index, std::size_t rep) {
  return Stream(base)
      .substream(static_cast<std::uint64_t>(m))
      .substream(budget_index)
      .substream(rep)
      .id();
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

struct RepOutcome {
  bool ok = false;
  double abs_err = 0.0;
  bool covered = false;
  bool collapsed = false;
  double distinct = 0.0;
  double draws = 0.0;
};

inline CellResult reduce(const std::vector<RepOutcome>& reps) {
  CellResult c;
  double sum = 0.0, sum_log = 0.0, covered = 0.0, distinct = 0.0, draws = 0.0;
  std::size_t ok = 0;
  for (const auto& r : reps) {
    if (!r.ok) {
      ++c.failures;
      continue;
    }
    ++ok;
    sum += r.abs_err;
    sum_log += std::log(std::max(r.abs_err * r.abs_err, kLogSqFloor));
    covered += r.covered ? 1.0 : 0.0;
    distinct += r.distinct;
    draws += r.draws;
    c.collapsed += r.collapsed ? 1 : 0;
  }
  if (ok == 0) {
    c.mean_abs_err = c.mean_log_sq_err = c.std = c.stderr_ =
        std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  const double k = static_cast<double>(ok);
  c.mean_abs_err = sum / k;
  c.mean_log_sq_err = sum_log / k;
  double ss = 0.0;
  for (const auto& r : reps)
    if (r.ok) ss += (r.abs_err - c.mean_abs_err) * (r.abs_err - c.mean_abs_err);
  c.std = ok > 1 ? std::sqrt(ss / (k - 1.0)) : 0.0;
  c.stderr_ = c.std / std::sqrt(k);
  c.coverage = covered / k;
  c.mean_distinct = distinct / k;
  c.mean_draws = draws / k;
  return c;
}

// One sampler configured for one cell.
struct CellSampler {
  Method method;
  ImportancePlan is_plan;
  BernoulliPlan bs_plan;
  double frac_saturated = 0.0;
};

inline CellSampler make_sampler(Method m, const DeviationVector& dev,
                                const PlanningInfo& info, double budget) {
  CellSampler s{m, {}, {}, 0.0};
  const std::size_t n = dev.h.size();
  if (m == Method::Bernoulli) {
    s.bs_plan = BernoulliPlan{optimal_bernoulli(dev.h, budget), budget, info};
    s.frac_saturated =
        static_cast<double>(std::count(s.bs_plan.b.begin(), s.bs_plan.b.end(), 1.0)) /
        static_cast<double>(n);
  } else {
    std::vector<double> q = m == Method::Uniform
                                ? std::vector<double>(n, 1.0 / static_cast<double>(n))
                                : optimal_importance(dev.h);
    const std::uint64_t draws = draws_for_distinct(q, budget);
    s.is_plan = ImportancePlan{std::move(q), draws, info};
  }
  return s;
}

// Runs every repetition of one cell and scores it against each eval metric.
inline std::vector<CellResult> run_cell(const PredictionPool& pool,
                                        std::span<const Label> labels,
                                        const CellSampler& sampler,
                                        std::size_t budget_index,
                                        const std::vector<MetricSpec>& evals,
                                        const std::vector<double>& truths,
                                        const ScenarioConfig& config) {
  const std::size_t reps = config.repetitions;
  std::vector<std::vector<RepOutcome>> outcomes(evals.size(),
                                                std::vector<RepOutcome>(reps));
  parallel_for(reps, config.threads, [&](std::size_t r) {
    const std::uint64_t seed =
        repetition_seed(config.seed, sampler.method, budget_index, r);
    if (sampler.method == Method::Bernoulli) {
      const BSDraw draw = draw_bs(sampler.bs_plan, seed);
      for (std::size_t e = 0; e < evals.size(); ++e) {
        RepOutcome& o = outcomes[e][r];
        o.distinct = o.draws = static_cast<double>(draw.count());
        try {
          const EstimateReport rep =
              report_bs(draw, sampler.bs_plan, BinaryPayoffs(pool, labels, evals[e]),
                        evals[e].name(), config.level, config.epsilon);
          o.ok = true;
          o.abs_err = std::abs(truths[e] - rep.estimate);
          o.covered = rep.covers(truths[e]);
          o.collapsed = rep.fit.collapsed || rep.ci.hi - rep.ci.lo < 1e-12 ||
                        sampler.frac_saturated == 1.0;
        } catch (const Error& err) {
          if (!err.is_degenerate()) throw;
        }
      }
    } else {
      const ISDraw draw = draw_is(sampler.is_plan, seed);
      for (std::size_t e = 0; e < evals.size(); ++e) {
        RepOutcome& o = outcomes[e][r];
        o.distinct = static_cast<double>(draw.distinct());
        o.draws = static_cast<double>(draw.total());
        try {
          EstimateReport rep =
              report_is(draw, sampler.is_plan, BinaryPayoffs(pool, labels, evals[e]),
                        evals[e].name(), config.level, config.epsilon);
          o.ok = true;
          o.abs_err = std::abs(truths[e] - rep.estimate);
          o.covered = rep.covers(truths[e]);
          o.collapsed = rep.fit.collapsed || rep.ci.hi - rep.ci.lo < 1e-12;
        } catch (const Error& err) {
          if (!err.is_degenerate()) throw;
        }
      }
    }
  });
  std::vector<CellResult> out;
  for (std::size_t e = 0; e < evals.size(); ++e) {
    CellResult c = reduce(outcomes[e]);
    c.method = sampler.method;
    c.frac_saturated = sampler.frac_saturated;
    c.eval_metric = evals[e].name();
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace detail

// Methods are compared at matched distinct-sample budgets: for IS the number
// of draws M is chosen so that the expected number of distinct points,
// N - sum_n (1 - q_n)^M, reaches the budget.
inline ExperimentResult run_comparison(const PredictionPool& pool,
                                       std::span<const Label> labels,
                                       const ScenarioConfig& config) {
  config.validate();
  const MetricSpec plan_metric = MetricSpec::parse(config.plan_metric);
  const MetricSpec eval_metric = MetricSpec::parse(config.eval_metric);
  PlanningInfo info;
  const DeviationVector dev =
      planning_deviations(pool, plan_metric, config.lambda, &info);
  ExperimentResult result;
  result.truth = exact_metric(pool, labels, eval_metric);
  for (Method m : config.methods) {
    for (std::size_t i = 0; i < config.budgets.size(); ++i) {
      const auto sampler = detail::make_sampler(m, dev, info, config.budgets[i]);
      auto cells = detail::run_cell(pool, labels, sampler, i, {eval_metric},
                                    {result.truth}, config);
      cells[0].budget = config.budgets[i];
      cells[0].plan_metric = plan_metric.name();
      result.cells.push_back(std::move(cells[0]));
    }
  }
  return result;
}

inline ExperimentResult run_comparison(const ScenarioConfig& config) {
  const SimulatedPool sim = simulate_pool(config, config.seed);
  return run_comparison(sim.pool, sim.labels, config);
}

struct CoverageCell {
  Method method;
  double budget;
  double coverage;
  bool collapsed;  // some repetitions produced a zero-width interval
};

inline std::vector<CoverageCell> calibration_sweep(const PredictionPool& pool,
                                                   std::span<const Label> labels,
                                                   ScenarioConfig config,
                                                   double level) {
  config.level = level;
  const ExperimentResult res = run_comparison(pool, labels, config);
  std::vector<CoverageCell> out;
  for (const auto& c : res.cells)
    out.push_back({c.method, c.budget, c.coverage, c.collapsed > 0});
  return out;
}

inline std::vector<CoverageCell> calibration_sweep(const ScenarioConfig& config,
                                                   double level = 0.9) {
  const SimulatedPool sim = simulate_pool(config, config.seed);
  return calibration_sweep(sim.pool, sim.labels, config, level);
}

struct WeightsReport {
  double fraction_saturated = 0.0;
  std::vector<double> sorted;  // b (Bernoulli) or pi (importance), descending
};

inline WeightsReport weights_report(const BernoulliPlan& plan) {
  WeightsReport r;
  r.sorted = plan.b;
  std::sort(r.sorted.begin(), r.sorted.end(), std::greater<>());
  r.fraction_saturated =
      static_cast<double>(std::count(plan.b.begin(), plan.b.end(), 1.0)) /
      static_cast<double>(plan.size());
  return r;
}

inline WeightsReport weights_report(const ImportancePlan& plan) {
  WeightsReport r;
  r.sorted = inclusion_probability(plan.q, static_cast<double>(plan.draws));
  std::sort(r.sorted.begin(), r.sorted.end(), std::greater<>());
  r.fraction_saturated =
      static_cast<double>(std::count(r.sorted.begin(), r.sorted.end(), 1.0)) /
      static_cast<double>(plan.size());
  return r;
}

// Error of every (plan metric, eval metric) pair for each configured method
// and budget. Cells are ordered method, budget, plan metric, eval metric.
inline std::vector<CellResult> cross_metric_sweep(
    const PredictionPool& pool, std::span<const Label> labels,
    const ScenarioConfig& config, const std::vector<std::string>& plan_metrics,
    const std::vector<std::string>& eval_metrics) {
  config.validate();
  std::vector<MetricSpec> evals;
  std::vector<double> truths;
  for (const auto& name : eval_metrics) {
    evals.push_back(MetricSpec::parse(name));
    truths.push_back(exact_metric(pool, labels, evals.back()));
  }
  std::vector<CellResult> out;
  for (Method m : config.methods) {
    for (std::size_t i = 0; i < config.budgets.size(); ++i) {
      for (const auto& plan_name : plan_metrics) {
        const MetricSpec plan_metric = MetricSpec::parse(plan_name);
        PlanningInfo info;
        const DeviationVector dev =
            planning_deviations(pool, plan_metric, config.lambda, &info);
        const auto sampler = detail::make_sampler(m, dev, info, config.budgets[i]);
        for (auto& c :
             detail::run_cell(pool, labels, sampler, i, evals, truths, config)) {
          c.budget = config.budgets[i];
          c.plan_metric = plan_metric.name();
          out.push_back(std::move(c));
        }
      }
    }
  }
  return out;
}

inline std::vector<CellResult> cross_metric_sweep(const ScenarioConfig& config) {
  const SimulatedPool sim = simulate_pool(config, config.seed);
  return cross_metric_sweep(sim.pool, sim.labels, config, config.plan_metrics,
                            config.eval_metrics);
}

}  // namespace metricwise
