#pragma once

#include <metricwise/bernoulli.hpp>
#include <metricwise/confidence.hpp>
#include <metricwise/importance.hpp>

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace metricwise {

struct EstimateReport {
  std::string method;
  std::string metric;
  double estimate = 0.0;
  // Ratio parts; NaN for metrics that are not a single ratio (macro F1).
  double x_hat = std::numeric_limits<double>::quiet_NaN();
  double y_hat = std::numeric_limits<double>::quiet_NaN();
  double variance = 0.0;
  double level = 0.9;
  Interval ci;
  BetaFit fit;
  std::size_t labeled = 0;  // distinct labelled points used
  std::size_t draws = 0;    // IS draws including repeats; labelled count for BS
  std::vector<std::string> flags;

  bool covers(double truth) const { return ci.lo <= truth && truth <= ci.hi; }
};

inline void attach_interval(EstimateReport& report) {
  report.fit = beta_fit(report.estimate, report.variance);
  report.ci = beta_interval(report.fit, report.level);
  for (auto& f : report.fit.flags()) report.flags.push_back(std::move(f));
}

template <typename Payoffs>
EstimateReport report_is(const ISDraw& draw, const ImportancePlan& plan,
                         const Payoffs& payoff, std::string metric_name,
                         double level, double epsilon = kDefaultEpsilon) {
  EstimateReport r;
  r.method = "importance";
  r.metric = std::move(metric_name);
  const RatioEstimate est = estimate_is(draw, plan, payoff);
  r.estimate = est.value;
  r.x_hat = est.x_hat;
  r.y_hat = est.y_hat;
  r.variance = error_is_post(draw, plan, payoff, est.value, epsilon);
  r.level = level;
  r.labeled = draw.distinct();
  r.draws = static_cast<std::size_t>(draw.total());
  attach_interval(r);
  return r;
}

template <typename Payoffs>
EstimateReport report_bs(const BSDraw& draw, const BernoulliPlan& plan,
                         const Payoffs& payoff, std::string metric_name,
                         double level, double epsilon = kDefaultEpsilon) {
  EstimateReport r;
  r.method = "bernoulli";
  r.metric = std::move(metric_name);
  const RatioEstimate est = estimate_bs(draw, plan, payoff);
  r.estimate = est.value;
  r.x_hat = est.x_hat;
  r.y_hat = est.y_hat;
  r.variance = error_bs_post(draw, plan, payoff, est.value, epsilon);
  r.level = level;
  r.labeled = draw.count();
  r.draws = r.labeled;
  attach_interval(r);
  return r;
}

}  // namespace metricwise
