#pragma once

// Multi-label extensions: micro-F_alpha as a ratio metric over per-point
// class sums, and macro-F1 through a first-order (delta method) expansion in
// the per-class TP/FP/FN rates. Classes are modelled as independent given
// the input.

#include <metricwise/bernoulli.hpp>
#include <metricwise/confidence.hpp>
#include <metricwise/error.hpp>
#include <metricwise/importance.hpp>
#include <metricwise/metric_core.hpp>
#include <metricwise/report.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace metricwise {

class MultiLabelPool {
 public:
  // `probs` is row-major N x C.
  MultiLabelPool(std::size_t classes, std::vector<double> probs,
                 double threshold = kDefaultThreshold,
                 std::vector<std::string> ids = {})
      : classes_(classes), probs_(std::move(probs)), ids_(std::move(ids)),
        threshold_(threshold) {
    if (classes_ < 1) throw ValidationError("multi-label pool needs C >= 1");
    if (probs_.empty() || probs_.size() % classes_ != 0)
      throw ValidationError("multi-label probabilities are not N x C");
    if (!ids_.empty()) {
      if (ids_.size() != size())
        throw ValidationError("id count does not match row count");
      std::unordered_set<std::string> seen;
      for (const auto& id : ids_)
        if (!seen.insert(id).second) throw ValidationError("duplicate id: " + id);
    }
    preds_.reserve(probs_.size());
    for (double p : probs_)
      preds_.push_back(static_cast<std::uint8_t>(predict_class(p, threshold_)));
  }

  std::size_t size() const noexcept { return probs_.size() / classes_; }
  std::size_t classes() const noexcept { return classes_; }
  double threshold() const noexcept { return threshold_; }
  double prob(std::size_t n, std::size_t k) const { return probs_[n * classes_ + k]; }
  int pred(std::size_t n, std::size_t k) const { return preds_[n * classes_ + k]; }
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const std::uint8_t> pred_row(std::size_t n) const {
    return std::span<const std::uint8_t>(preds_).subspan(n * classes_, classes_);
  }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::string id(std::size_t n) const {
    return ids_.empty() ? std::to_string(n) : ids_[n];
  }

 private:
  std::size_t classes_;
  std::vector<double> probs_;
  std::vector<std::uint8_t> preds_;
  std::vector<std::string> ids_;
  double threshold_;
};

// Row-major N x C labels; a row is either fully labelled or all kUnlabeled.
struct LabelMatrix {
  std::size_t classes = 1;
  std::vector<Label> values;

  std::size_t size() const { return values.size() / classes; }
  std::span<const Label> row(std::size_t n) const {
    return std::span<const Label>(values).subspan(n * classes, classes);
  }
  bool labeled(std::size_t n) const { return values[n * classes] != kUnlabeled; }

  void validate(std::size_t rows, std::size_t cls) const {
    if (classes != cls || values.size() != rows * cls)
      throw ValidationError("label matrix shape does not match pool");
    for (std::size_t n = 0; n < rows; ++n) {
      const auto r = row(n);
      const bool known = r[0] != kUnlabeled;
      for (Label l : r) {
        if (known ? (l != 0 && l != 1) : l != kUnlabeled)
          throw ValidationError("inconsistent label row " + std::to_string(n));
      }
    }
  }
};

// f_n = sum_i [p_i = 1][t_i = 1],  g_n = sum_i alpha [p_i = 1] + (1 - alpha) [t_i = 1]
inline std::pair<double, double> micro_fg(std::span<const std::uint8_t> pred,
                                          std::span<const Label> truth,
                                          double alpha = 0.5) {
  if (pred.size() != truth.size())
    throw ValidationError("prediction and label rows differ in length");
  double f = 0.0, g = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] != 0 && truth[i] != 1) throw ValidationError("label is not binary");
    f += (pred[i] == 1 && truth[i] == 1) ? 1.0 : 0.0;
    g += alpha * (pred[i] == 1 ? 1.0 : 0.0) + (1.0 - alpha) * (truth[i] == 1 ? 1.0 : 0.0);
  }
  return {f, g};
}

class MicroPayoffs {
 public:
  MicroPayoffs(const MultiLabelPool& pool, const LabelMatrix& labels,
               double alpha = 0.5)
      : pool_(&pool), labels_(&labels), alpha_(alpha) {
    labels.validate(pool.size(), pool.classes());
  }
  std::size_t size() const noexcept { return pool_->size(); }
  std::pair<double, double> operator()(std::size_t n) const {
    if (!labels_->labeled(n)) throw MissingLabel(n);
    return micro_fg(pool_->pred_row(n), labels_->row(n), alpha_);
  }

 private:
  const MultiLabelPool* pool_;
  const LabelMatrix* labels_;
  double alpha_;
};

inline double exact_micro(const MultiLabelPool& pool, const LabelMatrix& labels,
                          double alpha = 0.5) {
  const MicroPayoffs payoff(pool, labels, alpha);
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < pool.size(); ++n) {
    const auto [f, g] = payoff(n);
    num += f;
    den += g;
  }
  if (!(den > 0.0)) throw DegenerateMetric("MicroF1");
  return num / den;
}

// Per-class blended posteriors, row-major like the pool.
inline BlendedPosterior blend_posterior(const MultiLabelPool& pool,
                                        double lambda = kDefaultLambda) {
  return blend_posterior(pool.probs(), lambda);
}

inline double micro_predicted_metric(const MultiLabelPool& pool,
                                     const BlendedPosterior& post,
                                     double alpha = 0.5) {
  const std::size_t c = pool.classes();
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < pool.size(); ++n)
    for (std::size_t k = 0; k < c; ++k) {
      const double pa = post.p[n * c + k];
      const double pred = pool.pred(n, k);
      num += pred * pa;
      den += alpha * pred + (1.0 - alpha) * pa;
    }
  if (!(den > 0.0)) throw DegenerateMetric("MicroF1");
  return num / den;
}

// h_n^2 = E[(sum_k r_k)^2] for independent classes, where
// r_k = f(p_k, t_k) - f_ref g(p_k, t_k):
//   sum_k E r_k^2 - sum_k (E r_k)^2 + (sum_k E r_k)^2
inline DeviationVector micro_deviation(const MultiLabelPool& pool,
                                       const BlendedPosterior& post,
                                       double f_ref, double alpha = 0.5) {
  if (!std::isfinite(f_ref)) throw ValidationError("reference metric not finite");
  const MetricSpec metric = MetricSpec::f_alpha(alpha);
  const std::size_t c = pool.classes();
  DeviationVector dev{std::vector<double>(pool.size()), f_ref};
  for (std::size_t n = 0; n < pool.size(); ++n) {
    double sum_sq = 0.0, sum_mean_sq = 0.0, sum_mean = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      const int p = pool.pred(n, k);
      const double pa = post.p[n * c + k];
      const double r1 = metric.f(p, 1) - f_ref * metric.g(p, 1);
      const double r0 = metric.f(p, 0) - f_ref * metric.g(p, 0);
      const double mean = pa * r1 + (1.0 - pa) * r0;
      sum_sq += pa * r1 * r1 + (1.0 - pa) * r0 * r0;
      sum_mean_sq += mean * mean;
      sum_mean += mean;
    }
    dev.h[n] = std::sqrt(std::max(0.0, sum_sq - sum_mean_sq + sum_mean * sum_mean));
  }
  return dev;
}

inline DeviationVector micro_planning_deviations(const MultiLabelPool& pool,
                                                 double lambda, double alpha = 0.5,
                                                 PlanningInfo* info = nullptr) {
  const BlendedPosterior post = blend_posterior(pool, lambda);
  const double fa = micro_predicted_metric(pool, post, alpha);
  if (info) info->lambda = lambda, info->metric = "MicroF1", info->f_prime_a = fa;
  return micro_deviation(pool, post, fa, alpha);
}

// Per-class TP, FP, FN rates (each normalised by N).
struct MacroCounts {
  std::vector<double> a, b, c;
  std::size_t classes() const { return a.size(); }
};

struct MacroValue {
  double value = 0.0;
  std::size_t degenerate_classes = 0;
};

// P = (1/C) sum a/(a+b), R = (1/C) sum a/(a+c), F = 2PR/(P+R). A class with an
// empty denominator contributes 0 to that average.
inline MacroValue macro_f1_value(const MacroCounts& k) {
  const std::size_t c = k.classes();
  if (c == 0 || k.b.size() != c || k.c.size() != c)
    throw ValidationError("macro counts have inconsistent class counts");
  double p = 0.0, r = 0.0;
  MacroValue out;
  for (std::size_t i = 0; i < c; ++i) {
    bool bad = false;
    if (k.a[i] + k.b[i] > 0.0) p += k.a[i] / (k.a[i] + k.b[i]); else bad = true;
    if (k.a[i] + k.c[i] > 0.0) r += k.a[i] / (k.a[i] + k.c[i]); else bad = true;
    if (bad) ++out.degenerate_classes;
  }
  p /= static_cast<double>(c);
  r /= static_cast<double>(c);
  if (!(p + r > 0.0)) throw DegenerateMetric("MacroF1");
  out.value = 2.0 * p * r / (p + r);
  return out;
}

inline double macro_f1(const MacroCounts& k) { return macro_f1_value(k).value; }

struct MacroGradient {
  std::vector<double> da, db, dc;
};

inline MacroGradient macro_gradient(const MacroCounts& k) {
  const std::size_t c = k.classes();
  const double inv_c = 1.0 / static_cast<double>(c);
  double p = 0.0, r = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    if (k.a[i] + k.b[i] > 0.0) p += k.a[i] / (k.a[i] + k.b[i]);
    if (k.a[i] + k.c[i] > 0.0) r += k.a[i] / (k.a[i] + k.c[i]);
  }
  p *= inv_c;
  r *= inv_c;
  if (!(p + r > 0.0)) throw DegenerateMetric("MacroF1");
  const double s2 = (p + r) * (p + r);
  const double dfdp = 2.0 * r * r / s2;
  const double dfdr = 2.0 * p * p / s2;
  MacroGradient grad{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0),
                     std::vector<double>(c, 0.0)};
  for (std::size_t i = 0; i < c; ++i) {
    const double ab = k.a[i] + k.b[i], ac = k.a[i] + k.c[i];
    if (ab > 0.0) {
      grad.da[i] += dfdp * inv_c * k.b[i] / (ab * ab);
      grad.db[i] = -dfdp * inv_c * k.a[i] / (ab * ab);
    }
    if (ac > 0.0) {
      grad.da[i] += dfdr * inv_c * k.c[i] / (ac * ac);
      grad.dc[i] = -dfdr * inv_c * k.a[i] / (ac * ac);
    }
  }
  return grad;
}

inline MacroCounts expected_macro_counts(const MultiLabelPool& pool,
                                         const BlendedPosterior& post) {
  const std::size_t c = pool.classes();
  const double inv_n = 1.0 / static_cast<double>(pool.size());
  MacroCounts k{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0),
                std::vector<double>(c, 0.0)};
  for (std::size_t n = 0; n < pool.size(); ++n)
    for (std::size_t i = 0; i < c; ++i) {
      const double pa = post.p[n * c + i];
      if (pool.pred(n, i) == 1) {
        k.a[i] += pa;
        k.b[i] += 1.0 - pa;
      } else {
        k.c[i] += pa;
      }
    }
  for (std::size_t i = 0; i < c; ++i) k.a[i] *= inv_n, k.b[i] *= inv_n, k.c[i] *= inv_n;
  return k;
}

// h_n^2 = sum_i [p_i=1] P(t_i=1) da_i^2 + [p_i=1] P(t_i=0) db_i^2 + [p_i=0] P(t_i=1) dc_i^2
// with gradients at the expected counts.
inline DeviationVector macro_deviation(const MultiLabelPool& pool,
                                       const BlendedPosterior& post) {
  const MacroCounts expected = expected_macro_counts(pool, post);
  const double f_ref = macro_f1(expected);
  const MacroGradient grad = macro_gradient(expected);
  const std::size_t c = pool.classes();
  DeviationVector dev{std::vector<double>(pool.size()), f_ref};
  for (std::size_t n = 0; n < pool.size(); ++n) {
    double h2 = 0.0;
    for (std::size_t i = 0; i < c; ++i) {
      const double pa = post.p[n * c + i];
      if (pool.pred(n, i) == 1)
        h2 += pa * grad.da[i] * grad.da[i] + (1.0 - pa) * grad.db[i] * grad.db[i];
      else
        h2 += pa * grad.dc[i] * grad.dc[i];
    }
    dev.h[n] = std::sqrt(h2);
  }
  return dev;
}

namespace detail {

// Squared gradient contribution of one labelled point.
inline double macro_point_sq(const MultiLabelPool& pool, const LabelMatrix& labels,
                             const MacroGradient& grad, std::size_t n) {
  double d2 = 0.0;
  const auto truth = labels.row(n);
  for (std::size_t i = 0; i < pool.classes(); ++i) {
    const bool p = pool.pred(n, i) == 1, t = truth[i] == 1;
    if (p && t) d2 += grad.da[i] * grad.da[i];
    else if (p) d2 += grad.db[i] * grad.db[i];
    else if (t) d2 += grad.dc[i] * grad.dc[i];
  }
  return d2;
}

// Accumulate weight * indicator into the counts for point n.
inline void add_macro_point(MacroCounts& k, const MultiLabelPool& pool,
                            const LabelMatrix& labels, std::size_t n, double w) {
  const auto truth = labels.row(n);
  for (std::size_t i = 0; i < pool.classes(); ++i) {
    const bool p = pool.pred(n, i) == 1, t = truth[i] == 1;
    if (p && t) k.a[i] += w;
    else if (p) k.b[i] += w;
    else if (t) k.c[i] += w;
  }
}

inline MacroCounts zero_counts(std::size_t c) {
  return {std::vector<double>(c, 0.0), std::vector<double>(c, 0.0),
          std::vector<double>(c, 0.0)};
}

}  // namespace detail

inline MacroCounts exact_macro_counts(const MultiLabelPool& pool,
                                      const LabelMatrix& labels) {
  labels.validate(pool.size(), pool.classes());
  MacroCounts k = detail::zero_counts(pool.classes());
  const double w = 1.0 / static_cast<double>(pool.size());
  for (std::size_t n = 0; n < pool.size(); ++n) {
    if (!labels.labeled(n)) throw MissingLabel(n);
    detail::add_macro_point(k, pool, labels, n, w);
  }
  return k;
}

// a_i = (1/N) sum_{s=1} [p_i=1, t_i=1] / b_n, and likewise for b_i, c_i.
inline MacroCounts macro_counts_bs(const MultiLabelPool& pool, const BSDraw& draw,
                                   const BernoulliPlan& plan,
                                   const LabelMatrix& labels) {
  if (draw.selected.size() != pool.size() || plan.size() != pool.size())
    throw ValidationError("draw, plan and pool disagree on size");
  labels.validate(pool.size(), pool.classes());
  MacroCounts k = detail::zero_counts(pool.classes());
  const double inv_n = 1.0 / static_cast<double>(pool.size());
  for (std::size_t n = 0; n < pool.size(); ++n) {
    if (!draw.selected[n]) continue;
    if (!labels.labeled(n)) throw MissingLabel(n);
    detail::add_macro_point(k, pool, labels, n, inv_n / plan.b[n]);
  }
  return k;
}

// Point estimate from the sampled counts; variance from the delta method with
// per-class (1/b - 1) moments evaluated at the sampled labels, gradients at
// the sampled counts, and eps added per labelled point.
inline EstimateReport estimate_macro_bs(const MultiLabelPool& pool,
                                        const BSDraw& draw,
                                        const BernoulliPlan& plan,
                                        const LabelMatrix& labels, double level,
                                        double epsilon = kDefaultEpsilon) {
  const MacroCounts k = macro_counts_bs(pool, draw, plan, labels);
  MacroValue value;
  try {
    value = macro_f1_value(k);
  } catch (const DegenerateMetric&) {
    throw DegenerateEstimate("macro-F1 estimate is degenerate");
  }
  const MacroGradient grad = macro_gradient(k);
  double acc = 0.0;
  for (std::size_t n = 0; n < pool.size(); ++n) {
    if (!draw.selected[n]) continue;
    const double inv_b = 1.0 / plan.b[n];
    acc += inv_b * ((inv_b - 1.0) * detail::macro_point_sq(pool, labels, grad, n) +
                    epsilon);
  }
  const double big_n = static_cast<double>(pool.size());
  EstimateReport r;
  r.method = "bernoulli";
  r.metric = "MacroF1";
  r.estimate = value.value;
  r.variance = acc / (big_n * big_n);
  r.level = level;
  r.labeled = draw.count();
  r.draws = r.labeled;
  if (value.degenerate_classes > 0) r.flags.emplace_back("degenerate_class");
  attach_interval(r);
  return r;
}

// Importance-sampling counterpart: a_i = (1/(MN)) sum_n m_n [...] / q_n.
inline EstimateReport estimate_macro_is(const MultiLabelPool& pool,
                                        const ISDraw& draw,
                                        const ImportancePlan& plan,
                                        const LabelMatrix& labels, double level,
                                        double epsilon = kDefaultEpsilon) {
  if (draw.counts.size() != pool.size() || plan.size() != pool.size())
    throw ValidationError("draw, plan and pool disagree on size");
  labels.validate(pool.size(), pool.classes());
  const double mn = static_cast<double>(draw.total()) * static_cast<double>(pool.size());
  MacroCounts k = detail::zero_counts(pool.classes());
  for (std::size_t n = 0; n < pool.size(); ++n) {
    if (draw.counts[n] == 0) continue;
    if (!labels.labeled(n)) throw MissingLabel(n);
    detail::add_macro_point(k, pool, labels, n,
                            static_cast<double>(draw.counts[n]) / (mn * plan.q[n]));
  }
  MacroValue value;
  try {
    value = macro_f1_value(k);
  } catch (const DegenerateMetric&) {
    throw DegenerateEstimate("macro-F1 estimate is degenerate");
  }
  const MacroGradient grad = macro_gradient(k);
  double acc = 0.0;
  for (std::size_t n = 0; n < pool.size(); ++n) {
    if (draw.counts[n] == 0) continue;
    const double q = plan.q[n];
    acc += static_cast<double>(draw.counts[n]) *
           (detail::macro_point_sq(pool, labels, grad, n) + epsilon) / (q * q);
  }
  EstimateReport r;
  r.method = "importance";
  r.metric = "MacroF1";
  r.estimate = value.value;
  r.variance = acc / (mn * mn);
  r.level = level;
  r.labeled = draw.distinct();
  r.draws = static_cast<std::size_t>(draw.total());
  if (value.degenerate_classes > 0) r.flags.emplace_back("degenerate_class");
  attach_interval(r);
  return r;
}

}  // namespace metricwise
