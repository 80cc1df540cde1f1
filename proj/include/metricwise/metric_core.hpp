#pragma once

// Ratio metrics F = sum_n f(pred_n, true_n) / sum_n g(pred_n, true_n), the
// blended label posterior used for planning, and the per-point deviations
// h_n that drive both optimal samplers.

#include <metricwise/error.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace metricwise {

using Label = std::int8_t;
inline constexpr Label kUnlabeled = -1;

inline constexpr double kDefaultLambda = 0.9;
inline constexpr double kDefaultThreshold = 0.5;
// Added to every sampled squared deviation in the post-sampling error.
inline constexpr double kDefaultEpsilon = 1e-10;

inline int predict_class(double prob, double threshold) {
  if (!(prob >= 0.0 && prob <= 1.0))
    throw ValidationError("probability outside [0,1]: " + std::to_string(prob));
  if (!(threshold >= 0.0 && threshold <= 1.0))
    throw ValidationError("threshold outside [0,1]: " +
                          std::to_string(threshold));
  return prob > threshold ? 1 : 0;
}

// The unlabelled test set: model probabilities and thresholded predictions.
class PredictionPool {
 public:
  explicit PredictionPool(std::vector<double> probs, double threshold = kDefaultThreshold,
                 std::vector<std::string> ids = {})
      : probs_(std::move(probs)), ids_(std::move(ids)), threshold_(threshold) {
    if (probs_.empty()) throw ValidationError("prediction pool is empty");
    if (!ids_.empty()) {
      if (ids_.size() != probs_.size())
        throw ValidationError("id count does not match probability count");
      std::unordered_set<std::string> seen;
      for (const auto& id : ids_)
        if (!seen.insert(id).second)
          throw ValidationError("duplicate id: " + id);
    }
    preds_.reserve(probs_.size());
    for (double p : probs_) preds_.push_back(static_cast<std::uint8_t>(
                                predict_class(p, threshold_)));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double threshold() const noexcept { return threshold_; }
  double prob(std::size_t n) const { return probs_[n]; }
  int pred(std::size_t n) const { return preds_[n]; }
  std::span<const double> probs() const noexcept { return probs_; }
  std::span<const std::uint8_t> preds() const noexcept { return preds_; }
  bool has_ids() const noexcept { return !ids_.empty(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::string id(std::size_t n) const {
    return ids_.empty() ? std::to_string(n) : ids_[n];
  }

 private:
  std::vector<double> probs_;
  std::vector<std::uint8_t> preds_;
  std::vector<std::string> ids_;
  double threshold_;
};

// 2x2 payoff table indexed [predicted class][true class].
using PayoffTable = std::array<std::array<double, 2>, 2>;

class MetricSpec {
 public:
  enum class Kind { Accuracy, FAlpha, Specificity, Custom };

  static MetricSpec accuracy() {
    return MetricSpec(Kind::Accuracy, "Accuracy", 0.0, {{{1, 0}, {0, 1}}},
                      {{{1, 1}, {1, 1}}});
  }

  static MetricSpec f_alpha(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw ValidationError("F_alpha requires alpha in [0,1]");
    std::string name;
    if (alpha == 0.5)
      name = "F1";
    else if (alpha == 0.0)
      name = "Recall";
    else if (alpha == 1.0)
      name = "Precision";
    else
      name = "FAlpha:" + format_alpha(alpha);
    // g(p,t) = alpha*[p=1] + (1-alpha)*[t=1]
    return MetricSpec(Kind::FAlpha, std::move(name), alpha, {{{0, 0}, {0, 1}}},
                      {{{0, 1 - alpha}, {alpha, 1.0}}});
  }
  static MetricSpec f1() { return f_alpha(0.5); }
  static MetricSpec recall() { return f_alpha(0.0); }
  static MetricSpec precision() { return f_alpha(1.0); }

  static MetricSpec specificity() {
    return MetricSpec(Kind::Specificity, "Specificity", 0.0, {{{1, 0}, {0, 0}}},
                      {{{1, 0}, {1, 0}}});
  }

  static MetricSpec custom(std::string name, const PayoffTable& f,
                           const PayoffTable& g) {
    for (const auto* table : {&f, &g})
      for (const auto& row : *table)
        for (double v : row)
          if (!(v >= 0.0) || !std::isfinite(v))
            throw ValidationError("payoff tables must be finite and >= 0");
    return MetricSpec(Kind::Custom, std::move(name), 0.0, f, g);
  }

  // Accepts Accuracy, F1, Precision, Recall, Specificity and FAlpha:<a>,
  // case-insensitively.
  static MetricSpec parse(const std::string& text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    if (lower == "accuracy" || lower == "acc") return accuracy();
    if (lower == "f1") return f1();
    if (lower == "precision") return precision();
    if (lower == "recall" || lower == "sensitivity") return recall();
    if (lower == "specificity") return specificity();
    const std::string prefix = "falpha:";
    if (lower.rfind(prefix, 0) == 0) {
      try {
        std::size_t used = 0;
        const std::string rest = lower.substr(prefix.size());
        const double a = std::stod(rest, &used);
        if (used == rest.size()) return f_alpha(a);
      } catch (const std::logic_error&) {
      }
    }
    throw ValidationError("unknown metric: " + text);
  }

  Kind kind() const noexcept { return kind_; }
  const std::string& name() const noexcept { return name_; }
  double alpha() const noexcept { return alpha_; }
  const PayoffTable& f_table() const noexcept { return f_; }
  const PayoffTable& g_table() const noexcept { return g_; }

  double f(int pred, int truth) const { return f_[pred][truth]; }
  double g(int pred, int truth) const { return g_[pred][truth]; }

 private:
  MetricSpec(Kind kind, std::string name, double alpha, const PayoffTable& f,
             const PayoffTable& g)
      : kind_(kind), name_(std::move(name)), alpha_(alpha), f_(f), g_(g) {}

  static std::string format_alpha(double a) {
    std::string s = std::to_string(a);
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
  }

  Kind kind_;
  std::string name_;
  double alpha_;
  PayoffTable f_;
  PayoffTable g_;
};

// p_a(n) = lambda * p(n) + (1 - lambda) * 0.5
struct BlendedPosterior {
  double lambda = kDefaultLambda;
  std::vector<double> p;
};

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw ValidationError("lambda outside [0,1]: " + std::to_string(lambda));
}

inline BlendedPosterior blend_posterior(std::span<const double> probs,
                                        double lambda = kDefaultLambda) {
  check_lambda(lambda);
  BlendedPosterior post{lambda, {}};
  post.p.reserve(probs.size());
  for (double p : probs) post.p.push_back(lambda * p + (1.0 - lambda) * 0.5);
  return post;
}

inline BlendedPosterior blend_posterior(const PredictionPool& pool,
                                        double lambda = kDefaultLambda) {
  return blend_posterior(pool.probs(), lambda);
}

// F'_a: ratio of payoff expectations under the blended posterior.
inline double predicted_metric(const PredictionPool& pool,
                               const MetricSpec& metric,
                               const BlendedPosterior& post) {
  if (post.p.size() != pool.size())
    throw ValidationError("posterior length does not match pool");
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < pool.size(); ++n) {
    const int c = pool.pred(n);
    const double pa = post.p[n];
    num += pa * metric.f(c, 1) + (1.0 - pa) * metric.f(c, 0);
    den += pa * metric.g(c, 1) + (1.0 - pa) * metric.g(c, 0);
  }
  if (!(den > 0.0)) throw DegenerateMetric(metric.name());
  return num / den;
}

struct DeviationVector {
  std::vector<double> h;
  double f_ref = 0.0;
};

// h_n^2 = sum_t p_a(t) * (f(c_n, t) - f_ref * g(c_n, t))^2
inline DeviationVector deviations(const PredictionPool& pool,
                                  const MetricSpec& metric,
                                  const BlendedPosterior& post, double f_ref) {
  if (!std::isfinite(f_ref)) throw ValidationError("reference metric not finite");
  if (post.p.size() != pool.size())
    throw ValidationError("posterior length does not match pool");
  DeviationVector dev{{}, f_ref};
  dev.h.reserve(pool.size());
  for (std::size_t n = 0; n < pool.size(); ++n) {
    const int c = pool.pred(n);
    const double r1 = metric.f(c, 1) - f_ref * metric.g(c, 1);
    const double r0 = metric.f(c, 0) - f_ref * metric.g(c, 0);
    const double pa = post.p[n];
    dev.h.push_back(std::sqrt(pa * r1 * r1 + (1.0 - pa) * r0 * r0));
  }
  return dev;
}

// What a plan was built from; serialized with the plan.
struct PlanningInfo {
  double lambda = kDefaultLambda;
  std::string metric;
  double f_prime_a = 0.0;
};

// Blend, predict F'_a, and build deviations around it in one step.
inline DeviationVector planning_deviations(const PredictionPool& pool,
                                           const MetricSpec& metric,
                                           double lambda, PlanningInfo* info = nullptr) {
  const BlendedPosterior post = blend_posterior(pool, lambda);
  const double fa = predicted_metric(pool, metric, post);
  if (info) *info = PlanningInfo{lambda, metric.name(), fa};
  return deviations(pool, metric, post, fa);
}

inline void check_labels(std::span<const Label> labels, std::size_t n,
                         bool require_all) {
  if (labels.size() != n)
    throw ValidationError("label vector length " + std::to_string(labels.size()) +
                          " does not match pool size " + std::to_string(n));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Label l = labels[i];
    if (l == kUnlabeled) {
      if (require_all) throw MissingLabel(i);
    } else if (l != 0 && l != 1) {
      throw ValidationError("label at index " + std::to_string(i) +
                            " is not binary");
    }
  }
}

inline double exact_metric(const PredictionPool& pool,
                           std::span<const Label> labels,
                           const MetricSpec& metric) {
  check_labels(labels, pool.size(), true);
  double num = 0.0, den = 0.0;
  for (std::size_t n = 0; n < pool.size(); ++n) {
    num += metric.f(pool.pred(n), labels[n]);
    den += metric.g(pool.pred(n), labels[n]);
  }
  if (!(den > 0.0)) throw DegenerateMetric(metric.name());
  return num / den;
}

// Per-point payoff lookup shared by the estimators. Throws MissingLabel for an
// unlabelled index.
class BinaryPayoffs {
 public:
  BinaryPayoffs(const PredictionPool& pool, std::span<const Label> labels,
                MetricSpec metric)
      : pool_(&pool), labels_(labels), metric_(std::move(metric)) {
    check_labels(labels, pool.size(), false);
  }

  std::size_t size() const noexcept { return pool_->size(); }

  std::pair<double, double> operator()(std::size_t n) const {
    const Label t = labels_[n];
    if (t == kUnlabeled) throw MissingLabel(n);
    const int c = pool_->pred(n);
    return {metric_.f(c, t), metric_.g(c, t)};
  }

 private:
  const PredictionPool* pool_;
  std::span<const Label> labels_;
  MetricSpec metric_;
};

}  // namespace metricwise
