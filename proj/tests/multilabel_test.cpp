#include <metricwise/multilabel.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace metricwise;

namespace {

struct Synthetic {
  MultiLabelPool pool;
  LabelMatrix labels;
};

Synthetic synthetic(std::size_t n, std::size_t c, std::uint64_t seed, double sharp = 2.0) {
  const Stream s(seed);
  std::vector<double> probs(n * c);
  LabelMatrix labels{c, std::vector<Label>(n * c)};
  for (std::size_t i = 0; i < n * c; ++i) {
    const Label y = s.uniform(i) < 0.3 ? 1 : 0;
    const double u = std::pow(s.uniform2(i), 1.0 / sharp);
    probs[i] = y ? u : 1.0 - u;
    labels.values[i] = y;
  }
  return {MultiLabelPool(c, probs), labels};
}

}  // namespace

TEST(MicroFg, Examples) {
  {
    const std::vector<std::uint8_t> p(6, 1);
    const std::vector<Label> t(6, 1);
    EXPECT_EQ(micro_fg(p, t), (std::pair<double, double>{6, 6}));
  }
  {
    const std::vector<std::uint8_t> p(4, 0);
    const std::vector<Label> t(4, 0);
    EXPECT_EQ(micro_fg(p, t), (std::pair<double, double>{0, 0}));
  }
  {
    const std::vector<std::uint8_t> p{1, 0};
    const std::vector<Label> t{1, 1};
    EXPECT_EQ(micro_fg(p, t), (std::pair<double, double>{1, 1.5}));
  }
}

TEST(MicroDeviation, CertainLabelsAndZeroResidual) {
  // Every prediction is right and certain: f = g on each class so h = 0 at f_ref = 1.
  const MultiLabelPool pool(2, {1.0, 0.0, 0.0, 1.0});
  const BlendedPosterior post{1.0, {1.0, 0.0, 0.0, 1.0}};
  for (double h : micro_deviation(pool, post, 1.0).h) EXPECT_DOUBLE_EQ(h, 0.0);
}

TEST(MicroDeviation, SingleClassReducesToBinary) {
  const std::vector<double> probs{0.1, 0.45, 0.6, 0.9, 0.75};
  const MultiLabelPool ml(1, probs);
  const PredictionPool bin(probs, 0.5);
  const auto post = blend_posterior(bin, 0.9);
  const auto a = micro_deviation(ml, post, 0.6);
  const auto b = deviations(bin, MetricSpec::f1(), post, 0.6);
  for (std::size_t n = 0; n < probs.size(); ++n) EXPECT_DOUBLE_EQ(a.h[n], b.h[n]);
  EXPECT_DOUBLE_EQ(micro_predicted_metric(ml, post), predicted_metric(bin, MetricSpec::f1(), post));
}

TEST(MicroDeviation, MatchesEnumeration) {
  const auto data = synthetic(40, 4, 3);
  const auto post = blend_posterior(data.pool, 0.9);
  const double fref = 0.55;
  const auto dev = micro_deviation(data.pool, post, fref);
  for (std::size_t n = 0; n < data.pool.size(); ++n) {
    double e = 0.0;
    for (std::uint32_t mask = 0; mask < 16u; ++mask) {
      double w = 1.0;
      std::vector<Label> t(4);
      for (std::size_t k = 0; k < 4; ++k) {
        t[k] = (mask >> k) & 1u;
        w *= t[k] ? post.p[n * 4 + k] : 1.0 - post.p[n * 4 + k];
      }
      const auto [f, g] = micro_fg(data.pool.pred_row(n), t);
      e += w * (f - fref * g) * (f - fref * g);
    }
    EXPECT_NEAR(dev.h[n] * dev.h[n], e, 1e-12 * std::max(1.0, e));
  }
}

TEST(MicroPayoffs, FullCensusIsExact) {
  const auto data = synthetic(30, 3, 5);
  const MicroPayoffs pay(data.pool, data.labels);
  const BernoulliPlan plan{std::vector<double>(30, 1.0), 30.0, {}};
  const BSDraw d = draw_bs(plan, 1);
  EXPECT_EQ(estimate_bs(d, plan, pay).value, exact_micro(data.pool, data.labels));
}

TEST(MacroF1, Examples) {
  const MacroCounts k{{2, 1}, {1, 0}, {0, 1}};
  EXPECT_NEAR(macro_f1(k), 15.0 / 19.0, 1e-15);
  const MacroCounts perfect{{3, 1}, {0, 0}, {0, 0}};
  EXPECT_DOUBLE_EQ(macro_f1(perfect), 1.0);
  // P = R by construction.
  const MacroCounts sym{{2, 1}, {1, 3}, {1, 3}};
  const double p = 0.5 * (2.0 / 3.0 + 1.0 / 4.0);
  EXPECT_NEAR(macro_f1(sym), p, 1e-15);
}

TEST(MacroF1, PermutationInvariant) {
  const MacroCounts k{{0.2, 0.1, 0.05}, {0.03, 0.2, 0.01}, {0.05, 0.02, 0.1}};
  const MacroCounts perm{{0.05, 0.2, 0.1}, {0.01, 0.03, 0.2}, {0.1, 0.05, 0.02}};
  EXPECT_NEAR(macro_f1(k), macro_f1(perm), 1e-15);
}

TEST(MacroF1, DegenerateClass) {
  const MacroCounts k{{1, 0}, {1, 0}, {0, 0}};
  const MacroValue v = macro_f1_value(k);
  EXPECT_EQ(v.degenerate_classes, 1u);
  EXPECT_THROW(macro_f1(MacroCounts{{0}, {1}, {1}}), DegenerateMetric);
}

TEST(MacroGradient, MatchesFiniteDifferences) {
  const Stream s(31);
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    const Stream t = s.substream(trial);
    const std::size_t c = 1 + static_cast<std::size_t>(t.uniform(0) * 5);
    MacroCounts k{std::vector<double>(c), std::vector<double>(c), std::vector<double>(c)};
    for (std::size_t i = 0; i < c; ++i) {
      k.a[i] = 0.05 + t.uniform(1 + 3 * i);
      k.b[i] = 0.05 + t.uniform(2 + 3 * i);
      k.c[i] = 0.05 + t.uniform(3 + 3 * i);
    }
    const MacroGradient g = macro_gradient(k);
    const double step = 1e-6;
    auto fd = [&](std::vector<double> MacroCounts::*field, std::size_t i) {
      MacroCounts up = k, down = k;
      (up.*field)[i] += step;
      (down.*field)[i] -= step;
      return (macro_f1(up) - macro_f1(down)) / (2 * step);
    };
    for (std::size_t i = 0; i < c; ++i) {
      EXPECT_NEAR(g.da[i], fd(&MacroCounts::a, i), 1e-5 * std::abs(g.da[i]) + 1e-9);
      EXPECT_NEAR(g.db[i], fd(&MacroCounts::b, i), 1e-5 * std::abs(g.db[i]) + 1e-9);
      EXPECT_NEAR(g.dc[i], fd(&MacroCounts::c, i), 1e-5 * std::abs(g.dc[i]) + 1e-9);
    }
  }
}

TEST(MacroDeviation, AllNegativePredictionsOnlyUseRecallGradient) {
  const MultiLabelPool pool(2, {0.9, 0.8, 0.2, 0.1, 0.7, 0.3});
  const auto post = blend_posterior(pool, 0.9);
  const auto dev = macro_deviation(pool, post);
  const MacroGradient grad = macro_gradient(expected_macro_counts(pool, post));
  // Point 1 predicts neither class.
  const double expect = post.p[2] * grad.dc[0] * grad.dc[0] + post.p[3] * grad.dc[1] * grad.dc[1];
  EXPECT_NEAR(dev.h[1] * dev.h[1], expect, 1e-15);
}

TEST(MacroCountsBS, FullCensusAndEmptySelection) {
  const auto data = synthetic(25, 3, 9);
  const BernoulliPlan all{std::vector<double>(25, 1.0), 25.0, {}};
  const MacroCounts k = macro_counts_bs(data.pool, draw_bs(all, 1), all, data.labels);
  const MacroCounts exact = exact_macro_counts(data.pool, data.labels);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(k.a[i], exact.a[i]);
    EXPECT_DOUBLE_EQ(k.b[i], exact.b[i]);
    EXPECT_DOUBLE_EQ(k.c[i], exact.c[i]);
  }
  const BSDraw none{std::vector<std::uint8_t>(25, 0), 0};
  const MacroCounts z = macro_counts_bs(data.pool, none, all, data.labels);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(z.a[i] + z.b[i] + z.c[i], 0.0);
  EXPECT_THROW(estimate_macro_bs(data.pool, none, all, data.labels, 0.9), DegenerateEstimate);
}

TEST(MacroCountsBS, MatchesHandEvaluation) {
  const MultiLabelPool pool(2, {0.9, 0.2, 0.6, 0.7, 0.1, 0.8});
  const LabelMatrix labels{2, {1, 1, 0, 1, 0, 0}};
  const BernoulliPlan plan{{0.5, 0.25, 1.0}, 1.75, {}};
  const BSDraw d{{1, 1, 0}, 0};
  const MacroCounts k = macro_counts_bs(pool, d, plan, labels);
  // point 0: class 0 TP, class 1 FN; point 1: class 0 FP, class 1 TP
  EXPECT_DOUBLE_EQ(k.a[0], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(k.c[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(k.b[0], 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(k.a[1], 4.0 / 3.0);
  EXPECT_DOUBLE_EQ(k.c[0], 0.0);
  EXPECT_DOUBLE_EQ(k.b[1], 0.0);
}

TEST(EstimateMacroBS, FullCensus) {
  const auto data = synthetic(40, 3, 4);
  const BernoulliPlan all{std::vector<double>(40, 1.0), 40.0, {}};
  const EstimateReport r = estimate_macro_bs(data.pool, draw_bs(all, 2), all, data.labels, 0.9, 1e-6);
  EXPECT_DOUBLE_EQ(r.estimate, macro_f1(exact_macro_counts(data.pool, data.labels)));
  EXPECT_NEAR(r.variance, 40 * 1e-6 / (40.0 * 40.0), 1e-18);
}

TEST(EstimateMacroBS, SingleClassMatchesBinaryPipeline) {
  const auto data = synthetic(120, 1, 8);
  const std::vector<double> probs(data.pool.probs().begin(), data.pool.probs().end());
  const PredictionPool bin(probs, 0.5);
  const BernoulliPlan plan{std::vector<double>(120, 0.4), 48.0, {}};
  const BSDraw d = draw_bs(plan, 6);
  const EstimateReport m = estimate_macro_bs(data.pool, d, plan, data.labels, 0.9);
  const RatioEstimate b = estimate_bs(d, data.labels.values, plan, bin, MetricSpec::f1());
  EXPECT_NEAR(m.estimate, b.value, 1e-14);
}

TEST(EstimateMacroBS, VarianceMatchesMonteCarlo) {
  const auto data = synthetic(200, 3, 77);
  const auto dev = macro_deviation(data.pool, blend_posterior(data.pool, 0.9));
  const BernoulliPlan plan{optimal_bernoulli(dev.h, 100), 100, {}};
  std::vector<double> est;
  double mean_var = 0.0;
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const EstimateReport rep = estimate_macro_bs(data.pool, draw_bs(plan, r), plan, data.labels, 0.9);
    est.push_back(rep.estimate);
    mean_var += rep.variance;
  }
  mean_var /= static_cast<double>(est.size());
  const double mc = oracle::sample_variance(est);
  EXPECT_NEAR(mean_var, mc, 0.2 * mc);
}

TEST(EstimateMacroIS, UniformFullSupportIsConsistent) {
  const auto data = synthetic(60, 2, 12);
  const ImportancePlan plan{std::vector<double>(60, 1.0 / 60), 20000, {}};
  const EstimateReport r = estimate_macro_is(data.pool, draw_is(plan, 3), plan, data.labels, 0.9);
  const double truth = macro_f1(exact_macro_counts(data.pool, data.labels));
  EXPECT_NEAR(r.estimate, truth, 5 * std::sqrt(r.variance) + 1e-3);
}
