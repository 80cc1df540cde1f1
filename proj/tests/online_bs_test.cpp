#include <metricwise/online_bs.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace metricwise;

namespace {
const std::vector<double> kF{0.5, 2.0, 1.0, 3.0, 0.25};
}

TEST(Online, FullWeightsAreExact) {
  OnlineState s(kF.size());
  const std::vector<double> ones(kF.size(), 1.0);
  const OnlineRound r = s.round(ones, 1, [](std::size_t n) { return kF[n]; });
  EXPECT_EQ(r.drawn.size(), kF.size());
  EXPECT_DOUBLE_EQ(r.partial_estimate, 6.75);
  EXPECT_DOUBLE_EQ(s.estimate(), 6.75);
  EXPECT_EQ(s.remaining(), 0u);
  // A round on the empty remainder draws nothing but still counts.
  const OnlineRound none = s.round(std::vector<double>(kF.size(), 0.0), 2,
                                   [](std::size_t) -> double { throw std::logic_error("called"); });
  EXPECT_EQ(none.round, 2u);
  EXPECT_TRUE(none.drawn.empty());
  EXPECT_DOUBLE_EQ(none.prior_sum, 6.75);
  EXPECT_EQ(s.rounds(), 2u);
  EXPECT_DOUBLE_EQ(s.estimate(), 6.75);
}

TEST(Online, ExhaustedFirstRoundStaysUnbiased) {
  // Round 1 labels everything with probability 0.7^3.
  const std::vector<double> f{1.0, 2.0, 4.0};
  const int runs = 100000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < runs; ++r) {
    OnlineState s(f.size());
    s.round(std::vector<double>(3, 0.7), r, [&](std::size_t n) { return f[n]; });
    std::vector<double> w(3);
    for (std::size_t n = 0; n < 3; ++n) w[n] = s.sampled(n) ? 0.0 : 0.5;
    s.round(w, r, [&](std::size_t n) { return f[n]; });
    const double e = s.estimate();
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / runs, se = std::sqrt((sum2 / runs - mean * mean) / runs);
  EXPECT_NEAR(mean, 7.0, 4 * se);
}

TEST(Online, SingleRoundIsHorvitzThompson) {
  OnlineState s(kF.size());
  const std::vector<double> w{0.5, 0.25, 1.0, 0.8, 0.1};
  const OnlineRound r = s.round(w, 42, [](std::size_t n) { return kF[n]; });
  double ht = 0;
  for (std::size_t n : r.drawn) ht += kF[n] / w[n];
  EXPECT_DOUBLE_EQ(s.estimate(), ht);
  EXPECT_EQ(r.prior_sum, 0.0);
  EXPECT_EQ(r.weights_digest, weights_digest(w));
}

TEST(Online, TwoRoundsMatchHandEvaluation) {
  const std::vector<double> f{1.0, 2.0, 4.0};
  OnlineState s(3);
  const OnlineRound r1 = s.round(std::vector<double>{1.0, 0.5, 0.5}, 7,
                                 [&](std::size_t n) { return f[n]; });
  std::vector<double> w2(3);
  for (std::size_t n = 0; n < 3; ++n) w2[n] = s.sampled(n) ? 0.0 : 1.0;
  const OnlineRound r2 = s.round(w2, 7, [&](std::size_t n) { return f[n]; });
  double f1 = 0, prior = 0;
  for (std::size_t n : r1.drawn) f1 += f[n] / (n == 0 ? 1.0 : 0.5);
  for (std::size_t n : r1.drawn) prior += f[n];
  double f2 = 0;
  for (std::size_t n : r2.drawn) f2 += f[n];
  EXPECT_DOUBLE_EQ(r1.partial_estimate, f1);
  EXPECT_DOUBLE_EQ(r2.prior_sum, prior);
  EXPECT_DOUBLE_EQ(r2.partial_estimate, f2);
  EXPECT_DOUBLE_EQ(s.estimate(), 0.5 * (f1 + prior + f2));
  // After a full second round the second term is the exact total.
  EXPECT_DOUBLE_EQ(prior + f2, 7.0);
}

TEST(Online, RejectsInvalidWeights) {
  OnlineState s(3);
  EXPECT_THROW(s.round(std::vector<double>{0.5, 0.5}, 1, [](std::size_t) { return 1.0; }),
               InvalidWeights);
  EXPECT_THROW(s.round(std::vector<double>{0.5, 0.0, 0.5}, 1, [](std::size_t) { return 1.0; }),
               InvalidWeights);
  EXPECT_THROW(s.round(std::vector<double>{0.5, 1.5, 0.5}, 1, [](std::size_t) { return 1.0; }),
               InvalidWeights);
  s.round(std::vector<double>{1.0, 1e-9, 1e-9}, 1, [](std::size_t) { return 1.0; });
  ASSERT_TRUE(s.sampled(0));
  EXPECT_THROW(s.round(std::vector<double>{0.5, 0.5, 0.5}, 2, [](std::size_t) { return 1.0; }),
               InvalidWeights);
  EXPECT_THROW(OnlineState(0), ValidationError);
  EXPECT_THROW(OnlineState(2).estimate(), DegenerateEstimate);
}

TEST(Online, Deterministic) {
  auto run = [] {
    OnlineState s(kF.size());
    s.round(std::vector<double>(kF.size(), 0.4), 99, [](std::size_t n) { return kF[n]; });
    return s.estimate();
  };
  EXPECT_EQ(run(), run());
}

// Round 2 weights depend on the labels seen in round 1; the combined
// estimator should still be unbiased for sum f.
TEST(Online, AdaptiveTwoRoundUnbiased) {
  const double total = 6.75;
  const int runs = 100000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < runs; ++r) {
    OnlineState s(kF.size());
    s.round(std::vector<double>{0.3, 0.3, 0.3, 0.3, 0.3}, r, [](std::size_t n) { return kF[n]; });
    double seen = 0;
    for (std::size_t n = 0; n < kF.size(); ++n) seen += s.sampled(n) ? s.f(n) : 0.0;
    std::vector<double> w(kF.size());
    for (std::size_t n = 0; n < kF.size(); ++n)
      w[n] = s.sampled(n) ? 0.0 : (seen > 2.0 ? 0.2 : 0.9);
    s.round(w, r, [](std::size_t n) { return kF[n]; });
    const double e = s.estimate();
    sum += e;
    sum2 += e * e;
  }
  const double mean = sum / runs, se = std::sqrt((sum2 / runs - mean * mean) / runs);
  EXPECT_NEAR(mean, total, 4 * se);
}
