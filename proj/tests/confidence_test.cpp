#include <metricwise/confidence.hpp>

#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include <cmath>

using namespace metricwise;

TEST(BetaFit, Examples) {
  const BetaFit u = beta_fit(0.5, 1.0 / 12.0);
  EXPECT_NEAR(u.alpha, 1.0, 1e-12);
  EXPECT_NEAR(u.beta, 1.0, 1e-12);
  for (double v : {1e-6, 1e-3, 0.01, 0.2}) {
    const BetaFit f = beta_fit(0.5, v);
    EXPECT_DOUBLE_EQ(f.alpha, f.beta);
  }
  const BetaFit d = beta_fit(0.5, 0.25);
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.alpha, 1.0);
  EXPECT_EQ(d.beta, 1.0);
  const BetaFit c = beta_fit(0.7, 0.0);
  EXPECT_TRUE(c.collapsed);
  const BetaFit k = beta_fit(1.0, 1e-4);
  EXPECT_TRUE(k.clamped);
  EXPECT_THROW(beta_fit(std::nan(""), 0.1), ValidationError);
}

TEST(BetaFit, MomentRoundTrip) {
  for (double mu : {1e-4, 0.01, 0.2, 0.5, 0.77, 0.999}) {
    for (double rel : {1e-9, 1e-5, 1e-2, 0.5, 0.99}) {
      const double var = rel * mu * (1 - mu);
      const BetaFit f = beta_fit(mu, var);
      const double nu = f.alpha + f.beta;
      EXPECT_NEAR(f.alpha / nu, mu, 1e-10 * mu);
      EXPECT_NEAR(f.alpha * f.beta / (nu * nu * (nu + 1)), var, 1e-10 * var);
    }
  }
}

TEST(BetaCdf, MatchesBoost) {
  for (double a : {0.3, 1.0, 2.5, 17.0, 450.0, 1e5}) {
    for (double b : {0.7, 1.0, 3.0, 60.0, 2e4}) {
      for (double x : {1e-6, 0.01, 0.2, 0.5, 0.8, 0.97, 0.999999}) {
        const double ref = boost::math::ibeta(a, b, x);
        EXPECT_NEAR(beta_cdf(x, a, b), ref, 1e-12 + 1e-9 * ref) << a << " " << b << " " << x;
      }
    }
  }
  EXPECT_EQ(beta_cdf(0.0, 2, 3), 0.0);
  EXPECT_EQ(beta_cdf(1.0, 2, 3), 1.0);
  EXPECT_THROW(beta_cdf(0.5, 0.0, 1.0), ValidationError);
}

TEST(BetaQuantile, InvertsCdf) {
  for (double mu : {0.05, 0.3, 0.5, 0.9, 0.995}) {
    for (double rel : {1e-7, 1e-4, 1e-2, 0.3}) {
      const BetaFit f = beta_fit(mu, rel * mu * (1 - mu));
      for (double p : {0.005, 0.025, 0.05, 0.25, 0.5, 0.75, 0.95, 0.975, 0.995}) {
        const double q = beta_quantile(f, p);
        const double below = beta_cdf(std::nextafter(q, 0.0), f);
        const double above = beta_cdf(std::nextafter(q, 1.0), f);
        if (above - below > 1e-7) {
          // No double resolves this quantile; q must still straddle p.
          EXPECT_LE(below, p);
          EXPECT_GE(above, p);
          continue;
        }
        EXPECT_NEAR(beta_cdf(q, f), p, 1e-7);
        EXPECT_NEAR(q, boost::math::ibeta_inv(f.alpha, f.beta, p), 1e-9);
      }
    }
  }
}

TEST(BetaQuantile, ResolvesTinyQuantiles) {
  const BetaFit f{0.1, 0.9};
  for (double p : {0.01, 0.1}) {
    const double q = beta_quantile(f, p);
    EXPECT_GT(q, 0.0);
    EXPECT_NEAR(beta_cdf(q, f), p, 1e-9);
    EXPECT_NEAR(q / boost::math::ibeta_inv(0.1, 0.9, p), 1.0, 1e-9);
  }
}

TEST(BetaCdf, ConcentratedMatchesBoost) {
  for (double x : {0.49999, 0.5, 0.500003})
    EXPECT_NEAR(beta_cdf(x, 5e8, 5e8), boost::math::ibeta(5e8, 5e8, x), 1e-10);
}

TEST(BetaQuantile, LargeConcentrationUsesNormalLimit) {
  const BetaFit f = beta_fit(0.6, 1e-14);
  ASSERT_GT(f.alpha + f.beta, kLargeConcentration);
  const double sd = 1e-7;
  EXPECT_NEAR(beta_quantile(f, 0.5), 0.6, 1e-3 * sd);
  EXPECT_NEAR(beta_quantile(f, 0.95), 0.6 + 1.6448536269514722 * sd, 1e-3 * sd);
}

TEST(BetaInterval, Examples) {
  const Interval u = beta_interval(beta_fit(0.5, 1.0 / 12.0), 0.9);
  EXPECT_NEAR(u.lo, 0.05, 1e-10);
  EXPECT_NEAR(u.hi, 0.95, 1e-10);
  for (double v : {1e-5, 1e-3, 0.05}) {
    const Interval s = beta_interval(beta_fit(0.5, v), 0.8);
    EXPECT_NEAR(s.lo + s.hi, 1.0, 1e-6);
  }
  const BetaFit two{2.0, 2.0, 0.5, 0.05};
  const Interval h = beta_interval(two, 0.5);
  EXPECT_NEAR(beta_cdf(h.lo, two), 0.25, 1e-10);
  EXPECT_NEAR(beta_cdf(h.hi, two), 0.75, 1e-10);
  const Interval c = beta_interval(beta_fit(0.42, 0.0), 0.9);
  EXPECT_EQ(c.lo, 0.42);
  EXPECT_EQ(c.hi, 0.42);
  EXPECT_THROW(beta_interval(two, 1.0), ValidationError);
}

TEST(BetaInterval, NestedLevels) {
  const BetaFit f = beta_fit(0.83, 4e-4);
  const Interval a = beta_interval(f, 0.5), b = beta_interval(f, 0.9), c = beta_interval(f, 0.99);
  EXPECT_LT(b.lo, a.lo);
  EXPECT_LT(c.lo, b.lo);
  EXPECT_GT(b.hi, a.hi);
  EXPECT_GT(c.hi, b.hi);
}
