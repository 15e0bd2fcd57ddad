#include <gtest/gtest.h>

#include <sstream>

#include "tcplr/analytic.hpp"

using namespace tcplr;
using analytic::imin;

namespace {
LinkParams base() { return LinkParams{}; }
constexpr double kBeta = 0.7;
}  // namespace

TEST(Imin, StandardTenLosses) {
  const auto r = imin(RecoveryAlgo::Standard, false, base(), 10, kBeta);
  EXPECT_NEAR(r.imin_s, 0.094546, 1e-5);
  EXPECT_NEAR(r.eta, 0.060, 1e-3);
}

TEST(Imin, RateHalvingHundredLossesMultiRound) {
  const auto r = imin(RecoveryAlgo::RH, false, base(), 100, kBeta);
  EXPECT_NEAR(r.imin_s, 0.061216, 1e-5);
  EXPECT_NEAR(r.eta, 0.498, 1e-3);
}

TEST(Imin, PrrHundredLosses) {
  const auto r = imin(RecoveryAlgo::PRR, false, base(), 100, kBeta);
  EXPECT_NEAR(r.imin_s, 0.040006, 1e-5);
  EXPECT_NEAR(r.eta, 0.602, 1e-3);
}

TEST(Imin, QueueAndBandwidthRegulatedWithOpportunisticRetransmissionNeverIdle) {
  for (auto algo : {RecoveryAlgo::QARR, RecoveryAlgo::BARR}) {
    for (std::int64_t n : {5, 10, 50, 100, 160}) {
      const auto r = imin(algo, true, base(), n, kBeta);
      EXPECT_EQ(r.imin_s, 0.0);
      EXPECT_EQ(r.eta, 1.0);
    }
  }
}

TEST(Imin, ZeroDelayMeansNoIdle) {
  LinkParams p = base();
  p.rtt_prop_s = 0;
  p.awnd_pkts = 200;
  p.allow_small_awnd = true;
  for (auto algo : {RecoveryAlgo::Standard, RecoveryAlgo::RH, RecoveryAlgo::PRR}) {
    const auto r = imin(algo, false, p, 10, kBeta);
    EXPECT_EQ(r.imin_s, 0.0);
    EXPECT_EQ(r.eta, 1.0);
  }
}

TEST(Imin, RateHalvingWithOpportunisticRetransmissionSmallBurst) {
  const auto r = imin(RecoveryAlgo::RH, true, base(), 10, kBeta);
  EXPECT_NEAR(r.imin_s, 0.1 - 115 / 1650.165, 1e-6);
}

TEST(Imin, OpportunisticRetransmissionNeverIncreasesIdle) {
  for (const auto& g : analytic::property_grid()) {
    if (g.or_enabled) continue;
    const auto p = analytic::params_for(g);
    if (g.n >= awnd(p)) continue;
    const double off = imin(g.algo, false, p, g.n, g.beta).imin_s;
    const double on = imin(g.algo, true, p, g.n, g.beta).imin_s;
    EXPECT_LE(on, off + 1e-12) << to_string(g.algo) << " n=" << g.n << " U=" << g.u_s << " C=" << g.rate_bps;
  }
}

TEST(Imin, PreconditionsRejected) {
  EXPECT_THROW((void)imin(RecoveryAlgo::PRR, false, base(), 0, kBeta), ConfigError);
  EXPECT_THROW((void)imin(RecoveryAlgo::PRR, false, base(), 166, kBeta), ConfigError);
  EXPECT_THROW((void)imin(RecoveryAlgo::PRR, false, base(), 10, 0.0), ConfigError);
}

TEST(Utilization, HandEvaluations) {
  EXPECT_NEAR(analytic::utilization(100, 1650.165, 0.040006), 0.6023, 1e-4);
  EXPECT_NEAR(analytic::utilization(10, 1650.165, 0.094546), 0.0602, 1e-4);
  EXPECT_EQ(analytic::utilization(37, 1650.165, 0), 1.0);
}

TEST(Sweep, DelayRowsForRateHalving) {
  const auto grid = analytic::make_grid({RecoveryAlgo::RH}, {false}, {10}, {0.05, 0.15, 0.2}, {20e6}, {kBeta});
  const auto rows = analytic::sweep(grid);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_NEAR(rows[0].result.eta, 0.120, 2e-3);
  EXPECT_NEAR(rows[1].result.eta, 0.040, 2e-3);
  EXPECT_NEAR(rows[2].result.eta, 0.029, 2e-3);
}

TEST(Sweep, EmptyAndSingleton) {
  EXPECT_TRUE(analytic::sweep({}).empty());
  analytic::GridPoint g;
  g.algo = RecoveryAlgo::PRR;
  g.n = 100;
  const auto rows = analytic::sweep({g});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].result.imin_s, imin(RecoveryAlgo::PRR, false, base(), 100, 0.7).imin_s);
}

TEST(Sweep, InvalidPointBecomesFlaggedRow) {
  analytic::GridPoint g;
  g.n = 500;
  const auto rows = analytic::sweep({g});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_FALSE(rows[0].error.empty());
}

TEST(GridFile, CartesianProduct) {
  std::istringstream in("algo = rh, prr\nor = off,on\nn = 10, 50, 100\n# comment\nU_ms = 100\n");
  const auto g = analytic::parse_grid(in);
  EXPECT_EQ(g.size(), 12u);
  EXPECT_EQ(g.front().algo, RecoveryAlgo::RH);
  EXPECT_DOUBLE_EQ(g.front().u_s, 0.1);
}

TEST(GridFile, UnknownKeyRejected) {
  std::istringstream in("colour = blue\n");
  EXPECT_THROW((void)analytic::parse_grid(in), ConfigError);
}

TEST(GridFile, PropertyGridSize) { EXPECT_EQ(analytic::property_grid().size(), 5u * 2 * 7 * 4 * 2 * 4); }
