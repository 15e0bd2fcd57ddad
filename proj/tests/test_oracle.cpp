#include <gtest/gtest.h>

#include <sstream>

#include "tcplr/analytic.hpp"
#include "tcplr/oracle.hpp"

using namespace tcplr;

TEST(Oracle, StandardMatchesClosedForm) {
  LinkParams p;
  const double svc = service_time(p);
  EXPECT_NEAR(oracle::oracle_imin(RecoveryAlgo::Standard, false, p, 10, 0.7), 0.094546, svc);
}

TEST(Oracle, ZeroDelayNoIdle) {
  LinkParams p;
  p.rtt_prop_s = 0;
  p.awnd_pkts = 200;
  p.allow_small_awnd = true;
  EXPECT_NEAR(oracle::oracle_imin(RecoveryAlgo::PRR, false, p, 10, 0.7), 0.0, service_time(p));
}

TEST(Oracle, QueueRegulatedWithOpportunisticRetransmissionNeverIdle) {
  LinkParams p;
  for (std::int64_t n : {5, 10, 50, 100, 160}) {
    EXPECT_NEAR(oracle::oracle_imin(RecoveryAlgo::QARR, true, p, n, 0.7), 0.0, service_time(p)) << n;
    EXPECT_NEAR(oracle::oracle_imin(RecoveryAlgo::BARR, true, p, n, 0.7), 0.0, service_time(p)) << n;
  }
}

TEST(Oracle, AgreesWithClosedFormOnSmallBursts) {
  for (auto algo : {RecoveryAlgo::Standard, RecoveryAlgo::RH, RecoveryAlgo::PRR, RecoveryAlgo::QARR,
                    RecoveryAlgo::BARR}) {
    for (bool o : {false, true}) {
      for (double u : {0.05, 0.1, 0.2}) {
        LinkParams p;
        p.rtt_prop_s = u;
        const double a = analytic::imin(algo, o, p, 10, 0.7).imin_s;
        const double r = oracle::oracle_imin(algo, o, p, 10, 0.7);
        EXPECT_NEAR(a, r, service_time(p)) << to_string(algo) << " or=" << o << " U=" << u;
      }
    }
  }
}

TEST(Oracle, TraceIsOrderedAndBracketsWindow) {
  LinkParams p;
  const auto t = oracle::oracle_trace(RecoveryAlgo::PRR, false, p, 50, 0.7);
  ASSERT_FALSE(t.events.empty());
  for (std::size_t i = 1; i < t.events.size(); ++i) EXPECT_LE(t.events[i - 1].time_s, t.events[i].time_s);
  EXPECT_LT(t.window_start_s, t.window_end_s);
  EXPECT_GE(t.idle_s, 0.0);
  EXPECT_LE(t.idle_s, t.window_end_s - t.window_start_s);
  std::ostringstream os;
  oracle::write_trace_csv(os, t);
  EXPECT_NE(os.str().find("first_new_departed"), std::string::npos);
}

TEST(Oracle, RejectsBurstCoveringWholeWindow) {
  LinkParams p;
  EXPECT_THROW((void)oracle::oracle_imin(RecoveryAlgo::PRR, false, p, 165, 0.7), ConfigError);
}
