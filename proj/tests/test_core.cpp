#include <gtest/gtest.h>

#include "tcplr/core.hpp"

using namespace tcplr;

TEST(LinkRate, TwentyMbpsInPackets) {
  LinkParams p;
  EXPECT_NEAR(rate_pkts(p), 1650.165, 1e-3);
}

TEST(LinkRate, HundredMbpsInPackets) {
  LinkParams p;
  p.rate_bps = 100e6;
  EXPECT_NEAR(rate_pkts(p), 8250.825, 1e-3);
}

TEST(LinkRate, ZeroRateRejected) {
  LinkParams p;
  p.rate_bps = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(AdvertisedWindow, AutoIsFlooredBdp) {
  LinkParams p;
  EXPECT_EQ(awnd_auto(p), 165);
  p.rate_bps = 100e6;
  EXPECT_EQ(awnd_auto(p), 825);
  p.rtt_prop_s = 0.2;
  EXPECT_EQ(awnd_auto(p), 1650);
}

TEST(AdvertisedWindow, ZeroDelayGivesZeroAndIsRejected) {
  LinkParams p;
  p.rtt_prop_s = 0;
  EXPECT_EQ(awnd_auto(p), 0);
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(AdvertisedWindow, ExplicitValueBelowBdpNeedsOptIn) {
  LinkParams p;
  p.awnd_pkts = 100;
  EXPECT_THROW(p.validate(), ConfigError);
  p.allow_small_awnd = true;
  EXPECT_NO_THROW(p.validate());
  EXPECT_EQ(awnd(p), 100);
}

TEST(ServiceTime, OnePacketAtTwentyMbps) {
  LinkParams p;
  EXPECT_NEAR(service_time(p), 0.000606, 1e-6);
}

TEST(Parsing, AlgorithmAndVariantNames) {
  EXPECT_EQ(parse_algo("qarr"), RecoveryAlgo::QARR);
  EXPECT_EQ(parse_algo("PRR"), RecoveryAlgo::PRR);
  EXPECT_EQ(parse_variant("westwood"), Variant::Westwood);
  EXPECT_THROW((void)parse_algo("bogus"), ConfigError);
}

TEST(Variants, LossResponseFactors) {
  EXPECT_DOUBLE_EQ(VariantParams::of(Variant::CUBIC).beta, 0.7);
  EXPECT_DOUBLE_EQ(VariantParams::of(Variant::Reno).beta, 0.5);
  EXPECT_EQ(VariantParams::of(Variant::Veno).ssthresh_rule, SsthreshRule::VenoConditional);
  EXPECT_EQ(VariantParams::of(Variant::Westwood).ssthresh_rule, SsthreshRule::WestwoodBdp);
}

TEST(SackBlocks, NormalizeMergesAndSorts) {
  std::vector<ByteRange> in{{30, 40}, {0, 10}, {5, 20}, {40, 45}};
  const auto out = normalize_sack(in, 3);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (ByteRange{3, 20}));
  EXPECT_EQ(out[1], (ByteRange{30, 45}));
  EXPECT_TRUE(normalize_sack({{0, 10}}, 10).empty());
}

TEST(LossModel, RejectsBadRate) {
  EXPECT_THROW(LossModel::random(1.0).validate(), ConfigError);
  EXPECT_THROW(LossModel::random(-0.1).validate(), ConfigError);
  EXPECT_NO_THROW(LossModel::random(0.005).validate());
}
