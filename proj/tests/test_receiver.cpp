#include <gtest/gtest.h>

#include <limits>

#include "tcplr/receiver.hpp"

using namespace tcplr;

namespace {
constexpr std::int64_t S = 1515;
constexpr double kInf = std::numeric_limits<double>::infinity();

Packet data(std::int64_t idx, std::uint64_t id = 0) {
  Packet p;
  p.id = id ? id : static_cast<std::uint64_t>(idx + 1);
  p.seq_start = idx * S;
  p.seq_end = (idx + 1) * S;
  return p;
}
}  // namespace

TEST(Receiver, HoleThenRetransmissionFillsIt) {
  Receiver r(165, S, kInf);
  std::size_t last_sack_bytes = 0;
  for (std::int64_t i = 1; i <= 9; ++i) {
    const auto res = r.on_data(data(i), 0.001 * i);
    EXPECT_EQ(res.ack.cum_ack, 0);
    ASSERT_FALSE(res.ack.sack_blocks.empty());
    const auto& b = res.ack.sack_blocks.front();
    EXPECT_EQ(b.start, S);
    EXPECT_EQ(b.end, (i + 1) * S);
    EXPECT_GT(static_cast<std::size_t>(b.end - b.start), last_sack_bytes);
    last_sack_bytes = static_cast<std::size_t>(b.end - b.start);
  }
  const auto res = r.on_data(data(0), 0.02);
  EXPECT_EQ(res.ack.cum_ack, 10 * S);
  EXPECT_TRUE(res.ack.sack_blocks.empty());
  EXPECT_TRUE(r.stream_intact());
}

TEST(Receiver, AckEchoesTriggeringPacket) {
  Receiver r(165, S, kInf);
  Packet p = data(0, 77);
  p.sent_at = 1.25;
  const auto res = r.on_data(p, 1.3);
  EXPECT_EQ(res.ack.echo_id, 77u);
  EXPECT_DOUBLE_EQ(res.ack.ts_echo, 1.25);
}

TEST(Receiver, AtMostThreeSackBlocksNewestFirst) {
  Receiver r(165, S, kInf);
  for (std::int64_t i : {2, 4, 6, 8}) (void)r.on_data(data(i), 0);
  const auto res = r.on_data(data(10), 0);
  ASSERT_EQ(res.ack.sack_blocks.size(), 3u);
  EXPECT_EQ(res.ack.sack_blocks[0].start, 10 * S);
  EXPECT_EQ(res.ack.sack_blocks[1].start, 8 * S);
  EXPECT_EQ(res.ack.sack_blocks[2].start, 6 * S);
}

TEST(Receiver, BeyondWindowAcceptedWhenBufferFree) {
  Receiver r(10, S, kInf);
  for (std::int64_t i = 0; i < 10; ++i) (void)r.on_data(data(i), 0);
  EXPECT_EQ(r.awnd_bytes(), 10 * S);  // drained instantly
  (void)r.on_data(data(11), 0);       // hole at 10
  const auto res = r.on_data(data(21), 0);  // past rcv_nxt + window
  EXPECT_FALSE(res.discarded);
  EXPECT_EQ(r.stats().out_of_window_accepted, 1u);
}

TEST(Receiver, BeyondWindowDiscardedWhenBufferFull) {
  Receiver r(4, S, 0.0);
  for (std::int64_t i = 0; i < 4; ++i) (void)r.on_data(data(i), 0);
  EXPECT_EQ(r.awnd_bytes(), 0);
  const auto res = r.on_data(data(5), 0.1);
  EXPECT_TRUE(res.discarded);
  EXPECT_EQ(res.ack.cum_ack, 4 * S);
  EXPECT_TRUE(res.ack.sack_blocks.empty());
  EXPECT_EQ(r.stats().dupacks_without_new_sack, 1u);
}

TEST(Receiver, DuplicateDoesNotCarryNewSack) {
  Receiver r(165, S, kInf);
  (void)r.on_data(data(3), 0);
  const auto res = r.on_data(data(3), 0);
  EXPECT_FALSE(res.ack.new_sack);
  EXPECT_EQ(r.stats().duplicates, 1u);
}

TEST(ReceiverDrain, UnlimitedSnapsWindowBack) {
  Receiver r(165, S, kInf);
  for (std::int64_t i = 0; i < 50; ++i) (void)r.on_data(data(i), 0);
  EXPECT_EQ(r.awnd_bytes(), 165 * S);
}

TEST(ReceiverDrain, ZeroDrainShrinksWindowMonotonically) {
  Receiver r(165, S, 0.0);
  std::int64_t prev = r.awnd_bytes();
  for (std::int64_t i = 0; i < 50; ++i) {
    const auto res = r.on_data(data(i), 0.01 * i);
    EXPECT_LE(res.ack.awnd_bytes, prev);
    prev = res.ack.awnd_bytes;
  }
  EXPECT_EQ(prev, 115 * S);
}

TEST(ReceiverDrain, FiniteRateFreesBytes) {
  Receiver r(165, S, 1515.0 * 100);  // 100 packets per second
  for (std::int64_t i = 0; i < 20; ++i) (void)r.on_data(data(i), 0);
  EXPECT_NEAR(r.app_drain(0.1), 10.0 * S, 1e-6);
}

TEST(Receiver, RejectsZeroCapacity) { EXPECT_THROW(Receiver(0, S, kInf), ConfigError); }
