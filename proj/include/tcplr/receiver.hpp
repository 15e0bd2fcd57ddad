#pragma once

// Receiver: reassembly, ACK/SACK generation, advertised window and the
// out-of-window acceptance policy.
//
// Sequence space is packet-granular; wire fields are bytes (index * S).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>

#include "tcplr/core.hpp"

namespace tcplr {

struct ReceiverStats {
  std::uint64_t data_packets = 0;
  std::uint64_t duplicates = 0;
  std::uint64_t out_of_window_accepted = 0;
  std::uint64_t out_of_window_discarded = 0;
  std::uint64_t acks_sent = 0;
  std::uint64_t dupacks_without_new_sack = 0;
  std::int64_t delivered_packets = 0;   // handed to the application in order
  std::int64_t delivered_index_sum = 0;
};

class Receiver {
 public:
  Receiver(std::int64_t capacity_pkts, std::int64_t packet_bytes, double drain_rate_bytes_per_s)
      : capacity_(capacity_pkts), s_(packet_bytes), drain_rate_(drain_rate_bytes_per_s) {
    if (capacity_pkts < 1) throw ConfigError("receiver buffer must hold at least one packet");
    if (!(drain_rate_bytes_per_s >= 0)) throw ConfigError("drain rate must be non-negative");
  }

  struct Result {
    Packet ack;
    bool discarded = false;
  };

  /// Handles one data packet; always produces exactly one ACK.
  Result on_data(const Packet& pkt, double now) {
    app_drain(now - last_drain_t_);
    last_drain_t_ = now;
    ++stats_.data_packets;

    const std::int64_t idx = pkt.seq_start / s_;
    Result r;
    bool new_data = false;

    if (idx < rcv_nxt_ || contains(idx)) {
      ++stats_.duplicates;
    } else {
      const std::int64_t right_edge = rcv_nxt_ + free_window_pkts();
      const bool beyond = idx >= right_edge;
      if (beyond && !has_free_buffer()) {
        ++stats_.out_of_window_discarded;
        r.discarded = true;
      } else {
        if (beyond) ++stats_.out_of_window_accepted;
        insert(idx);
        new_data = true;
      }
    }

    r.ack = make_ack(pkt.sent_at);
    r.ack.echo_id = pkt.id;
    r.ack.new_sack = new_data && rcv_nxt_ <= idx;  // hint only
    ++stats_.acks_sent;
    if (r.discarded || (!new_data && r.ack.cum_ack == last_cum_sent_)) ++stats_.dupacks_without_new_sack;
    last_cum_sent_ = r.ack.cum_ack;
    return r;
  }

  /// Application consumption over dt seconds; returns bytes freed.
  double app_drain(double dt) {
    if (dt < 0) dt = 0;
    if (unread_bytes_ <= 0) return 0;
    double freed = 0;
    if (std::isinf(drain_rate_)) {
      freed = unread_bytes_;
    } else {
      freed = std::min(unread_bytes_, drain_rate_ * dt);
    }
    unread_bytes_ -= freed;
    return freed;
  }

  [[nodiscard]] std::int64_t awnd_bytes() const {
    return std::max<std::int64_t>(0, capacity_ * s_ - static_cast<std::int64_t>(std::ceil(unread_bytes_ - 1e-6)));
  }
  [[nodiscard]] std::int64_t rcv_nxt() const { return rcv_nxt_; }
  [[nodiscard]] std::int64_t ooo_packets() const { return ooo_count_; }
  [[nodiscard]] const ReceiverStats& stats() const { return stats_; }
  [[nodiscard]] const std::map<std::int64_t, std::int64_t>& ooo_ranges() const { return ooo_; }

  /// Stream integrity: every packet below rcv_nxt delivered exactly once, in order.
  [[nodiscard]] bool stream_intact() const {
    const std::int64_t n = rcv_nxt_;
    return stats_.delivered_packets == n && stats_.delivered_index_sum == n * (n - 1) / 2;
  }

 private:
  [[nodiscard]] std::int64_t free_window_pkts() const { return awnd_bytes() / s_; }

  [[nodiscard]] bool has_free_buffer() const {
    const double used = unread_bytes_ + static_cast<double>(ooo_count_ * s_);
    return static_cast<double>(capacity_ * s_) - used >= static_cast<double>(s_) - 1e-6;
  }

  [[nodiscard]] bool contains(std::int64_t idx) const {
    auto it = ooo_.upper_bound(idx);
    if (it == ooo_.begin()) return false;
    --it;
    return idx < it->second;
  }

  void insert(std::int64_t idx) {
    if (idx == rcv_nxt_) {
      deliver(idx);
      ++rcv_nxt_;
      while (!ooo_.empty() && ooo_.begin()->first == rcv_nxt_) {
        const auto [a, b] = *ooo_.begin();
        ooo_.erase(ooo_.begin());
        for (std::int64_t i = a; i < b; ++i) deliver(i);
        ooo_count_ -= b - a;
        rcv_nxt_ = b;
      }
      std::erase_if(recent_, [&](std::int64_t v) { return v < rcv_nxt_; });
      return;
    }
    // Out of order: merge into the range map.
    std::int64_t a = idx;
    std::int64_t b = idx + 1;
    auto next = ooo_.find(b);
    if (next != ooo_.end()) {
      b = next->second;
      ooo_.erase(next);
    }
    auto it = ooo_.lower_bound(a);
    if (it != ooo_.begin()) {
      auto prev = std::prev(it);
      if (prev->second == a) {
        a = prev->first;
        ooo_.erase(prev);
      }
    }
    ooo_[a] = b;
    ++ooo_count_;
    std::erase(recent_, idx);
    recent_.push_front(idx);
    if (recent_.size() > 16) recent_.pop_back();
  }

  void deliver(std::int64_t idx) {
    ++stats_.delivered_packets;
    stats_.delivered_index_sum += idx;
    unread_bytes_ += static_cast<double>(s_);
    if (std::isinf(drain_rate_)) unread_bytes_ = 0;
  }

  // SACK blocks ordered newest first, at most three, one per distinct range.
  [[nodiscard]] Packet make_ack(double ts_echo) const {
    Packet a;
    a.kind = Packet::Kind::Ack;
    a.cum_ack = rcv_nxt_ * s_;
    a.awnd_bytes = awnd_bytes();
    a.ts_echo = ts_echo;
    for (const std::int64_t v : recent_) {
      if (a.sack_blocks.size() == 3) break;
      auto it = ooo_.upper_bound(v);
      if (it == ooo_.begin()) continue;
      --it;
      if (v >= it->second) continue;
      const ByteRange r{it->first * s_, it->second * s_};
      if (std::find(a.sack_blocks.begin(), a.sack_blocks.end(), r) == a.sack_blocks.end()) a.sack_blocks.push_back(r);
    }
    return a;
  }

  std::int64_t capacity_;
  std::int64_t s_;
  double drain_rate_;
  double last_drain_t_ = 0;
  double unread_bytes_ = 0;
  std::int64_t rcv_nxt_ = 0;
  std::map<std::int64_t, std::int64_t> ooo_;
  std::int64_t ooo_count_ = 0;
  std::deque<std::int64_t> recent_;
  std::int64_t last_cum_sent_ = -1;
  ReceiverStats stats_;
};

}  // namespace tcplr
