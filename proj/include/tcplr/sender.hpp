#pragma once

// Sender model: SACK scoreboard, send buffer, transmission selection,
// opportunistic retransmission, head-of-line retransmit on stale DUPACKs, RTO.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <set>
#include <unordered_map>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "tcplr/core.hpp"
#include "tcplr/netem.hpp"
#include "tcplr/recovery.hpp"

namespace tcplr {

// ---------------------------------------------------------------------------
// Scoreboard

/// Per-packet state between snd_una and snd_nxt. Packet-granular.
///
/// pipe counts a packet when it is neither SACKed nor marked lost, plus every
/// outstanding retransmission. Before any loss marking this equals
/// FlightSize - SACKed.
class Scoreboard {
 public:
  static constexpr std::uint8_t kSacked = 1;
  static constexpr std::uint8_t kLost = 2;
  static constexpr std::uint8_t kRetrans = 4;
  static constexpr std::uint8_t kDiscarded = 8;  // reached the receiver but was dropped for lack of buffer

  struct Ingest {
    std::int64_t newly_acked = 0;   // cumulative advance, packets
    std::int64_t newly_sacked = 0;  // packets newly SACKed above snd_una
    bool new_sack = false;
    std::int64_t n1 = 0;
    std::int64_t n2 = 0;
    std::int64_t pipe = 0;
  };

  [[nodiscard]] std::int64_t snd_una() const { return una_; }
  [[nodiscard]] std::int64_t snd_nxt() const { return una_ + static_cast<std::int64_t>(flags_.size()); }
  [[nodiscard]] std::int64_t flight_size() const { return static_cast<std::int64_t>(flags_.size()); }
  [[nodiscard]] std::int64_t pipe() const { return pipe_; }
  [[nodiscard]] std::int64_t sacked_count() const { return sacked_count_; }
  [[nodiscard]] std::int64_t highest_sacked_end() const { return std::max(high_sack_end_, una_); }
  [[nodiscard]] std::int64_t holes() const { return std::max<std::int64_t>(0, highest_sacked_end() - una_ - sacked_count_); }

  [[nodiscard]] std::uint8_t flags(std::int64_t idx) const {
    if (idx < una_ || idx >= snd_nxt()) return 0;
    return flags_[static_cast<std::size_t>(idx - una_)];
  }

  /// Records the first transmission of packet snd_nxt.
  void on_send_new() {
    flags_.push_back(0);
    rmark_.push_back(-1);
    ++pipe_;
  }

  /// Records a retransmission of a packet already in the window.
  void on_retransmit(std::int64_t idx) {
    auto f = flags(idx);
    if (f & kDiscarded) discarded_.erase(idx);
    set(idx, static_cast<std::uint8_t>((f & ~kDiscarded) | kRetrans));
    rmark_[static_cast<std::size_t>(idx - una_)] = snd_nxt();
    retx_q_.emplace_back(snd_nxt(), idx);
  }

  /// A retransmission is lost once anything sent after it has been SACKed: the
  /// path is FIFO, so it would have arrived first. Returns how many were re-marked.
  std::int64_t detect_lost_retransmits() {
    std::int64_t n = 0;
    const auto hs = high_sack_end_;
    while (!retx_q_.empty() && retx_q_.front().first < hs) {
      const auto [mark, idx] = retx_q_.front();
      retx_q_.pop_front();
      if (idx < una_ || idx >= snd_nxt()) continue;
      const auto f = flags(idx);
      if (!(f & kRetrans) || (f & kSacked) || rmark_[static_cast<std::size_t>(idx - una_)] != mark) continue;
      set(idx, static_cast<std::uint8_t>((f & ~kRetrans) | kLost));
      retx_cursor_ = std::min(retx_cursor_, idx);
      lost_mark_ = std::max(lost_mark_, idx + 1);
      ++n;
    }
    return n;
  }

  /// The receiver threw this packet away; it leaves pipe and waits to be resent.
  bool mark_discarded(std::int64_t idx) {
    const auto f = flags(idx);
    if (idx < una_ || idx >= snd_nxt() || (f & (kSacked | kDiscarded))) return false;
    set(idx, static_cast<std::uint8_t>(kLost | kDiscarded));
    discarded_.insert(idx);
    return true;
  }

  [[nodiscard]] std::size_t discarded_pending() const { return discarded_.size(); }

  /// Merges a cumulative ACK and SACK blocks, both in packets.
  Ingest ingest(std::int64_t cum_ack, const std::vector<ByteRange>& blocks_pkts) {
    Ingest r;
    if (cum_ack > snd_nxt()) throw InvariantViolation("cumulative ACK beyond snd_nxt");
    while (una_ < cum_ack) {
      const auto f = flags_.front();
      if (counted(f)) --pipe_;
      if (f & kSacked) --sacked_count_;
      flags_.pop_front();
      rmark_.pop_front();
      ++una_;
      ++r.newly_acked;
    }
    while (!sacked_.empty() && sacked_.begin()->second <= una_) sacked_.erase(sacked_.begin());
    if (!sacked_.empty() && sacked_.begin()->first < una_) {
      const auto end = sacked_.begin()->second;
      sacked_.erase(sacked_.begin());
      sacked_[una_] = end;
    }
    lost_mark_ = std::max(lost_mark_, una_);
    retx_cursor_ = std::max(retx_cursor_, una_);

    for (const auto& b : blocks_pkts) {
      const std::int64_t a = std::max(b.start, una_);
      const std::int64_t e = std::min(b.end, snd_nxt());
      if (a >= e) continue;
      r.newly_sacked += add_sacked(a, e);
    }
    r.new_sack = r.newly_sacked > 0;
    r.n1 = holes();
    r.n2 = sacked_count_;
    r.pipe = pipe_;
    return r;
  }

  /// Marks every un-SACKed packet below the highest SACKed one as lost.
  std::int64_t mark_lost_holes() {
    std::int64_t marked = 0;
    const auto hi = highest_sacked_end();
    for (std::int64_t i = std::max(lost_mark_, una_); i < hi; ++i) {
      const auto f = flags(i);
      if (!(f & (kSacked | kLost))) {
        set(i, static_cast<std::uint8_t>(f | kLost));
        ++marked;
      }
    }
    lost_mark_ = std::max(lost_mark_, hi);
    return marked;
  }

  /// Timeout: everything un-SACKed is lost and no retransmission is outstanding.
  void mark_all_lost() {
    for (std::int64_t i = una_; i < snd_nxt(); ++i) {
      const auto f = flags(i);
      if (!(f & kSacked)) set(i, kLost);
    }
    discarded_.clear();
    retx_q_.clear();
    lost_mark_ = snd_nxt();
    retx_cursor_ = una_;
  }

  /// Forgets that the head packet was retransmitted so it counts as lost again.
  void reset_head_retransmit() {
    if (flags_.empty()) return;
    const auto f = flags(una_);
    if (f & kSacked) return;
    set(una_, kLost);
    retx_cursor_ = una_;
    lost_mark_ = std::max(lost_mark_, una_ + 1);
  }

  /// First packet marked lost that still needs a retransmission. Holes at or
  /// past `edge` wait (the head is always eligible); discarded packets use the
  /// tighter `discard_edge`, since the receiver would drop them again otherwise.
  [[nodiscard]] std::optional<std::int64_t> next_hole(
      std::int64_t edge = std::numeric_limits<std::int64_t>::max(),
      std::int64_t discard_edge = std::numeric_limits<std::int64_t>::max()) {
    const auto hi = std::min(lost_mark_, snd_nxt());
    std::optional<std::int64_t> hole;
    while (retx_cursor_ < hi) {
      if (retx_cursor_ >= edge && retx_cursor_ != una_) break;
      const auto f = flags(retx_cursor_);
      if ((f & kLost) && !(f & (kRetrans | kSacked | kDiscarded))) {
        hole = retx_cursor_;
        break;
      }
      ++retx_cursor_;
    }
    while (!discarded_.empty()) {
      const auto d = *discarded_.begin();
      if (d < una_ || !(flags(d) & kDiscarded)) {
        discarded_.erase(discarded_.begin());
        continue;
      }
      if ((d < discard_edge || d == una_) && (!hole || d < *hole)) hole = d;
      break;
    }
    return hole;
  }

 private:
  static bool counted(std::uint8_t f) {
    return !(f & (kSacked | kDiscarded)) && (!(f & kLost) || (f & kRetrans));
  }

  void set(std::int64_t idx, std::uint8_t nf) {
    auto& f = flags_[static_cast<std::size_t>(idx - una_)];
    pipe_ += static_cast<std::int64_t>(counted(nf)) - static_cast<std::int64_t>(counted(f));
    if ((nf & kSacked) && !(f & kSacked)) ++sacked_count_;
    f = nf;
  }

  // Adds [a, e) to the SACKed set and returns how many packets were new.
  std::int64_t add_sacked(std::int64_t a, std::int64_t e) {
    std::int64_t added = 0;
    std::int64_t lo = a;
    std::int64_t hi = e;
    auto it = sacked_.upper_bound(a);
    if (it != sacked_.begin()) {
      auto prev = std::prev(it);
      if (prev->second >= a) it = prev;
    }
    std::int64_t cursor = a;
    while (it != sacked_.end() && it->first <= e) {
      for (std::int64_t i = cursor; i < std::min(it->first, e); ++i) mark_sacked(i, added);
      cursor = std::max(cursor, it->second);
      lo = std::min(lo, it->first);
      hi = std::max(hi, it->second);
      it = sacked_.erase(it);
    }
    for (std::int64_t i = cursor; i < e; ++i) mark_sacked(i, added);
    sacked_[lo] = hi;
    high_sack_end_ = std::max(high_sack_end_, hi);
    return added;
  }

  void mark_sacked(std::int64_t i, std::int64_t& added) {
    const auto f = flags(i);
    if (f & kSacked) return;
    set(i, static_cast<std::uint8_t>(f | kSacked));
    ++added;
  }

  std::int64_t una_ = 0;
  std::deque<std::uint8_t> flags_;
  std::map<std::int64_t, std::int64_t> sacked_;
  std::int64_t sacked_count_ = 0;
  std::int64_t high_sack_end_ = 0;
  std::int64_t pipe_ = 0;
  std::int64_t lost_mark_ = 0;
  std::int64_t retx_cursor_ = 0;
  std::set<std::int64_t> discarded_;
  std::deque<std::int64_t> rmark_;  // snd_nxt when each packet was last retransmitted
  std::deque<std::pair<std::int64_t, std::int64_t>> retx_q_;  // (mark, index) in send order
};

// ---------------------------------------------------------------------------
// Send buffer

struct SndBuf {
  double size_bytes = 0;
  double occupied_bytes = 0;
  double grow_factor = 3;
  double max_bytes = 64.0 * 1024 * 1024;
  double app_backlog_bytes = std::numeric_limits<double>::infinity();
  double stall_time_s = 0;

  [[nodiscard]] double free_bytes() const { return std::max(0.0, size_bytes - occupied_bytes); }
};

/// Grows the buffer with the congestion window and refills it from the
/// application once more than a third of it is free. Returns bytes fetched.
inline double sndbuf_tick(SndBuf& buf, double cwnd_bytes) {
  buf.size_bytes = std::min(buf.max_bytes, std::max(buf.size_bytes, buf.grow_factor * cwnd_bytes));
  const double free = buf.free_bytes();
  if (!(free > buf.size_bytes / 3.0 + 1e-9)) return 0;
  const double fetched = std::min(free, buf.app_backlog_bytes);
  buf.occupied_bytes += fetched;
  buf.app_backlog_bytes -= fetched;
  return fetched;
}

/// True when a factor-2 buffer with b_free free packets stalls the application
/// during recovery: (1 - beta) * CW < b_free <= 2 * CW / 3.
[[nodiscard]] inline bool stall_predicate(double b_free_pkts, double cw_pkts, double beta) {
  return b_free_pkts > (1.0 - beta) * cw_pkts && b_free_pkts <= 2.0 * cw_pkts / 3.0 + 1e-9;
}

/// Smallest growth factor that rules out recovery stalls for a given beta.
[[nodiscard]] inline double min_sndbuf_factor(double beta) {
  if (!(beta > 0 && beta <= 1)) throw ConfigError("beta must be in (0,1]");
  return 3.0 * (1.0 + beta) / 2.0;
}

// ---------------------------------------------------------------------------
// Small decision helpers

/// New-data allowance beyond the advertised edge under opportunistic retransmission.
[[nodiscard]] inline std::int64_t or_allowance(bool or_enabled, bool in_recovery, bool holes_pending,
                                               std::int64_t n1, std::int64_t n2) {
  if (!or_enabled || !in_recovery || holes_pending) return 0;
  return n1 + n2;
}

enum class IdleReason { None, CwndLimited, AwndLimited, AppStalled, NoHoles };

struct Transmission {
  enum class Kind { Retransmit, NewData, Idle };
  Kind kind = Kind::Idle;
  std::int64_t seq = -1;  // packet index
  IdleReason reason = IdleReason::None;
};

struct SendView {
  std::int64_t pipe = 0;
  std::int64_t cwnd = 1;
  std::optional<std::int64_t> hole;
  std::int64_t snd_una = 0;
  std::int64_t snd_nxt = 0;
  std::int64_t awnd_pkts = 0;
  std::int64_t or_allow = 0;
  std::int64_t unsent_pkts = 0;
  bool app_finished = false;
};

/// Priority: pending holes, then new data inside the (possibly extended) window.
[[nodiscard]] inline Transmission select_transmission(const SendView& v) {
  if (v.pipe >= v.cwnd) return {Transmission::Kind::Idle, -1, IdleReason::CwndLimited};
  if (v.hole) return {Transmission::Kind::Retransmit, *v.hole, IdleReason::None};
  if (v.snd_nxt >= v.snd_una + v.awnd_pkts + v.or_allow) return {Transmission::Kind::Idle, -1, IdleReason::AwndLimited};
  if (v.unsent_pkts <= 0) {
    return {Transmission::Kind::Idle, -1, v.app_finished ? IdleReason::NoHoles : IdleReason::AppStalled};
  }
  return {Transmission::Kind::NewData, v.snd_nxt, IdleReason::None};
}

struct Hack1State {
  int count = 0;
};

/// Counts DUPACKs that carry no new SACK information while in recovery. When
/// dupthresh of them arrive in a row, asks for the head packet to be resent.
[[nodiscard]] inline std::optional<std::int64_t> hack1_on_dupack(Hack1State& h, bool enabled, bool in_recovery,
                                                                 bool new_sack, int dupthresh, std::int64_t snd_una) {
  if (!enabled || !in_recovery) return std::nullopt;
  if (new_sack) {
    h.count = 0;
    return std::nullopt;
  }
  if (++h.count >= dupthresh) {
    h.count = 0;
    return snd_una;
  }
  return std::nullopt;
}

struct RttTracker {
  double srtt_s = 0;
  double rttvar_s = 0;
  double rto_s = 1.0;
  double base_rtt_s = std::numeric_limits<double>::infinity();
  double min_rto_s = 0.2;
  double max_rto_s = 60;
  int backoff = 0;
  bool has_sample = false;

  void sample(double r) {
    base_rtt_s = std::min(base_rtt_s, r);
    if (!has_sample) {
      srtt_s = r;
      rttvar_s = r / 2;
      has_sample = true;
    } else {
      rttvar_s = 0.75 * rttvar_s + 0.25 * std::abs(srtt_s - r);
      srtt_s = 0.875 * srtt_s + 0.125 * r;
    }
    // The floor applies to the variance term, as Linux does, so a large base RTT keeps headroom.
    rto_s = std::min(srtt_s + std::max(4 * rttvar_s, min_rto_s), max_rto_s);
  }

  [[nodiscard]] double current_rto() const {
    return std::min(max_rto_s, rto_s * std::pow(2.0, backoff));
  }
};


// ---------------------------------------------------------------------------
// Sender

struct SenderConfig {
  LinkParams link;
  RecoveryConfig recovery;
  VariantParams variant = VariantParams::of(Variant::CUBIC);
  std::int64_t init_cwnd = 10;
  double app_bytes = std::numeric_limits<double>::infinity();  // wire bytes the application will hand over
  double sndbuf_max_bytes = 64.0 * 1024 * 1024;
  double min_rto_s = 0.2;
  bool instrumented = false;  // throw InvariantViolation on any broken invariant
};

struct RecoveryEpisode {
  double t_entry = 0;
  double t_exit = -1;              // -1 while open or when ended by a timeout
  double t_first_retx_start = -1;  // bottleneck service start of the first retransmission
  double t_first_retx_sent = -1;
  double t_first_retx_acked = -1;  // first ACK echoing a transmission at or after the first retransmission
  double t_first_new_after = -1;   // first new-data service start at or after t_first_retx_acked
  double stall_time_s = 0;
  bool aborted_by_rto = false;
  std::int64_t holes_at_entry = 0;
  std::int64_t cwnd_at_entry = 0;
  std::int64_t flight_at_entry = 0;
  std::int64_t retransmits = 0;
};

struct SenderStats {
  std::uint64_t new_packets = 0;
  std::uint64_t retransmits = 0;
  std::uint64_t beyond_awnd_packets = 0;  // sent past the advertised edge
  std::uint64_t discards_detected = 0;    // of those, reported dropped by the receiver
  std::uint64_t lost_retransmits = 0;     // retransmissions inferred lost from later SACKs
  std::uint64_t acks = 0;
  std::uint64_t dupacks_in_recovery = 0;
  std::uint64_t dupacks_no_new_sack = 0;  // in recovery
  std::uint64_t hack1_fires = 0;
  std::uint64_t rto_count = 0;
  double stall_time_s = 0;
  double max_rtt_s = 0;
  std::vector<RecoveryEpisode> episodes;
};

struct SenderTrace {
  double t = 0;
  std::int64_t cwnd = 0;
  std::int64_t ssthresh = 0;
  std::int64_t pipe = 0;
  std::int64_t snd_una = 0;
  std::int64_t snd_nxt = 0;
  bool in_recovery = false;
  double rtt_s = -1;
  std::int64_t awnd_pkts = 0;
  double sndbuf_size = 0;
  double sndbuf_occupied = 0;
};

class Sender {
 public:
  /// Hands a data packet to the network; returns its bottleneck service start
  /// time, or NaN when the packet was dropped on entry.
  using Emit = std::function<double(const Packet&)>;

  Sender(SenderConfig cfg, EventQueue& eq, Emit emit)
      : cfg_(std::move(cfg)), eq_(eq), emit_(std::move(emit)) {
    cfg_.link.validate();
    cfg_.recovery.validate();
    if (cfg_.init_cwnd < 1) throw ConfigError("init_cwnd must be >= 1");
    s_ = static_cast<std::int64_t>(std::llround(cfg_.link.packet_size_bytes));
    engine_ = make_engine(cfg_.recovery, cfg_.variant, cfg_.link.packet_size_bytes);
    cc_.cwnd = cfg_.init_cwnd;
    awnd_pkts_ = awnd(cfg_.link);
    buf_.grow_factor = cfg_.recovery.sndbuf_factor;
    buf_.max_bytes = cfg_.sndbuf_max_bytes;
    buf_.app_backlog_bytes = cfg_.app_bytes;
    rtt_.min_rto_s = cfg_.min_rto_s;
  }

  Sender(const Sender&) = delete;
  Sender& operator=(const Sender&) = delete;

  std::function<void(const SenderTrace&)> on_trace;
  std::function<void(double now, double rtt_s)> on_rtt;

  void start() {
    sndbuf_tick(buf_, static_cast<double>(cc_.cwnd * s_));
    try_send(eq_.now());
  }

  void on_ack(const Packet& ack) {
    const double now = eq_.now();
    account_stall(now);
    ++stats_.acks;

    const std::int64_t una_before = sb_.snd_una();
    const std::int64_t cum = ack.cum_ack / s_;
    std::vector<ByteRange> blocks;
    blocks.reserve(ack.sack_blocks.size());
    for (const auto& b : normalize_sack(ack.sack_blocks, ack.cum_ack)) blocks.push_back({b.start / s_, b.end / s_});
    const bool dup = cum == una_before && sb_.flight_size() > 0;

    const auto ing = sb_.ingest(cum, blocks);
    awnd_pkts_ = ack.awnd_bytes / s_;
    note_discard(ack.echo_id);

    AckSample a;
    a.now = now;
    a.newly_delivered = ing.newly_acked + ing.newly_sacked;
    a.echo_sent_at = ack.ts_echo;
    a.delivered_bytes = static_cast<double>((sb_.snd_una() + sb_.sacked_count()) * s_);
    if (ack.ts_echo >= 0 && now >= ack.ts_echo) {
      a.rtt_s = now - ack.ts_echo;
      rtt_.sample(a.rtt_s);
      stats_.max_rtt_s = std::max(stats_.max_rtt_s, a.rtt_s);
      if (on_rtt) on_rtt(now, a.rtt_s);
    }
    sync();
    engine_->pkts_acked(cc_, a);

    if (ing.newly_acked > 0) {
      buf_.occupied_bytes = std::max(0.0, buf_.occupied_bytes - static_cast<double>(ing.newly_acked * s_));
      rtt_.backoff = 0;
      if (sb_.flight_size() > 0) {
        arm_rto(now);
      } else {
        ++rto_gen_;
        rto_armed_ = false;
      }
    }

    if (loss_state_ && sb_.snd_una() >= loss_high_) loss_state_ = false;
    if (cc_.in_recovery && !stats_.episodes.empty()) {
      auto& ep = stats_.episodes.back();
      if (ep.t_first_retx_sent >= 0 && ep.t_first_retx_acked < 0 && a.echo_sent_at >= ep.t_first_retx_sent) {
        ep.t_first_retx_acked = now;
        for (const double st : new_starts_) {
          if (st >= now) {
            ep.t_first_new_after = st;
            break;
          }
        }
      }
    }
    if (cc_.in_recovery && sb_.snd_una() >= recovery_high_) exit_recovery(now);
    if (!cc_.in_recovery && !loss_state_ && should_enter()) enter_recovery(now);

    if (cc_.in_recovery) {
      sb_.mark_lost_holes();
      stats_.lost_retransmits += static_cast<std::uint64_t>(sb_.detect_lost_retransmits());
      sync();
      engine_->on_ack_reduction(cc_, a);
      if (dup) {
        ++stats_.dupacks_in_recovery;
        if (!ing.new_sack) ++stats_.dupacks_no_new_sack;
        if (hack1_on_dupack(hack1_, cfg_.recovery.hack1_enabled, true, ing.new_sack, cfg_.recovery.dupthresh,
                            sb_.snd_una())) {
          fire_hack1(now);
        }
      }
    } else {
      if (loss_state_) {
        sb_.mark_lost_holes();
        sync();
      }
      if (cwnd_limited_) engine_->on_ack_open(cc_, a);
    }
    cc_.cwnd = std::max<std::int64_t>(1, cc_.cwnd);

    sndbuf_tick(buf_, static_cast<double>(cc_.cwnd * s_));
    try_send(now);
    trace(now, a.rtt_s);
  }

  [[nodiscard]] bool finished() const {
    return buf_.app_backlog_bytes <= 0 && sb_.flight_size() == 0 && unsent_pkts() == 0;
  }

  [[nodiscard]] const CcState& cc() const { return cc_; }
  [[nodiscard]] const Scoreboard& scoreboard() const { return sb_; }
  [[nodiscard]] const SndBuf& sndbuf() const { return buf_; }
  [[nodiscard]] const RttTracker& rtt() const { return rtt_; }
  [[nodiscard]] const SenderStats& stats() const { return stats_; }
  [[nodiscard]] const RecoveryEngine& engine() const { return *engine_; }
  [[nodiscard]] std::int64_t awnd_pkts() const { return awnd_pkts_; }
  [[nodiscard]] bool in_loss_state() const { return loss_state_; }
  [[nodiscard]] bool app_stalled() const { return stall_since_.has_value(); }

  /// Closes any running stall interval at `now` (end of run).
  void finalize(double now) { account_stall(now); }

 private:
  [[nodiscard]] std::int64_t unsent_pkts() const {
    const double unsent = buf_.occupied_bytes - static_cast<double>(sb_.flight_size() * s_);
    return std::max<std::int64_t>(0, floor_tol(unsent / static_cast<double>(s_)));
  }

  void sync() {
    cc_.pipe = sb_.pipe();
    cc_.flight_size = sb_.flight_size();
    cc_.n1 = sb_.holes();
    cc_.n2 = sb_.sacked_count();
  }

  [[nodiscard]] bool should_enter() const {
    if (cfg_.recovery.entry == EntryTrigger::Fack) {
      return sb_.highest_sacked_end() - sb_.snd_una() > cfg_.recovery.dupthresh;
    }
    return sb_.sacked_count() >= cfg_.recovery.dupthresh;
  }

  void enter_recovery(double now) {
    recovery_high_ = sb_.snd_nxt();
    new_starts_.clear();
    sync();
    RecoveryEpisode ep;
    ep.t_entry = now;
    ep.cwnd_at_entry = cc_.cwnd;
    ep.flight_at_entry = cc_.flight_size;
    engine_->init_reduction(cc_);
    sb_.mark_lost_holes();
    sync();
    ep.holes_at_entry = sb_.holes();
    stats_.episodes.push_back(ep);
    hack1_ = {};
  }

  void exit_recovery(double now) {
    engine_->end_reduction(cc_, now);
    stats_.episodes.back().t_exit = now;
  }

  // An ACK triggered by a packet sent past the advertised edge tells us whether
  // the receiver kept it: kept packets are SACKed or cumulatively acknowledged.
  void note_discard(std::uint64_t echo_id) {
    const auto it = beyond_ids_.find(echo_id);
    if (it == beyond_ids_.end()) return;
    const auto idx = it->second;
    beyond_ids_.erase(it);
    if (idx >= sb_.snd_una() && !(sb_.flags(idx) & Scoreboard::kSacked) && sb_.mark_discarded(idx)) {
      ++stats_.discards_detected;
    }
    if (beyond_ids_.size() > 4 * static_cast<std::size_t>(sb_.flight_size() + 16)) {
      std::erase_if(beyond_ids_, [&](const auto& kv) { return kv.second < sb_.snd_una(); });
    }
  }

  void fire_hack1(double now) {
    // A resent head needs about one RTT before its ACK can show up; until then,
    // further no-new-SACK DUPACKs come from the same discards and would only duplicate it.
    if (sb_.snd_una() == hack1_una_ && now - hack1_t_ < rtt_.srtt_s) return;
    hack1_una_ = sb_.snd_una();
    hack1_t_ = now;
    ++stats_.hack1_fires;
    sb_.reset_head_retransmit();
    sync();
    transmit(sb_.snd_una(), true, now, true);
  }

  void on_rto_fire() {
    const double now = eq_.now();
    rto_armed_ = false;
    account_stall(now);
    if (sb_.flight_size() == 0) return;
    ++stats_.rto_count;
    if (cc_.in_recovery) {
      stats_.episodes.back().aborted_by_rto = true;
      cc_.in_recovery = false;
    }
    sb_.mark_all_lost();
    sync();
    engine_->on_timeout(cc_, now);
    loss_state_ = true;
    loss_high_ = sb_.snd_nxt();
    hack1_ = {};
    ++rtt_.backoff;
    try_send(now);
    if (!rto_armed_) arm_rto(now);
    trace(now, -1);
  }

  void arm_rto(double now) {
    const auto gen = ++rto_gen_;
    rto_armed_ = true;
    eq_.schedule(now + rtt_.current_rto(), [this, gen] {
      if (gen == rto_gen_) on_rto_fire();
    });
  }

  void try_send(double now) {
    Transmission t;
    for (int guard = 0; guard < 1'000'000; ++guard) {
      SendView v;
      v.pipe = sb_.pipe();
      v.cwnd = cc_.cwnd;
      {
        const std::int64_t edge = sb_.snd_una() + awnd_pkts_;
        const std::int64_t ext =
            cfg_.recovery.or_enabled && cc_.in_recovery ? sb_.holes() + sb_.sacked_count() : 0;
        v.hole = sb_.next_hole(edge + ext, edge);
      }
      v.snd_una = sb_.snd_una();
      v.snd_nxt = sb_.snd_nxt();
      v.awnd_pkts = awnd_pkts_;
      v.or_allow = or_allowance(cfg_.recovery.or_enabled, cc_.in_recovery, v.hole.has_value(), sb_.holes(),
                                sb_.sacked_count());
      v.unsent_pkts = unsent_pkts();
      v.app_finished = buf_.app_backlog_bytes <= 0;
      t = select_transmission(v);
      if (t.kind == Transmission::Kind::Idle) break;
      if (cfg_.instrumented && t.kind == Transmission::Kind::NewData &&
          t.seq >= v.snd_una + v.awnd_pkts + v.or_allow) {
        throw InvariantViolation("flow-control limit exceeded");
      }
      transmit(t.seq, t.kind == Transmission::Kind::Retransmit, now, false);
    }
    cwnd_limited_ = t.reason == IdleReason::CwndLimited;
    if (t.reason == IdleReason::AppStalled) {
      if (!stall_since_) stall_since_ = now;
    } else {
      stall_since_.reset();
    }
  }

  void transmit(std::int64_t idx, bool retx, double now, bool forced) {
    if (cfg_.instrumented && !forced && sb_.pipe() >= cc_.cwnd) throw InvariantViolation("pipe would exceed cwnd");
    Packet p;
    p.id = next_id_++;
    p.kind = Packet::Kind::Data;
    p.seq_start = idx * s_;
    p.seq_end = (idx + 1) * s_;
    p.is_retransmit = retx;
    p.sent_at = now;
    if (retx) {
      if (idx == sb_.snd_una()) arm_rto(now);
      sb_.on_retransmit(idx);
      ++stats_.retransmits;
      if (cc_.in_recovery) ++stats_.episodes.back().retransmits;
    } else {
      if (idx >= sb_.snd_una() + awnd_pkts_) {
        ++stats_.beyond_awnd_packets;
        beyond_ids_[p.id] = idx;
      }
      sb_.on_send_new();
      ++stats_.new_packets;
    }
    sync();
    const double start = emit_(p);
    if (cc_.in_recovery) {
      auto& ep = stats_.episodes.back();
      if (retx && ep.t_first_retx_start < 0) {
        ep.t_first_retx_start = std::isnan(start) ? now : start;
        ep.t_first_retx_sent = now;
      } else if (!retx && !std::isnan(start) && ep.t_first_retx_sent >= 0) {
        // Queued new data may begin service after the first retransmission's ACK returns.
        if (ep.t_first_retx_acked < 0) {
          while (!new_starts_.empty() && new_starts_.front() < now) new_starts_.pop_front();
          new_starts_.push_back(start);
        } else if (ep.t_first_new_after < 0) {
          ep.t_first_new_after = start;
        }
      }
    }
    if (!rto_armed_) arm_rto(now);
  }

  void account_stall(double now) {
    if (!stall_since_) return;
    const double dt = now - *stall_since_;
    if (dt > 0) {
      stats_.stall_time_s += dt;
      buf_.stall_time_s += dt;
      if (cc_.in_recovery && !stats_.episodes.empty()) {
        auto& ep = stats_.episodes.back();
        ep.stall_time_s += now - std::max(*stall_since_, ep.t_entry);
      }
    }
    stall_since_ = now;
  }

  void trace(double now, double rtt_s) {
    if (!on_trace) return;
    SenderTrace r;
    r.t = now;
    r.cwnd = cc_.cwnd;
    r.ssthresh = cc_.ssthresh;
    r.pipe = sb_.pipe();
    r.snd_una = sb_.snd_una();
    r.snd_nxt = sb_.snd_nxt();
    r.in_recovery = cc_.in_recovery;
    r.rtt_s = rtt_s;
    r.awnd_pkts = awnd_pkts_;
    r.sndbuf_size = buf_.size_bytes;
    r.sndbuf_occupied = buf_.occupied_bytes;
    on_trace(r);
  }

  SenderConfig cfg_;
  EventQueue& eq_;
  Emit emit_;
  std::int64_t s_ = 1515;
  std::unique_ptr<RecoveryEngine> engine_;
  CcState cc_;
  Scoreboard sb_;
  SndBuf buf_;
  RttTracker rtt_;
  Hack1State hack1_;
  std::unordered_map<std::uint64_t, std::int64_t> beyond_ids_;  // packet id -> index, for sends past the AWnd edge
  std::int64_t hack1_una_ = -1;
  double hack1_t_ = -1;
  SenderStats stats_;
  std::int64_t awnd_pkts_ = 0;
  std::int64_t recovery_high_ = 0;
  bool loss_state_ = false;
  std::int64_t loss_high_ = 0;
  bool cwnd_limited_ = false;
  std::optional<double> stall_since_;
  std::deque<double> new_starts_;
  std::uint64_t rto_gen_ = 0;
  bool rto_armed_ = false;
  std::uint64_t next_id_ = 0;
};

}  // namespace tcplr
