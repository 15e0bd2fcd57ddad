#pragma once

// Single-threaded discrete-event scheduler and the forward-path bottleneck.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "tcplr/core.hpp"

namespace tcplr {

class EventQueue {
 public:
  using Action = std::function<void()>;

  void schedule(double at, Action fn) { heap_.push({at, next_seq_++, std::move(fn)}); }

  [[nodiscard]] bool empty() const { return heap_.empty(); }
  [[nodiscard]] double now() const { return now_; }
  [[nodiscard]] double next_time() const { return heap_.top().at; }

  /// Fires the earliest event. Returns false when nothing is pending.
  bool step() {
    if (heap_.empty()) return false;
    // The heap holds const elements; move the action out through a copy of the node.
    Node node = heap_.top();
    heap_.pop();
    if (node.at < now_) throw InvariantViolation("event scheduled in the past");
    now_ = node.at;
    node.fn();
    return true;
  }

  void run_until(double t_end) {
    while (!heap_.empty() && heap_.top().at <= t_end) step();
    now_ = std::max(now_, t_end);
  }

  [[nodiscard]] std::uint64_t fired() const { return next_seq_ - heap_.size(); }

 private:
  struct Node {
    double at;
    std::uint64_t seq;
    Action fn;
  };
  struct Later {
    bool operator()(const Node& a, const Node& b) const { return a.at != b.at ? a.at > b.at : a.seq > b.seq; }
  };
  std::priority_queue<Node, std::vector<Node>, Later> heap_;
  std::uint64_t next_seq_ = 0;
  double now_ = 0;
};

enum class EnqueueResult { Queued, TailDropped, LossModelDropped };

class BottleneckLink {
 public:
  BottleneckLink(const LinkParams& params, LossModel loss, std::uint64_t seed)
      : rate_bps_(params.rate_bps),
        capacity_bytes_(params.buffer_bytes),
        packet_bytes_(params.packet_size_bytes),
        loss_(std::move(loss)),
        rng_(seed) {
    loss_.validate();
    script_.insert(loss_.script.begin(), loss_.script.end());
  }

  struct Outcome {
    EnqueueResult result = EnqueueResult::Queued;
    double depart_s = 0;  // end of service when queued
  };

  /// Offers a data packet of `bytes` at time `now`; `index` is its packet number.
  Outcome enqueue(std::int64_t index, bool is_retransmit, double bytes, double now) {
    ++offered_;
    offered_bytes_ += bytes;
    if (drop_by_model(index, is_retransmit)) {
      ++model_drops_;
      dropped_bytes_ += bytes;
      return {EnqueueResult::LossModelDropped, 0};
    }
    expire(now);
    if (queued_bytes_ + bytes > capacity_bytes_) {
      ++tail_drops_;
      dropped_bytes_ += bytes;
      return {EnqueueResult::TailDropped, 0};
    }
    const double start = std::max(now, busy_until_);
    const double end = start + 8.0 * bytes / rate_bps_;
    if (periods_.empty() || start > periods_.back().end) {
      prefix_.push_back(prefix_.empty() ? 0 : prefix_.back() + (periods_.back().end - periods_.back().start));
      periods_.push_back({start, end});
    } else {
      periods_.back().end = end;
    }
    busy_until_ = end;
    in_queue_.push_back({end, bytes});
    queued_bytes_ += bytes;
    return {EnqueueResult::Queued, end};
  }

  /// Bytes waiting or in service at `now`.
  [[nodiscard]] double queued_bytes(double now) {
    expire(now);
    return queued_bytes_;
  }

  [[nodiscard]] double queued_packets(double now) { return queued_bytes(now) / packet_bytes_; }

  /// Total time the link was serving packets inside [t0, t1].
  [[nodiscard]] double busy_time(double t0, double t1) const {
    if (t1 <= t0 || periods_.empty()) return 0;
    return busy_before(t1) - busy_before(t0);
  }

  [[nodiscard]] double idle_time(double t0, double t1) const {
    return std::max(0.0, (t1 - t0) - busy_time(t0, t1));
  }

  [[nodiscard]] double busy_until() const { return busy_until_; }
  [[nodiscard]] std::uint64_t offered() const { return offered_; }
  [[nodiscard]] std::uint64_t model_drops() const { return model_drops_; }
  [[nodiscard]] std::uint64_t tail_drops() const { return tail_drops_; }
  [[nodiscard]] double offered_bytes() const { return offered_bytes_; }
  [[nodiscard]] double dropped_bytes() const { return dropped_bytes_; }
  [[nodiscard]] double departed_bytes(double now) {
    expire(now);
    return departed_bytes_;
  }

 private:
  struct Period {
    double start;
    double end;
  };
  struct InFlight {
    double depart;
    double bytes;
  };

  bool drop_by_model(std::int64_t index, bool is_retransmit) {
    if (is_retransmit && loss_.protect_retransmits) return false;
    switch (loss_.kind) {
      case LossModel::Kind::None: return false;
      case LossModel::Kind::RandomRate: return loss_.rate > 0 && uniform_(rng_) < loss_.rate;
      case LossModel::Kind::ConsecutiveBurst:
        return !is_retransmit && index >= loss_.trigger_seq && index < loss_.trigger_seq + loss_.burst_n;
      case LossModel::Kind::Scripted:
        if (is_retransmit) return false;
        return script_.erase(index) > 0;
    }
    return false;
  }

  void expire(double now) {
    while (!in_queue_.empty() && in_queue_.front().depart <= now) {
      queued_bytes_ -= in_queue_.front().bytes;
      departed_bytes_ += in_queue_.front().bytes;
      in_queue_.pop_front();
    }
    if (in_queue_.empty()) queued_bytes_ = 0;  // shed accumulated rounding
  }

  // Busy time in (-inf, t].
  [[nodiscard]] double busy_before(double t) const {
    auto it = std::upper_bound(periods_.begin(), periods_.end(), t,
                               [](double v, const Period& p) { return v < p.start; });
    if (it == periods_.begin()) return 0;
    const auto i = static_cast<std::size_t>(std::distance(periods_.begin(), it) - 1);
    const auto& p = periods_[i];
    return prefix_[i] + (std::min(t, p.end) - p.start);
  }

  double rate_bps_;
  double capacity_bytes_;
  double packet_bytes_;
  LossModel loss_;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::set<std::int64_t> script_;

  double busy_until_ = 0;
  std::deque<InFlight> in_queue_;
  double queued_bytes_ = 0;
  std::vector<Period> periods_;
  std::vector<double> prefix_;  // busy time before periods_[i]

  std::uint64_t offered_ = 0;
  std::uint64_t model_drops_ = 0;
  std::uint64_t tail_drops_ = 0;
  double offered_bytes_ = 0;
  double dropped_bytes_ = 0;
  double departed_bytes_ = 0;
};

}  // namespace tcplr
