#pragma once

// Event-level brute force for the minimum bottleneck idle time after a burst of
// n consecutive losses at the head of a full advertised window.
//
// Scenario: AW packets were sent back to back, the first n were lost and the
// remaining AW - n are SACKed by duplicate ACKs arriving one service time apart
// from t0. The first duplicate ACK already reveals every hole. Each packet sent
// afterwards occupies the link for 1/C and is acknowledged U later; the receiver
// consumes data instantly. The measured window opens when the first
// retransmission starts service and closes when the first new-data packet
// starts service at or after the return of the first retransmission's ACK.
//
// Nothing here is shared with the closed forms in analytic.hpp.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <queue>
#include <vector>

#include "tcplr/core.hpp"

namespace tcplr::oracle {

enum class EventKind { LinkBusyStart, LinkBusyEnd, RetransmitDeparted, FirstNewDeparted };

struct TraceEvent {
  double time_s = 0;
  EventKind kind = EventKind::LinkBusyStart;
};

struct OracleTrace {
  std::vector<TraceEvent> events;
  double idle_s = 0;
  double window_start_s = 0;
  double window_end_s = 0;
};

namespace detail {

struct Arrival {
  double t;
  std::int64_t seq;  // insertion order tiebreak
  std::int64_t pkt;
  bool operator>(const Arrival& o) const { return t != o.t ? t > o.t : seq > o.seq; }
};

class Window {
 public:
  Window(RecoveryAlgo algo, std::int64_t aw, double beta) : algo_(algo) {
    constexpr std::int64_t kUnbounded = std::numeric_limits<std::int64_t>::max() / 4;
    switch (algo) {
      case RecoveryAlgo::Standard: cwnd_ = (aw + 1) / 2; break;
      case RecoveryAlgo::RH:
      case RecoveryAlgo::PRR:
        cwnd_ = aw;
        target_ = ceil_tol(beta * static_cast<double>(aw));
        step_ = 1.0 - beta;
        break;
      case RecoveryAlgo::QARR:
      case RecoveryAlgo::BARR: cwnd_ = kUnbounded; break;
    }
  }

  void on_ack(std::int64_t pipe) {
    if (algo_ == RecoveryAlgo::RH) {
      if (pipe + 1 < cwnd_) cwnd_ = pipe + 1;
      if (cwnd_ > target_ && (++acks_ % 2 == 0)) --cwnd_;
    } else if (algo_ == RecoveryAlgo::PRR) {
      if (pipe + 1 < cwnd_) cwnd_ = pipe + 1;
      if (cwnd_ > target_) {
        debt_ += step_;
        while (debt_ >= 1.0 - 1e-12 && cwnd_ > target_) {
          --cwnd_;
          debt_ -= 1.0;
        }
      } else if (cwnd_ < target_) {
        ++cwnd_;
      }
    }
  }

  [[nodiscard]] std::int64_t cwnd() const { return cwnd_; }

 private:
  RecoveryAlgo algo_;
  std::int64_t cwnd_ = 0;
  std::int64_t target_ = 0;
  double step_ = 0;
  double debt_ = 0;
  std::int64_t acks_ = 0;
};

}  // namespace detail

/// Runs the best-case scenario and returns the full event trace.
[[nodiscard]] inline OracleTrace oracle_trace(RecoveryAlgo algo, bool or_enabled, const LinkParams& params,
                                              std::int64_t n, double beta, double t0 = 0) {
  const std::int64_t aw = awnd(params);
  if (n < 1) throw ConfigError("burst size must be at least one packet");
  if (n >= aw) throw ConfigError("the best-case scenario needs at least one SACKed packet (n < AW)");
  if (!(beta > 0 && beta <= 1)) throw ConfigError("beta must be in (0,1]");

  const double svc = 1.0 / rate_pkts(params);
  const double rtt = params.rtt_prop_s;

  std::priority_queue<detail::Arrival, std::vector<detail::Arrival>, std::greater<>> acks;
  std::int64_t order = 0;
  for (std::int64_t j = 0; j < aw - n; ++j) {
    acks.push({t0 + static_cast<double>(j) * svc, order++, n + j});
  }

  std::vector<char> received(static_cast<std::size_t>(aw), 0);
  std::vector<char> is_retx(static_cast<std::size_t>(aw), 0);
  std::int64_t rcv_nxt = 0;
  std::int64_t highest_rcvd = -1;
  std::int64_t rcvd_above = 0;  // received packets above rcv_nxt

  std::int64_t snd_una = 0;
  std::int64_t snd_nxt = aw;
  std::int64_t next_hole = 0;
  std::int64_t pipe = aw - n;
  detail::Window win(algo, aw, beta);

  struct Tx {
    double start;
    bool retx;
  };
  std::vector<Tx> txs;
  double busy_until = -std::numeric_limits<double>::infinity();
  std::optional<double> first_retx_ack;
  std::optional<double> window_end;

  auto transmit = [&](double now, std::int64_t pkt, bool retx) {
    const double start = std::max(now, busy_until);
    busy_until = start + svc;
    txs.push_back({start, retx});
    if (pkt >= static_cast<std::int64_t>(received.size())) {
      received.resize(static_cast<std::size_t>(pkt) + 1, 0);
      is_retx.resize(static_cast<std::size_t>(pkt) + 1, 0);
    }
    is_retx[static_cast<std::size_t>(pkt)] = retx ? 1 : 0;
    acks.push({start + svc + rtt, order++, pkt});
  };
  // Link service is FIFO, so start times in txs never decrease.
  std::size_t scan = 0;
  auto find_window_end = [&] {
    for (; scan < txs.size(); ++scan) {
      if (!txs[scan].retx && txs[scan].start >= *first_retx_ack) {
        window_end = txs[scan].start;
        return;
      }
    }
  };

  constexpr std::int64_t kMaxEvents = 50'000'000;
  std::int64_t processed = 0;
  while (!acks.empty() && !window_end) {
    if (++processed > kMaxEvents) throw InvariantViolation("oracle did not converge");
    const auto a = acks.top();
    acks.pop();
    const double now = a.t;
    const auto p = static_cast<std::size_t>(a.pkt);

    if (is_retx[p] && !first_retx_ack) first_retx_ack = now;
    received[p] = 1;
    --pipe;
    if (a.pkt > rcv_nxt) ++rcvd_above;
    highest_rcvd = std::max(highest_rcvd, a.pkt);
    while (rcv_nxt < static_cast<std::int64_t>(received.size()) && received[static_cast<std::size_t>(rcv_nxt)]) {
      ++rcv_nxt;
      if (rcv_nxt - 1 != a.pkt) --rcvd_above;
    }
    snd_una = rcv_nxt;

    win.on_ack(pipe);

    while (pipe < win.cwnd()) {
      if (next_hole < n) {
        transmit(now, next_hole++, true);
        ++pipe;
        continue;
      }
      std::int64_t limit = snd_una + aw;
      if (or_enabled) {
        const std::int64_t n2 = rcvd_above;
        const std::int64_t n1 = highest_rcvd >= snd_una ? (highest_rcvd + 1 - snd_una) - n2 : 0;
        limit += n1 + n2;
      }
      if (snd_nxt >= limit) break;
      transmit(now, snd_nxt++, false);
      ++pipe;
    }
    if (first_retx_ack) find_window_end();
  }
  if (!window_end) throw InvariantViolation("oracle ended without a new-data departure");

  OracleTrace trace;
  std::sort(txs.begin(), txs.end(), [](const Tx& x, const Tx& y) { return x.start < y.start; });
  const auto first_retx = std::find_if(txs.begin(), txs.end(), [](const Tx& t) { return t.retx; });
  const double w0 = first_retx->start;
  const double w1 = *window_end;
  trace.window_start_s = w0;
  trace.window_end_s = w1;

  double busy = 0;
  double run_start = 0;
  double run_end = -std::numeric_limits<double>::infinity();
  bool first_new_logged = false;
  auto close_run = [&] {
    if (run_end > run_start) {
      trace.events.push_back({run_end, EventKind::LinkBusyEnd});
    }
  };
  for (const auto& t : txs) {
    if (t.start > w1 + 1e-15) break;
    const double lo = std::max(t.start, w0);
    const double hi = std::min(t.start + svc, w1);
    if (hi > lo) busy += hi - lo;
    if (t.start + svc < w0) continue;
    if (t.start > run_end + 1e-15) {
      close_run();
      run_start = t.start;
      trace.events.push_back({t.start, EventKind::LinkBusyStart});
    }
    run_end = std::max(run_end, t.start + svc);
    if (t.retx) trace.events.push_back({t.start, EventKind::RetransmitDeparted});
    if (!t.retx && !first_new_logged && t.start >= w1 - 1e-15) {
      trace.events.push_back({t.start, EventKind::FirstNewDeparted});
      first_new_logged = true;
    }
  }
  close_run();
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const TraceEvent& x, const TraceEvent& y) { return x.time_s < y.time_s; });
  trace.idle_s = std::max(0.0, (w1 - w0) - busy);
  return trace;
}

/// Minimum bottleneck idle time over the measured recovery window.
[[nodiscard]] inline double oracle_imin(RecoveryAlgo algo, bool or_enabled, const LinkParams& params,
                                        std::int64_t n, double beta) {
  return oracle_trace(algo, or_enabled, params, n, beta).idle_s;
}

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::LinkBusyStart: return "link_busy_start";
    case EventKind::LinkBusyEnd: return "link_busy_end";
    case EventKind::RetransmitDeparted: return "retransmit_departed";
    case EventKind::FirstNewDeparted: return "first_new_departed";
  }
  return "?";
}

inline void write_trace_csv(std::ostream& os, const OracleTrace& trace) {
  os << "time_s,event\n";
  for (const auto& e : trace.events) os << e.time_s << ',' << to_string(e.kind) << '\n';
}

}  // namespace tcplr::oracle
